#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "edfmon/calibrate.hpp"
#include "edfmon/detector.hpp"
#include "edfmon/genmodels.hpp"
#include "edfmon/points.hpp"
#include "edfmon/rng.hpp"
#include "support/oracles.hpp"

using namespace edfmon;

namespace {

MonitorConfig config(double q = 1.0) {
  MonitorConfig c;
  c.q = q;
  return c;
}

Matrix random_spd(std::size_t p, Rng& rng) {
  Matrix b(p, p);
  for (auto& v : b.data()) v = rng.normal();
  Matrix a = b.transpose() * b;
  for (std::size_t i = 0; i < p; ++i) a(i, i) += 0.1;
  return a;
}

}  // namespace

TEST(Threshold, ReferenceValue) {
  MonitorConfig c;
  c.q = 1.511;
  EXPECT_NEAR(threshold(2.0, c), 1.511 * std::pow(2.0, 1.501), 1e-12);
  EXPECT_NEAR(threshold(2.0, c), 4.2767, 1e-4);
}

TEST(Threshold, IncreasingWithoutDamping) {
  const MonitorConfig c = config(1.0);
  double prev = 0.0;
  for (double t = 1.001; t < 50.0; t *= 1.1) {
    const double w = threshold(t, c);
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST(Threshold, FloorActive) {
  MonitorConfig c = config(1.3);
  c.gamma = 1.0;
  c.epsilon = 1e-10;
  const double t = 1.0 + 1e-12;
  EXPECT_DOUBLE_EQ(threshold(t, c), 1e-10 * 1.3 * std::pow(t, 1.501));
}

TEST(MonitorConfig, Validation) {
  MonitorConfig c = config();
  EXPECT_NO_THROW(c.validate());
  c.eta = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config();
  c.alpha = 0.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config(0.0);
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Monitor, InitPrefix) {
  const Matrix learning = Matrix::column(std::vector<double>{1, 2, 3, 4});
  Monitor mon(learning, EvalPoints::user(Matrix{{2.5}}), SpdMatrix(Matrix{{1.0}}), config());
  EXPECT_EQ(mon.m(), 4u);
  EXPECT_EQ(mon.k(), 4u);
  EXPECT_EQ(mon.prefix_length(), 1u);
  EXPECT_EQ(mon.prefix(4)[0], 2u);
}

TEST(Monitor, InitDegenerate) {
  const Matrix learning = Matrix::column(std::vector<double>{5, 5, 5, 5});
  EXPECT_THROW(Monitor(learning, EvalPoints::user(Matrix{{1.0}}), LrcovSpec{}, config()),
               DegenerateSeries);
}

TEST(Monitor, InitSigmaMatchesIidFormula) {
  Rng rng(3);
  const auto x = gen_ar1(800, 0.0, rng);
  const Matrix learning = Matrix::column(x);
  Monitor mon(learning, select_univariate(learning, 5), LrcovSpec{}, config());
  for (std::size_t i = 1; i <= 5; ++i)
    for (std::size_t j = 1; j <= 5; ++j) {
      const double expected = std::min(i, j) / 6.0 - static_cast<double>(i * j) / 36.0;
      EXPECT_NEAR(mon.sigma()(i - 1, j - 1), expected, 0.05);
    }
}

TEST(Monitor, HandComputedSingleSplit) {
  const Matrix learning = Matrix::column(std::vector<double>{1, 2, 3, 4});
  const EvalPoints pts = EvalPoints::user(Matrix{{2.5}});
  const SpdMatrix sigma(Matrix{{1.0}});
  Monitor mon(learning, pts, sigma, config());
  const double x = 10.0;
  const StepResult r = mon.step({&x, 1});
  EXPECT_EQ(r.k, 5u);
  EXPECT_NEAR(r.detector, 0.25, 1e-15);
  Matrix all = learning;
  all.append_row(std::vector<double>{10.0});
  EXPECT_NEAR(detector_bruteforce(all, pts, sigma, 4), 0.25, 1e-15);
}

TEST(Monitor, ZeroWhenIndicatorsConstantAcrossSplit) {
  // Every observation is below the point: all indicator rows equal.
  const Matrix learning = Matrix::column(std::vector<double>{1, 2, 3, 4});
  Monitor mon(learning, EvalPoints::user(Matrix{{100.0}}), SpdMatrix(Matrix{{0.3}}), config());
  for (double x : {5.0, 6.0, 7.0}) EXPECT_EQ(mon.step({&x, 1}).detector, 0.0);
}

TEST(Monitor, StepEqualsBruteForceRandomized) {
  Rng rng(2718);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t d = 1 + inst % 3;
    const std::size_t m = 20 + static_cast<std::size_t>(rng.uniform() * 41);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 100);
    const std::size_t p = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    Matrix data(m + n, d);
    for (auto& v : data.data()) v = rng.normal();
    Matrix pts(p, d);
    for (auto& v : pts.data()) v = rng.normal() * 0.8;
    const EvalPoints ep = EvalPoints::user(pts);
    const SpdMatrix sigma(random_spd(p, rng));
    Monitor mon(data.slice_rows(0, m), ep, sigma, config());
    for (std::size_t k = m + 1; k <= m + n; ++k) {
      const StepResult r = mon.step(data.row(k - 1));
      const double brute = detector_bruteforce(data.slice_rows(0, k), ep, sigma, m);
      ASSERT_NEAR(r.detector, brute, 1e-10 * std::max(1.0, brute))
          << "instance " << inst << " k=" << k;
    }
  }
}

TEST(Monitor, LongStreamEqualsBruteForce) {
  Rng rng(11);
  const std::size_t m = 50, n = 200;
  Matrix data(m + n, 1);
  for (auto& v : data.data()) v = rng.normal();
  for (std::size_t i = m + 100; i < m + n; ++i) data(i, 0) += 0.8;
  const Matrix learning = data.slice_rows(0, m);
  const EvalPoints ep = select_univariate(learning, 5);
  Monitor mon(learning, ep, LrcovSpec{}, config());
  for (std::size_t k = m + 1; k <= m + n; ++k) {
    const StepResult r = mon.step(data.row(k - 1));
    ASSERT_NEAR(r.detector, detector_bruteforce(data.slice_rows(0, k), ep, mon.sigma(), m), 1e-10);
  }
}

TEST(Monitor, BruteForceSingleTermAtFirstStep) {
  // k = m + 1 has the single split j = m.
  const Matrix data = Matrix::column(std::vector<double>{0.1, 0.9, 0.4, 2.0});
  const EvalPoints ep = EvalPoints::user(Matrix{{0.5}});
  const SpdMatrix sigma(Matrix{{0.25}});
  // Ybar_{1:3} = 2/3, Ybar_{4:4} = 0, weight 3/3^{1.5}, norm (2/3)/0.5.
  const double expected = 3.0 / std::pow(3.0, 1.5) * (2.0 / 3.0) / 0.5;
  EXPECT_NEAR(detector_bruteforce(data, ep, sigma, 3), expected, 1e-14);
}

TEST(Monitor, ScalarPathMatchesCusumOracle) {
  Rng rng(19);
  const std::size_t m = 40, n = 60;
  Matrix data(m + n, 1);
  for (auto& v : data.data()) v = rng.normal();
  const EvalPoints ep = EvalPoints::user(Matrix{{0.2}});
  const double s2 = 0.37;
  Monitor mon(data.slice_rows(0, m), ep, SpdMatrix(Matrix{{s2}}), config());
  std::vector<double> y;
  for (std::size_t i = 0; i < m + n; ++i) y.push_back(data(i, 0) <= 0.2 ? 1.0 : 0.0);
  for (std::size_t k = m + 1; k <= m + n; ++k) {
    const StepResult r = mon.step(data.row(k - 1));
    const double cusum = oracle::scalar_cusum(std::span(y).first(k), m, std::sqrt(s2));
    ASSERT_NEAR(r.detector, cusum, 1e-12);
  }
}

TEST(Monitor, ScaledAndAlarmConsistent) {
  Rng rng(21);
  const Matrix learning = Matrix::column(gen_ar1(200, 0.0, rng));
  MonitorConfig c = config(1.141);
  Monitor mon(learning, select_univariate(learning, 5), LrcovSpec{}, c);
  for (int i = 0; i < 300; ++i) {
    const double x = rng.normal() + (i > 150 ? 2.0 : 0.0);
    const StepResult r = mon.step({&x, 1});
    const double t = static_cast<double>(r.k) / 200.0;
    EXPECT_NEAR(r.scaled, std::pow(1.0 / t, 1.501) * r.detector, 1e-12 * (1.0 + r.detector));
    EXPECT_EQ(r.alarm, r.detector > r.threshold);
    EXPECT_GE(r.detector, 0.0);
  }
  EXPECT_TRUE(mon.alarm_at().has_value());
}

TEST(Monitor, LowerQAlarmsNoLater) {
  Rng rng(5);
  const auto x = gen_ar1(1200, 0.0, rng);
  Matrix data = Matrix::column(x);
  for (std::size_t i = 600; i < 1200; ++i) data(i, 0) += 0.5;
  const Matrix learning = data.slice_rows(0, 400);
  const EvalPoints ep = select_univariate(learning, 5);
  std::optional<std::size_t> prev;
  for (double q : {1.5, 1.141, 0.8, 0.5}) {
    Monitor mon(learning, ep, LrcovSpec{}, config(q));
    for (std::size_t i = 400; i < data.rows() && !mon.alarm_at(); ++i) mon.step(data.row(i));
    if (prev) {
      ASSERT_TRUE(mon.alarm_at().has_value());
      EXPECT_LE(*mon.alarm_at(), *prev);
    }
    if (mon.alarm_at()) prev = mon.alarm_at();
  }
  EXPECT_TRUE(prev.has_value());
}

TEST(Monitor, MarginFree) {
  Rng rng(13);
  for (std::size_t d : {1u, 2u}) {
    Matrix data(500, d);
    for (auto& v : data.data()) v = rng.normal();
    Matrix t1 = data, t2 = data;
    for (auto& v : t1.data()) v = std::exp(v);
    for (auto& v : t2.data()) v = v * v * v + v;
    auto run = [&](const Matrix& x) {
      const Matrix learning = x.slice_rows(0, 300);
      const EvalPoints ep = d == 1 ? select_univariate(learning, 5)
                                   : select_multivariate(learning, 4, 1.5);
      Monitor mon(learning, ep, LrcovSpec{}, config());
      std::vector<StepResult> trace;
      for (std::size_t i = 300; i < x.rows(); ++i) trace.push_back(mon.step(x.row(i)));
      return trace;
    };
    const auto a = run(data), b = run(t1), c = run(t2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].detector, b[i].detector, 1e-12);
      EXPECT_NEAR(a[i].detector, c[i].detector, 1e-12);
      EXPECT_EQ(a[i].alarm, b[i].alarm);
    }
  }
}

TEST(Monitor, PrefixInvariants) {
  Rng rng(17);
  const Matrix learning = Matrix::column(gen_ar1(100, 0.0, rng));
  Monitor mon(learning, select_univariate(learning, 4), LrcovSpec{}, config());
  for (int i = 0; i < 50; ++i) {
    const double x = rng.normal();
    mon.step({&x, 1});
  }
  EXPECT_EQ(mon.prefix_length(), mon.k() - mon.m() + 1);
  for (std::size_t j = mon.m(); j < mon.k(); ++j) {
    const auto a = mon.prefix(j);
    const auto b = mon.prefix(j + 1);
    for (std::size_t l = 0; l < a.size(); ++l) {
      EXPECT_LE(a[l], b[l]);
      EXPECT_LE(b[l] - a[l], 1u);
    }
  }
  EXPECT_THROW(mon.prefix(mon.m() - 1), InvalidArgument);
}

TEST(Monitor, MaxHorizon) {
  const Matrix learning = Matrix::column(std::vector<double>{1, 2, 3, 4});
  Monitor mon(learning, EvalPoints::user(Matrix{{2.5}}), SpdMatrix(Matrix{{1.0}}), config());
  mon.set_max_horizon(6);
  const double x = 1.0;
  mon.step({&x, 1});
  mon.step({&x, 1});
  EXPECT_THROW(mon.step({&x, 1}), HorizonExceeded);
}

TEST(Monitor, ErrorsOnBadShapes) {
  const Matrix learning(10, 2, 0.0);
  EXPECT_THROW(Monitor(learning, EvalPoints::user(Matrix{{1.0}}), SpdMatrix(Matrix{{1.0}}), config()),
               DimensionMismatch);
  const Matrix l1 = Matrix::column(std::vector<double>{1, 2, 3});
  EXPECT_THROW(Monitor(l1, EvalPoints::user(Matrix{{1.0}, {2.0}}), SpdMatrix(Matrix{{1.0}}), config()),
               DimensionMismatch);
  EXPECT_THROW(Monitor(Matrix::column(std::vector<double>{1}), EvalPoints::user(Matrix{{1.0}}),
                       SpdMatrix(Matrix{{1.0}}), config()),
               TooFewObservations);
  Monitor ok(l1, EvalPoints::user(Matrix{{1.5}}), SpdMatrix(Matrix{{1.0}}), config());
  const std::vector<double> wide{1, 2};
  EXPECT_THROW(ok.step(wide), DimensionMismatch);
}

TEST(Monitor, WideUnfusedPathMatchesBruteForce) {
  Rng rng(29);
  const std::size_t m = 60, n = 40, p = Monitor::kFusedMaxP + 4;
  Matrix data(m + n, 1);
  for (auto& v : data.data()) v = rng.normal();
  const Matrix learning = data.slice_rows(0, m);
  const EvalPoints ep = normal_quantile_points(p);
  const SpdMatrix sigma = iid_indicator_covariance(ep.probs.data());
  Monitor mon(learning, ep, sigma, config());
  for (std::size_t k = m + 1; k <= m + n; ++k) {
    const StepResult r = mon.step(data.row(k - 1));
    ASSERT_NEAR(r.detector, detector_bruteforce(data.slice_rows(0, k), ep, sigma, m), 1e-10);
  }
}
