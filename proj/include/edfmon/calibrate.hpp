#pragma once

// Monte Carlo estimation of the quantiles of the limiting distribution of the
// scaled detector, the bundled quantile table and its log(p) interpolation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "edfmon/asymptotic_regression.hpp"
#include "edfmon/detector.hpp"
#include "edfmon/distributions.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/lrcov.hpp"
#include "edfmon/matrix.hpp"
#include "edfmon/parallel.hpp"
#include "edfmon/points.hpp"
#include "edfmon/rng.hpp"

namespace edfmon {

struct QuantileEntry {
  std::size_t p = 0;
  double alpha = 0.0;
  double q = 0.0;
};

/// Parameters of q(p) = 2 - f(log p) for one level alpha.
struct InterpRow {
  double alpha = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 1.0;
};

struct QuantileTable {
  double eta = 0.001;
  std::vector<QuantileEntry> entries;
  std::vector<InterpRow> interp;

  void validate() const {
    if (!(eta > 0.0)) throw InvalidArgument("quantile table eta must be positive");
    for (const auto& e : entries) {
      if (!(e.q > 0.0)) throw InvalidArgument("quantile table entries must be positive");
      if (e.p == 0) throw InvalidArgument("quantile table entry with p = 0");
    }
    for (const auto& r : interp) {
      if (!(r.beta3 > 0.0)) throw InvalidArgument("interpolation beta3 must be positive");
    }
  }
};

inline bool same_alpha(double a, double b) { return std::abs(a - b) <= 1e-9; }

/// The table for eta = 0.001 shipped with the library.
inline QuantileTable default_quantile_table() {
  QuantileTable t;
  t.eta = 0.001;
  const std::size_t ps[] = {2, 5, 10, 20};
  const double q01[] = {1.654, 1.234, 1.010, 0.860};
  const double q05[] = {1.511, 1.141, 0.946, 0.825};
  const double q10[] = {1.450, 1.099, 0.921, 0.806};
  for (int i = 0; i < 4; ++i) t.entries.push_back({ps[i], 0.01, q01[i]});
  for (int i = 0; i < 4; ++i) t.entries.push_back({ps[i], 0.05, q05[i]});
  for (int i = 0; i < 4; ++i) t.entries.push_back({ps[i], 0.10, q10[i]});
  t.interp = {{0.01, -0.126, 1.535, 2.080}, {0.05, 0.060, 1.475, 1.921}, {0.10, 0.140, 1.462, 1.870}};
  return t;
}

constexpr std::size_t kMaxInterpolatedP = 50;

/// 2 - [b1 + (b2 - b1)(1 - exp(-log(p)/b3))] for the row matching alpha.
inline double interpolate_quantile(std::size_t p, double alpha, const QuantileTable& table) {
  const auto row = std::find_if(table.interp.begin(), table.interp.end(),
                                [&](const InterpRow& r) { return same_alpha(r.alpha, alpha); });
  if (row == table.interp.end()) {
    throw AlphaNotInTable("no interpolation parameters for alpha=" + std::to_string(alpha));
  }
  if (p < 2 || p > kMaxInterpolatedP) {
    throw POutOfRange("p=" + std::to_string(p) + " outside the interpolation range [2, 50]");
  }
  const AsymptoticFit f{row->beta1, row->beta2, row->beta3};
  return 2.0 - f(std::log(static_cast<double>(p)));
}

/// Tabulated value when (p, alpha) is present, otherwise the interpolation.
inline double resolve_quantile(std::size_t p, double alpha, const QuantileTable& table) {
  for (const auto& e : table.entries) {
    if (e.p == p && same_alpha(e.alpha, alpha)) return e.q;
  }
  return interpolate_quantile(p, alpha, table);
}

enum class CovMode { TrueIid, Estimated };

struct CalibrationConfig {
  std::size_t m = 500;
  int max_exp = 16;
  std::size_t n_traj = 10000;
  CovMode cov_mode = CovMode::Estimated;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  LrcovSpec lrv{};

  static constexpr int kMinExp = 9;

  void validate() const {
    if (max_exp < kMinExp || max_exp > 30) throw InvalidArgument("max_exp must lie in [9, 30]");
    if (n_traj < 100) throw InvalidArgument("at least 100 trajectories are required");
    if (m < 2) throw InvalidArgument("calibration learning size must be at least 2");
    lrv.validate();
  }

  std::size_t horizons() const { return static_cast<std::size_t>(max_exp - kMinExp + 1); }
};

/// Long-run covariance of indicator vectors of an i.i.d. sequence at points
/// with probabilities pi_1 < ... < pi_p: min(pi_i, pi_j) - pi_i pi_j.
inline SpdMatrix iid_indicator_covariance(std::span<const double> probs) {
  const std::size_t p = probs.size();
  Matrix s(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      s(i, j) = std::min(probs[i], probs[j]) - probs[i] * probs[j];
  return SpdMatrix(std::move(s));
}

/// Evaluation points Phi^{-1}(i/(p+1)), i = 1..p.
inline EvalPoints normal_quantile_points(std::size_t p) {
  if (p == 0) throw InvalidArgument("p must be positive");
  EvalPoints ep;
  ep.d = 1;
  ep.mode = PointMode::UnivariateQuantile;
  ep.points = Matrix(p, 1);
  ep.probs = Matrix(p, 1);
  for (std::size_t i = 1; i <= p; ++i) {
    const double pi = static_cast<double>(i) / static_cast<double>(p + 1);
    ep.probs(i - 1, 0) = pi;
    ep.points(i - 1, 0) = normal_quantile(pi);
  }
  return ep;
}

/// Running sup of (m/k)^{3/2+eta} D(k) over k <= m + 2^r, r = 9..max_exp, for
/// one trajectory of i.i.d. N(0,1) data.
inline std::vector<double> simulate_sup_profile(std::size_t p, double eta,
                                                const CalibrationConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t m = cfg.m;
  Matrix learning(m, 1);
  for (std::size_t i = 0; i < m; ++i) learning(i, 0) = rng.normal();

  EvalPoints pts = normal_quantile_points(p);
  MonitorConfig mc;
  mc.eta = eta;
  mc.q = 1.0;
  std::optional<Monitor> mon;
  if (cfg.cov_mode == CovMode::TrueIid) {
    SpdMatrix sigma = iid_indicator_covariance(pts.probs.data());
    mon.emplace(learning, std::move(pts), std::move(sigma), mc);
  } else {
    mon.emplace(learning, std::move(pts), cfg.lrv, mc);
  }

  const std::size_t n = std::size_t{1} << cfg.max_exp;
  mon->reserve(n);
  std::vector<double> profile;
  profile.reserve(cfg.horizons());
  std::size_t next = std::size_t{1} << CalibrationConfig::kMinExp;
  double sup = 0.0;
  double x = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    x = rng.normal();
    sup = std::max(sup, mon->step({&x, 1}).scaled);
    if (i == next) {
      profile.push_back(sup);
      next <<= 1;
    }
  }
  return profile;
}

/// n_traj x (max_exp - 8) matrix of sup profiles; row t uses substream t.
inline Matrix simulate_sup_profiles(std::size_t p, double eta, const CalibrationConfig& cfg) {
  cfg.validate();
  Matrix out(cfg.n_traj, cfg.horizons());
  parallel_for(cfg.n_traj, cfg.workers, [&](std::size_t t) {
    Rng rng = Rng::substream(cfg.seed, t);
    const auto prof = simulate_sup_profile(p, eta, cfg, rng);
    std::copy(prof.begin(), prof.end(), out.row(t).begin());
  });
  return out;
}

struct QuantileEstimate {
  double q = 0.0;
  /// Empirical (1 - alpha)-quantiles per r = 9..max_exp.
  std::vector<double> per_r;
  std::optional<AsymptoticFit> fit;
};

/// Fits the asymptotic regression to (r, q_r) and returns beta2; falls back
/// to max q_r when the fit is degenerate.
inline QuantileEstimate quantile_from_profiles(const Matrix& profiles, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  QuantileEstimate est;
  std::vector<double> xs;
  for (std::size_t c = 0; c < profiles.cols(); ++c) {
    est.per_r.push_back(empirical_quantile(profiles.col(c), 1.0 - alpha));
    xs.push_back(static_cast<double>(CalibrationConfig::kMinExp) + static_cast<double>(c));
  }
  const double largest = *std::max_element(est.per_r.begin(), est.per_r.end());
  if (xs.size() < 4) {
    std::cerr << "warning: fewer than 4 horizons; using the largest per-horizon quantile\n";
    est.q = largest;
    return est;
  }
  try {
    est.fit = fit_asymptotic_regression(xs, est.per_r);
    est.q = est.fit->beta2;
  } catch (const SingularJacobian& e) {
    std::cerr << "warning: " << e.what() << "; using the largest per-horizon quantile\n";
    est.q = largest;
  }
  return est;
}

inline QuantileEstimate estimate_quantile(std::size_t p, double alpha, double eta,
                                          const CalibrationConfig& cfg) {
  return quantile_from_profiles(simulate_sup_profiles(p, eta, cfg), alpha);
}

/// Table with one entry per (p, alpha). Interpolation rows are fitted to
/// (log p, 2 - q) when at least four distinct p are present.
using CalibrationReport = std::function<void(std::size_t p, double alpha, const QuantileEstimate&)>;

inline QuantileTable build_quantile_table(const std::vector<std::size_t>& ps,
                                          const std::vector<double>& alphas, double eta,
                                          const CalibrationConfig& cfg,
                                          const CalibrationReport& report = {}) {
  if (ps.empty() || alphas.empty()) throw InvalidArgument("need at least one p and one alpha");
  QuantileTable table;
  table.eta = eta;
  std::vector<std::size_t> sorted_p = ps;
  std::sort(sorted_p.begin(), sorted_p.end());
  sorted_p.erase(std::unique(sorted_p.begin(), sorted_p.end()), sorted_p.end());
  std::vector<std::vector<double>> q(alphas.size());
  for (std::size_t p : sorted_p) {
    const Matrix profiles = simulate_sup_profiles(p, eta, cfg);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const QuantileEstimate est = quantile_from_profiles(profiles, alphas[a]);
      if (report) report(p, alphas[a], est);
      const double value = est.q;
      table.entries.push_back({p, alphas[a], value});
      q[a].push_back(value);
    }
  }
  if (sorted_p.size() >= 4) {
    std::vector<double> xs;
    for (std::size_t p : sorted_p) xs.push_back(std::log(static_cast<double>(p)));
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::vector<double> ys;
      for (double v : q[a]) ys.push_back(2.0 - v);
      try {
        const AsymptoticFit f = fit_asymptotic_regression(xs, ys);
        table.interp.push_back({alphas[a], f.beta1, f.beta2, f.beta3});
      } catch (const SingularJacobian& e) {
        std::cerr << "warning: no interpolation row for alpha=" << alphas[a] << ": " << e.what()
                  << "\n";
      }
    }
  }
  return table;
}

}  // namespace edfmon
