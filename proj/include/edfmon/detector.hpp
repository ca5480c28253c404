#pragma once

// Streaming evaluation of the open-end detector
//
//   D(k) = max_{m <= j < k} j (k - j) / m^{3/2} || Ybar_{1:j} - Ybar_{j+1:k} ||_{Sigma^-1}
//
// and of the threshold q (k/m)^{3/2 + eta}, optionally damped by
// max{((t-1)/t)^gamma, epsilon}.
//
// Implementation note. With S_j the prefix sums of the indicator vectors,
// j (k - j) (Ybar_{1:j} - Ybar_{j+1:k}) = k S_j - j S_k, which is unchanged
// when every Y_i is shifted by a constant vector c. The monitor therefore
// stores W_j = L^{-1} (S_j - j c) with c the learning-sample mean and L the
// Cholesky factor of Sigma, plus |W_j|^2, so that
//
//   || k S_j - j S_k ||^2_{Sigma^-1} = k^2 |W_j|^2 - 2 k j <W_j, W_k> + j^2 |W_k|^2
//
// costs one length-p dot product per split point j. Centering keeps the
// three terms of the same order under the null, so the cancellation is mild.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edfmon/errors.hpp"
#include "edfmon/lrcov.hpp"
#include "edfmon/matrix.hpp"
#include "edfmon/points.hpp"

namespace edfmon {

struct MonitorConfig {
  double alpha = 0.05;
  double eta = 0.001;
  double gamma = 0.0;
  double epsilon = 1e-10;
  /// (1 - alpha)-quantile of the limiting distribution.
  double q = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("alpha must lie in (0, 1/2)");
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(q > 0.0)) throw InvalidArgument("quantile q must be positive");
  }
};

struct StepResult {
  std::size_t k = 0;
  double detector = 0.0;
  /// (m/k)^{3/2+eta} * detector.
  double scaled = 0.0;
  double threshold = 0.0;
  bool alarm = false;
};

/// max{((t-1)/t)^gamma, epsilon} * q * t^{3/2+eta}.
inline double threshold(double t, const MonitorConfig& cfg) {
  const double damp = std::max(std::pow((t - 1.0) / t, cfg.gamma), cfg.epsilon);
  return damp * cfg.q * std::pow(t, 1.5 + cfg.eta);
}

/// Single-writer streaming monitor. Holds the learning summary and the
/// growing prefix-sum state; each step costs O((k - m) p) time.
class Monitor {
 public:
  static constexpr std::size_t kFusedMaxP = 16;

  /// Estimates Sigma from the learning indicators with `lrv`.
  Monitor(const Matrix& learning, EvalPoints pts, const LrcovSpec& lrv, MonitorConfig cfg)
      : pts_(std::move(pts)), cfg_(cfg) {
    const Matrix y = prepare(learning);
    sigma_ = estimate_lrcov(y, lrv);
    finish_init(y);
  }

  /// Uses a caller-supplied long-run covariance matrix.
  Monitor(const Matrix& learning, EvalPoints pts, SpdMatrix sigma, MonitorConfig cfg)
      : pts_(std::move(pts)), cfg_(cfg), sigma_(std::move(sigma)) {
    const Matrix y = prepare(learning);
    if (sigma_.dim() != pts_.p()) {
      throw DimensionMismatch("covariance is " + std::to_string(sigma_.dim()) + "x" +
                              std::to_string(sigma_.dim()) + " for p=" +
                              std::to_string(pts_.p()));
    }
    finish_init(y);
  }

  /// Aborts further steps with HorizonExceeded once k would exceed `k_max`.
  void set_max_horizon(std::size_t k_max) { max_horizon_ = k_max; }

  /// Pre-allocates state for `steps` further observations.
  void reserve(std::size_t steps) {
    const std::size_t n = (k_ - m_ + 1) + steps;
    prefix_.reserve(n * p_);
    for (auto& w : w_) w.reserve(n);
    norms_.reserve(n);
    jvals_.reserve(n);
    acc_.reserve(n);
  }

  StepResult step(std::span<const double> x) {
    if (max_horizon_ && k_ + 1 > *max_horizon_) {
      throw HorizonExceeded("monitoring horizon " + std::to_string(*max_horizon_) + " reached");
    }
    indicator_row(x, pts_, ybuf_);

    const std::size_t prev = prefix_.size() - p_;
    for (std::size_t l = 0; l < p_; ++l) {
      prefix_.push_back(prefix_[prev + l] + static_cast<std::uint32_t>(ybuf_[l]));
    }
    ++k_;

    const double kd = static_cast<double>(k_);
    whiten_prefix(k_, wbuf_);
    double nk = 0.0;
    for (double v : wbuf_) nk += v * v;

    // Split points j = m + idx, idx in [0, k - m).
    const std::size_t count = k_ - m_;
    const double* nj = norms_.data();
    const double* jv = jvals_.data();
    const double k2 = kd * kd;
    double best = 0.0;
    if (p_ <= kFusedMaxP) {
      best = fused_max(count, k2, -2.0 * kd, nk);
    } else {
      acc_.assign(count, 0.0);
      double* acc = acc_.data();
      for (std::size_t l = 0; l < p_; ++l) {
        const double* wl = w_[l].data();
        const double c = -2.0 * kd * wbuf_[l];
#pragma omp simd
        for (std::size_t idx = 0; idx < count; ++idx) acc[idx] += wl[idx] * c;
      }
#pragma omp simd reduction(max : best)
      for (std::size_t idx = 0; idx < count; ++idx) {
        const double j = jv[idx];
        const double v = k2 * nj[idx] + j * (acc[idx] + j * nk);
        best = v > best ? v : best;
      }
    }

    push_state(kd, nk);

    const double md = static_cast<double>(m_);
    StepResult r;
    r.k = k_;
    r.detector = std::sqrt(best / (static_cast<double>(p_) * md * md * md));
    r.scaled = std::pow(md / kd, 1.5 + cfg_.eta) * r.detector;
    r.threshold = threshold(kd / md, cfg_);
    r.alarm = r.detector > r.threshold;
    if (r.alarm && !alarm_at_) alarm_at_ = k_;
    return r;
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t p() const noexcept { return p_; }
  const EvalPoints& points() const noexcept { return pts_; }
  const SpdMatrix& sigma() const noexcept { return sigma_; }
  const LowerTriangular& chol() const noexcept { return chol_; }
  const MonitorConfig& config() const noexcept { return cfg_; }
  std::optional<std::size_t> alarm_at() const noexcept { return alarm_at_; }

  /// Number of stored prefix sums, k - m + 1.
  std::size_t prefix_length() const noexcept { return prefix_.size() / p_; }
  /// S_j = sum_{i <= j} Y_i for j in [m, k].
  std::span<const std::uint32_t> prefix(std::size_t j) const {
    if (j < m_ || j > k_) throw InvalidArgument("prefix index outside [m, k]");
    return {prefix_.data() + (j - m_) * p_, p_};
  }

 private:
  Matrix prepare(const Matrix& learning) {
    cfg_.validate();
    if (pts_.p() == 0) throw InvalidArgument("no evaluation points");
    if (learning.rows() < 2) throw TooFewObservations("learning sample needs at least 2 rows");
    if (learning.cols() != pts_.d) {
      throw DimensionMismatch("learning sample has " + std::to_string(learning.cols()) +
                              " columns, points have dimension " + std::to_string(pts_.d));
    }
    m_ = k_ = learning.rows();
    p_ = pts_.p();
    return indicator_rows(learning, pts_);
  }

  void finish_init(const Matrix& y) {
    chol_ = cholesky(sigma_);
    center_.assign(p_, 0.0);
    std::vector<std::uint32_t> s(p_, 0);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t l = 0; l < p_; ++l) s[l] += static_cast<std::uint32_t>(y(i, l));
    for (std::size_t l = 0; l < p_; ++l) {
      center_[l] = static_cast<double>(s[l]) / static_cast<double>(m_);
    }
    prefix_.assign(s.begin(), s.end());
    ybuf_.assign(p_, 0.0);
    wbuf_.assign(p_, 0.0);
    w_.assign(p_, {});
    whiten_prefix(m_, wbuf_);
    double n = 0.0;
    for (double v : wbuf_) n += v * v;
    push_state(static_cast<double>(m_), n);
  }

  // max over split points of k^2 N_j - 2 k j <W_j, W_k> + j^2 N_k with the
  // dot product formed in registers; P is the number of points.
  template <std::size_t P>
  double fused_max_p(std::size_t count, double k2, double scale, double nk) const {
    const double* wl[P];
    double c[P];
    for (std::size_t l = 0; l < P; ++l) {
      wl[l] = w_[l].data();
      c[l] = scale * wbuf_[l];
    }
    const double* nj = norms_.data();
    const double* jv = jvals_.data();
    double best = 0.0;
#pragma omp simd reduction(max : best)
    for (std::size_t idx = 0; idx < count; ++idx) {
      double dot = 0.0;
      for (std::size_t l = 0; l < P; ++l) dot += wl[l][idx] * c[l];
      const double j = jv[idx];
      const double v = k2 * nj[idx] + j * (dot + j * nk);
      best = v > best ? v : best;
    }
    return best;
  }

  template <std::size_t... Ps>
  double dispatch_fused(std::size_t count, double k2, double scale, double nk,
                        std::index_sequence<Ps...>) const {
    double best = 0.0;
    ((p_ == Ps + 1 ? (best = fused_max_p<Ps + 1>(count, k2, scale, nk), true) : false) || ...);
    return best;
  }

  double fused_max(std::size_t count, double k2, double scale, double nk) const {
    return dispatch_fused(count, k2, scale, nk, std::make_index_sequence<kFusedMaxP>{});
  }

  // out = L^{-1} (S_j - j c) for the most recently stored prefix S_j.
  void whiten_prefix(std::size_t j, std::vector<double>& out) const {
    const std::size_t base = prefix_.size() - p_;
    const double jd = static_cast<double>(j);
    for (std::size_t l = 0; l < p_; ++l) {
      out[l] = static_cast<double>(prefix_[base + l]) - jd * center_[l];
    }
    chol_.forward_solve_inplace(out);
  }

  void push_state(double j, double norm2) {
    for (std::size_t l = 0; l < p_; ++l) w_[l].push_back(wbuf_[l]);
    norms_.push_back(norm2);
    jvals_.push_back(j);
  }

  EvalPoints pts_;
  MonitorConfig cfg_;
  SpdMatrix sigma_;
  LowerTriangular chol_;
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::size_t p_ = 0;
  std::optional<std::size_t> max_horizon_;
  std::optional<std::size_t> alarm_at_;

  std::vector<double> center_;
  std::vector<std::uint32_t> prefix_;
  // Coordinate-major whitened centered prefix sums, indexed by j - m.
  std::vector<std::vector<double>> w_;
  std::vector<double> norms_;
  std::vector<double> jvals_;

  std::vector<double> ybuf_;
  std::vector<double> wbuf_;
  std::vector<double> acc_;
};

/// Recomputes D(k) from scratch for data rows 1..k (k = data.rows()) using
/// empirical d.f. differences F_{1:j} - F_{j+1:k} at each point. Testing
/// oracle: quadratic in k, no prefix sums.
inline double detector_bruteforce(const Matrix& data, const EvalPoints& pts,
                                  const SpdMatrix& sigma, std::size_t m) {
  const std::size_t k = data.rows();
  if (k <= m) throw InvalidArgument("brute-force detector needs k > m");
  const std::size_t p = pts.p();
  const LowerTriangular chol = cholesky(sigma);
  const double scale = std::pow(static_cast<double>(m), 1.5);
  auto edf = [&](std::size_t first, std::size_t last, std::size_t l) {
    // F_{first:last}(x_l), 1-based inclusive indices.
    std::size_t below = 0;
    const auto pt = pts.points.row(l);
    for (std::size_t i = first; i <= last; ++i) {
      const auto x = data.row(i - 1);
      bool ok = true;
      for (std::size_t c = 0; c < pts.d; ++c) ok = ok && x[c] <= pt[c];
      below += ok ? 1 : 0;
    }
    return static_cast<double>(below) / static_cast<double>(last - first + 1);
  };
  double best = 0.0;
  std::vector<double> diff(p);
  for (std::size_t j = m; j < k; ++j) {
    for (std::size_t l = 0; l < p; ++l) diff[l] = edf(1, j, l) - edf(j + 1, k, l);
    const double w = static_cast<double>(j) * static_cast<double>(k - j) / scale;
    best = std::max(best, w * mahalanobis_norm(diff, chol));
  }
  return best;
}

}  // namespace edfmon
