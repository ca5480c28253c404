#pragma once

// Kernel (HAC) estimation of the long-run covariance matrix of a p-variate
// series, with the Andrews (1991) AR(1) plug-in bandwidth and no
// prewhitening.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edfmon/errors.hpp"
#include "edfmon/matrix.hpp"

namespace edfmon {

enum class Kernel { QuadraticSpectral, Bartlett };

struct LrcovSpec {
  Kernel kernel = Kernel::QuadraticSpectral;
  /// Empty means the Andrews AR(1) plug-in bandwidth; otherwise a fixed
  /// positive bandwidth.
  std::optional<double> fixed_bandwidth;
  double ridge = 1e-10;

  void validate() const {
    if (fixed_bandwidth && !(*fixed_bandwidth > 0.0)) {
      throw InvalidArgument("fixed bandwidth must be positive");
    }
    if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be nonnegative");
  }
};

inline double qs_kernel(double x) {
  if (x == 0.0) return 1.0;
  const double z = 6.0 * std::numbers::pi * x / 5.0;
  return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * x * x) *
         (std::sin(z) / z - std::cos(z));
}

inline double bartlett_kernel(double x) { return std::max(0.0, 1.0 - std::abs(x)); }

inline double kernel_weight(Kernel k, double x) {
  return k == Kernel::QuadraticSpectral ? qs_kernel(x) : bartlett_kernel(x);
}

namespace detail {

constexpr double kRhoClamp = 0.97;

struct Ar1Fit {
  double rho;
  double sigma2;
};

// Least-squares AR(1) fit (no intercept) to an already centered series.
inline Ar1Fit fit_ar1(std::span<const double> x) {
  double num = 0.0, den = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    num += x[t] * x[t - 1];
    den += x[t - 1] * x[t - 1];
  }
  if (!(den > 0.0)) throw DegenerateSeries("AR(1) fit on a constant series");
  const double rho = std::clamp(num / den, -kRhoClamp, kRhoClamp);
  double ss = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double e = x[t] - rho * x[t - 1];
    ss += e * e;
  }
  return {rho, ss / static_cast<double>(x.size() - 1)};
}

}  // namespace detail

/// Andrews AR(1) plug-in bandwidth with equal weights across coordinates.
/// `centered` is m x p and already demeaned.
inline double andrews_bandwidth(const Matrix& centered, Kernel kernel) {
  const std::size_t m = centered.rows();
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < centered.cols(); ++a) {
    const auto col = centered.col(a);
    const auto [rho, s2] = detail::fit_ar1(col);
    const double s4 = s2 * s2;
    den += s4 / std::pow(1.0 - rho, 4);
    if (kernel == Kernel::QuadraticSpectral) {
      num += 4.0 * rho * rho * s4 / std::pow(1.0 - rho, 8);
    } else {
      num += 4.0 * rho * rho * s4 / (std::pow(1.0 - rho, 6) * std::pow(1.0 + rho, 2));
    }
  }
  const double alpha = num / den;
  const double md = static_cast<double>(m);
  return kernel == Kernel::QuadraticSpectral ? 1.3221 * std::pow(alpha * md, 0.2)
                                             : 1.1447 * std::cbrt(alpha * md);
}

/// Long-run covariance of the rows of `rows` (m x p). Rows are centered
/// internally; raw 0/1 indicator rows are accepted.
inline SpdMatrix estimate_lrcov(const Matrix& rows, const LrcovSpec& spec = {}) {
  spec.validate();
  const std::size_t m = rows.rows();
  const std::size_t p = rows.cols();
  if (p == 0) throw DimensionMismatch("no columns");
  if (m < 2) throw TooFewObservations("need at least 2 rows, got " + std::to_string(m));
  if (m < 2 * p) {
    std::cerr << "warning: long-run covariance from " << m << " rows for " << p
              << " coordinates is unreliable\n";
  }

  Matrix c(m, p);
  for (std::size_t a = 0; a < p; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += rows(i, a);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      c(i, a) = rows(i, a) - mean;
      var += c(i, a) * c(i, a);
    }
    if (!(var > 0.0)) {
      throw DegenerateSeries("coordinate " + std::to_string(a) + " is constant");
    }
  }

  const double bw = spec.fixed_bandwidth ? *spec.fixed_bandwidth
                                         : andrews_bandwidth(c, spec.kernel);
  const double md = static_cast<double>(m);

  Matrix sigma(p, p);
  auto add_lag = [&](std::size_t lag, double w) {
    // w * (Gamma_lag + Gamma_lag'), or Gamma_0 when lag == 0.
    Matrix g(p, p);
    for (std::size_t i = 0; i + lag < m; ++i) {
      const auto lo = c.row(i);
      const auto hi = c.row(i + lag);
      for (std::size_t a = 0; a < p; ++a) {
        const double x = lo[a];
        for (std::size_t b = 0; b < p; ++b) g(a, b) += x * hi[b];
      }
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) {
        const double v = lag == 0 ? g(a, b) : g(a, b) + g(b, a);
        sigma(a, b) += w * v / md;
      }
  };

  add_lag(0, 1.0);
  for (std::size_t lag = 1; lag < m; ++lag) {
    if (!(bw > 0.0)) break;
    const double w = kernel_weight(spec.kernel, static_cast<double>(lag) / bw);
    if (spec.kernel == Kernel::Bartlett && w == 0.0) break;
    if (w == 0.0) continue;
    add_lag(lag, w);
  }

  // Enforce exact symmetry before validation.
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) {
      const double s = 0.5 * (sigma(a, b) + sigma(b, a));
      sigma(a, b) = s;
      sigma(b, a) = s;
    }

  SpdMatrix out(sigma);
  try {
    (void)cholesky(out);
    return out;
  } catch (const NotPositiveDefinite&) {
    for (std::size_t a = 0; a < p; ++a) sigma(a, a) += spec.ridge;
    SpdMatrix repaired(sigma);
    (void)cholesky(repaired);  // rethrows NotPositiveDefinite if still singular
    return repaired;
  }
}

}  // namespace edfmon
