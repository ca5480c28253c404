#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical routines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

/// Kendall's tau-a by direct pair enumeration.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i], yi = y[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = (x[j] - xi) * (y[j] - yi);
      s += (a > 0) - (a < 0);
    }
  }
  return 2.0 * static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// y' A^{-1} y for a 2x2 matrix via the adjugate.
inline double quad_form_inverse_2x2(const std::array<double, 4>& a, const std::array<double, 2>& y) {
  const double det = a[0] * a[3] - a[1] * a[2];
  const double i00 = a[3] / det, i01 = -a[1] / det, i10 = -a[2] / det, i11 = a[0] / det;
  return y[0] * (i00 * y[0] + i01 * y[1]) + y[1] * (i10 * y[0] + i11 * y[1]);
}

/// Quadratic-spectral kernel from its power series
/// k(x) = 3 sum_{n>=1} (-1)^{n+1} 2n z^{2n-2} / (2n+1)!,  z = 6 pi x / 5.
inline double qs_kernel_series(double x, int terms = 40) {
  const double z = 6.0 * std::numbers::pi * x / 5.0;
  double sum = 0.0;
  double zpow = 1.0;       // z^{2n-2}
  double fact = 6.0;       // (2n+1)!
  for (int n = 1; n <= terms; ++n) {
    const double sign = (n % 2 == 1) ? 1.0 : -1.0;
    sum += sign * 2.0 * n * zpow / fact;
    zpow *= z * z;
    fact *= (2.0 * n + 2.0) * (2.0 * n + 3.0);
  }
  return 3.0 * sum;
}

/// gamma_0 + 2 sum_{r=1}^{lags} gamma_r of a scalar series.
inline double autocovariance_sum(std::span<const double> x, std::size_t lags) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t r = 0; r <= lags; ++r) {
    double g = 0.0;
    for (std::size_t i = 0; i + r < n; ++i) g += (x[i] - mean) * (x[i + r] - mean);
    g /= static_cast<double>(n);
    total += r == 0 ? g : 2.0 * g;
  }
  return total;
}

/// Scalar CUSUM for p = 1:
/// max_{m<=j<k} j(k-j)/m^{3/2} |mean(y_1..y_j) - mean(y_{j+1}..y_k)| / sigma.
inline double scalar_cusum(std::span<const double> y, std::size_t m, double sigma) {
  const std::size_t k = y.size();
  double best = 0.0;
  for (std::size_t j = m; j < k; ++j) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < j; ++i) a += y[i];
    for (std::size_t i = j; i < k; ++i) b += y[i];
    const double diff = a / static_cast<double>(j) - b / static_cast<double>(k - j);
    const double w = static_cast<double>(j) * static_cast<double>(k - j) /
                     std::pow(static_cast<double>(m), 1.5);
    best = std::max(best, w * std::abs(diff) / sigma);
  }
  return best;
}

inline double lag1_autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i + 1 < n) num += (x[i] - mean) * (x[i + 1] - mean);
  }
  return num / den;
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  const double mu = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
