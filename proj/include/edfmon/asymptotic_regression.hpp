#pragma once

// Least-squares fit of the three-parameter asymptotic regression model
//
//   f(x) = b1 + (b2 - b1) (1 - exp(-x / b3)),
//
// whose upper horizontal asymptote is y = b2, by damped Gauss-Newton.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "edfmon/errors.hpp"

namespace edfmon {

struct AsymptoticFit {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 1.0;
  double sse = 0.0;
  int iterations = 0;

  double operator()(double x) const {
    return beta1 + (beta2 - beta1) * (1.0 - std::exp(-x / beta3));
  }
};

namespace detail {

inline double sse_of(const AsymptoticFit& f, std::span<const double> xs,
                     std::span<const double> ys) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - f(xs[i]);
    s += r * r;
  }
  return s;
}

// Solves the symmetric 3x3 system a x = b by Cholesky; returns false when a
// is numerically singular.
inline bool solve3(std::array<double, 9> a, std::array<double, 3>& b) {
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) scale = std::max(scale, std::abs(a[i * 3 + i]));
  if (!(scale > 0.0)) return false;
  std::array<double, 9> l{};
  for (int j = 0; j < 3; ++j) {
    double d = a[j * 3 + j];
    for (int k = 0; k < j; ++k) d -= l[j * 3 + k] * l[j * 3 + k];
    if (!(d > 1e-13 * scale)) return false;
    l[j * 3 + j] = std::sqrt(d);
    for (int i = j + 1; i < 3; ++i) {
      double s = a[i * 3 + j];
      for (int k = 0; k < j; ++k) s -= l[i * 3 + k] * l[j * 3 + k];
      l[i * 3 + j] = s / l[j * 3 + j];
    }
  }
  for (int i = 0; i < 3; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[i * 3 + k] * b[k];
    b[i] = s / l[i * 3 + i];
  }
  for (int i = 2; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < 3; ++k) s -= l[k * 3 + i] * b[k];
    b[i] = s / l[i * 3 + i];
  }
  return true;
}

}  // namespace detail

/// Fits f to (xs, ys). Needs at least 4 points with strictly increasing xs.
/// Throws SingularJacobian when the data carry no curvature information
/// (e.g. constant ys).
inline AsymptoticFit fit_asymptotic_regression(std::span<const double> xs,
                                               std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n != ys.size()) throw DimensionMismatch("xs and ys differ in length");
  if (n < 4) throw InvalidArgument("asymptotic regression needs at least 4 points");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(xs[i] > xs[i - 1])) throw InvalidArgument("xs must be strictly increasing");
  }

  AsymptoticFit fit;
  const double slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
  fit.beta1 = ys[0] - xs[0] * slope;
  fit.beta2 = ys[n - 1];
  fit.beta3 = (xs[n - 1] - xs[0]) / 3.0;
  fit.sse = detail::sse_of(fit, xs, ys);

  constexpr int kMaxIter = 200;
  for (int it = 0; it < kMaxIter; ++it) {
    std::array<double, 9> jtj{};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-xs[i] / fit.beta3);
      const std::array<double, 3> g{
          e, 1.0 - e, -(fit.beta2 - fit.beta1) * e * xs[i] / (fit.beta3 * fit.beta3)};
      const double r = ys[i] - fit(xs[i]);
      for (int a = 0; a < 3; ++a) {
        jtr[a] += g[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a * 3 + b] += g[a] * g[b];
      }
    }
    std::array<double, 3> step = jtr;
    if (!detail::solve3(jtj, step)) {
      throw SingularJacobian("Jacobian is rank deficient (flat data?)");
    }

    // Step halving until the SSE decreases and b3 stays positive.
    double lambda = 1.0;
    AsymptoticFit trial = fit;
    bool improved = false;
    for (int h = 0; h < 60; ++h, lambda *= 0.5) {
      trial.beta1 = fit.beta1 + lambda * step[0];
      trial.beta2 = fit.beta2 + lambda * step[1];
      trial.beta3 = fit.beta3 + lambda * step[2];
      if (!(trial.beta3 > 0.0)) continue;
      trial.sse = detail::sse_of(trial, xs, ys);
      if (trial.sse <= fit.sse) {
        improved = true;
        break;
      }
    }
    fit.iterations = it + 1;
    if (!improved) break;

    const double previous = fit.sse;
    trial.iterations = fit.iterations;
    fit = trial;
    const double rel = (previous - fit.sse) / std::max(previous, 1e-300);
    bool tiny_step = true;
    for (int a = 0; a < 3; ++a) {
      const double value = a == 0 ? fit.beta1 : a == 1 ? fit.beta2 : fit.beta3;
      tiny_step = tiny_step && std::abs(lambda * step[a]) <= 1e-15 * (1.0 + std::abs(value));
    }
    if (rel < 1e-12 || tiny_step || fit.sse == 0.0) break;
  }
  return fit;
}

}  // namespace edfmon
