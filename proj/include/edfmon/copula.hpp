#pragma once

// Copula samplers parameterized by Kendall's tau. Archimedean families use
// the Marshall-Olkin frailty construction U_j = psi(E_j / V), E_j ~ Exp(1).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "edfmon/distributions.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/matrix.hpp"
#include "edfmon/rng.hpp"

namespace edfmon {

enum class CopulaFamily { Independence, GumbelHougaard, Clayton, Frank, Gaussian };

struct CopulaSpec {
  CopulaFamily family = CopulaFamily::Independence;
  double tau = 0.0;
  std::size_t d = 2;
};

inline std::string_view to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::Independence: return "Independence";
    case CopulaFamily::GumbelHougaard: return "GumbelHougaard";
    case CopulaFamily::Clayton: return "Clayton";
    case CopulaFamily::Frank: return "Frank";
    case CopulaFamily::Gaussian: return "Gaussian";
  }
  return "?";
}

inline CopulaFamily copula_family_from_string(std::string_view s) {
  if (s == "Independence") return CopulaFamily::Independence;
  if (s == "GumbelHougaard" || s == "Gumbel") return CopulaFamily::GumbelHougaard;
  if (s == "Clayton") return CopulaFamily::Clayton;
  if (s == "Frank") return CopulaFamily::Frank;
  if (s == "Gaussian" || s == "Normal") return CopulaFamily::Gaussian;
  throw ParseError("unknown copula family '" + std::string(s) + "'");
}

/// First Debye function D_1(x) = (1/x) int_0^x t / (e^t - 1) dt.
inline double debye1(double x) {
  if (x == 0.0) return 1.0;
  auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, x, 15, 1e-12);
  return integral / x;
}

inline double frank_tau(double theta) { return 1.0 - 4.0 / theta * (1.0 - debye1(theta)); }

constexpr double kFrankThetaMin = 1e-6;
constexpr double kFrankThetaMax = 50.0;

/// Inverts Kendall's tau of the Frank copula by bisection on [1e-6, 50].
inline double frank_theta_from_tau(double tau) {
  double lo = kFrankThetaMin, hi = kFrankThetaMax;
  if (!(tau > frank_tau(lo) && tau < frank_tau(hi))) {
    throw TauOutOfRange("Frank tau " + std::to_string(tau) + " outside the supported range");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (frank_tau(mid) < tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double gumbel_theta_from_tau(double tau) { return 1.0 / (1.0 - tau); }
inline double clayton_theta_from_tau(double tau) { return 2.0 * tau / (1.0 - tau); }
inline double gaussian_rho_from_tau(double tau) { return std::sin(std::numbers::pi * tau / 2.0); }

inline void validate(const CopulaSpec& spec) {
  if (spec.d < 1) throw InvalidArgument("copula dimension must be positive");
  const double tau = spec.tau;
  switch (spec.family) {
    case CopulaFamily::Independence:
      return;
    case CopulaFamily::GumbelHougaard:
    case CopulaFamily::Clayton:
    case CopulaFamily::Frank:
      // Frailty construction needs positive dependence; tau == 0 is independence.
      if (!(tau >= 0.0 && tau < 1.0)) {
        throw TauOutOfRange(std::string(to_string(spec.family)) + " requires tau in [0, 1)");
      }
      if (spec.family == CopulaFamily::Frank && tau > 0.0) (void)frank_theta_from_tau(tau);
      return;
    case CopulaFamily::Gaussian: {
      if (!(tau > -1.0 && tau < 1.0)) throw TauOutOfRange("Gaussian requires tau in (-1, 1)");
      const double rho = gaussian_rho_from_tau(tau);
      if (spec.d > 1 && !(rho > -1.0 / static_cast<double>(spec.d - 1))) {
        throw TauOutOfRange("equicorrelation matrix not positive definite for this tau and d");
      }
      return;
    }
  }
}

namespace detail {

// Positive stable variate with Laplace transform exp(-t^a), 0 < a < 1
// (Kanter's representation of the Chambers-Mallows-Stuck generator).
inline double positive_stable(double a, Rng& rng) {
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  return std::sin(a * u) / std::pow(std::sin(u), 1.0 / a) *
         std::pow(std::sin((1.0 - a) * u) / e, (1.0 - a) / a);
}

// Logarithmic series variate with P(V = k) = p^k / (-k log(1 - p)),
// p = 1 - exp(-theta) (Kemp's LK algorithm).
inline double log_series(double theta, Rng& rng) {
  const double p = -std::expm1(-theta);
  const double u = rng.uniform();
  if (u > p) return 1.0;
  const double q = -std::expm1(-theta * rng.uniform());
  if (u < q * q) return std::floor(1.0 + std::log(u) / std::log(q));
  return u > q ? 1.0 : 2.0;
}

}  // namespace detail

/// Incremental sampler; parameters are resolved once.
class CopulaSampler {
 public:
  explicit CopulaSampler(const CopulaSpec& spec) : spec_(spec) {
    validate(spec);
    switch (spec.family) {
      case CopulaFamily::GumbelHougaard: theta_ = gumbel_theta_from_tau(spec.tau); break;
      case CopulaFamily::Clayton: theta_ = clayton_theta_from_tau(spec.tau); break;
      case CopulaFamily::Frank:
        theta_ = spec.tau > 0.0 ? frank_theta_from_tau(spec.tau) : 0.0;
        break;
      case CopulaFamily::Gaussian: {
        const double rho = gaussian_rho_from_tau(spec.tau);
        Matrix r(spec.d, spec.d, rho);
        for (std::size_t i = 0; i < spec.d; ++i) r(i, i) = 1.0;
        chol_ = cholesky(SpdMatrix(r));
        break;
      }
      case CopulaFamily::Independence: break;
    }
  }

  const CopulaSpec& spec() const noexcept { return spec_; }

  void sample_row(Rng& rng, std::span<double> out) {
    const std::size_t d = spec_.d;
    if (out.size() != d) throw DimensionMismatch("copula row has wrong width");
    const bool independent = spec_.family == CopulaFamily::Independence ||
                             (spec_.family != CopulaFamily::Gaussian && spec_.tau == 0.0);
    if (independent) {
      for (auto& u : out) u = rng.uniform();
      return;
    }
    switch (spec_.family) {
      case CopulaFamily::GumbelHougaard: {
        const double a = 1.0 / theta_;
        const double v = detail::positive_stable(a, rng);
        for (auto& u : out) u = std::exp(-std::pow(rng.exponential() / v, a));
        break;
      }
      case CopulaFamily::Clayton: {
        const double v = rng.gamma(1.0 / theta_);
        for (auto& u : out) u = std::pow(1.0 + rng.exponential() / v, -1.0 / theta_);
        break;
      }
      case CopulaFamily::Frank: {
        const double v = detail::log_series(theta_, rng);
        const double p = -std::expm1(-theta_);
        for (auto& u : out) {
          const double t = rng.exponential() / v;
          u = -std::log1p(-p * std::exp(-t)) / theta_;
        }
        break;
      }
      case CopulaFamily::Gaussian: {
        for (auto& u : out) u = rng.normal();
        // out <- L z, computed from the last row down so z stays intact.
        for (std::size_t i = d; i-- > 0;) {
          double s = 0.0;
          for (std::size_t k = 0; k <= i; ++k) s += chol_(i, k) * out[k];
          out[i] = s;
        }
        for (auto& u : out) u = normal_cdf(u);
        break;
      }
      case CopulaFamily::Independence: break;
    }
    for (auto& u : out) u = clamp_open_unit(u);
  }

 private:
  CopulaSpec spec_;
  double theta_ = 0.0;
  LowerTriangular chol_;
};

/// n x d matrix of copula uniforms, strictly inside (0,1).
inline Matrix sample_copula(const CopulaSpec& spec, std::size_t n, Rng& rng) {
  CopulaSampler sampler(spec);
  Matrix out(n, spec.d);
  for (std::size_t i = 0; i < n; ++i) sampler.sample_row(rng, out.row(i));
  return out;
}

}  // namespace edfmon
