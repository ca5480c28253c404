#pragma once

// Data-generating processes for the simulation studies: univariate AR(1),
// GARCH(1,1), nonlinear and exponential AR models, a multivariate AR(1) with
// copula-dependent innovations, and injection of changes after position
// m + k.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "edfmon/copula.hpp"
#include "edfmon/distributions.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/matrix.hpp"
#include "edfmon/rng.hpp"

namespace edfmon {

/// Number of initial values discarded by every generator.
inline constexpr std::size_t kBurnIn = 100;

struct Ar1Model {
  double beta = 0.0;
};
struct Garch11Model {
  double omega = 0.012;
  double alpha = 0.072;
  double beta = 0.919;
};
struct SinArModel {};
struct ExpArModel {};
struct MvAr1Model {
  std::size_t d = 2;
  double beta = 0.0;
  CopulaSpec copula;
};

using Model = std::variant<Ar1Model, Garch11Model, SinArModel, ExpArModel, MvAr1Model>;

inline std::size_t model_dim(const Model& model) {
  if (const auto* mv = std::get_if<MvAr1Model>(&model)) return mv->d;
  return 1;
}

struct MeanOffset {
  double delta = 0.0;
};
struct FirstComponentOffset {
  double delta = 0.0;
};
struct VarianceScale {
  double sigma = 1.0;
};
struct MarginTDof {
  double nu_pre = 3.0;
  double nu_post = 3.0;
  std::size_t component = 0;
};
struct CopulaSwap {
  CopulaSpec post;
};
struct TauChange {
  double tau_post = 0.0;
};

using ChangeKind =
    std::variant<MeanOffset, VarianceScale, MarginTDof, CopulaSwap, TauChange, FirstComponentOffset>;

struct ChangeSpec {
  /// Observations after position m + at are affected.
  std::size_t at = 0;
  ChangeKind kind;
};

struct ScenarioSpec {
  Model model = Ar1Model{};
  std::size_t m = 800;
  std::size_t n_post = 1000;
  std::optional<ChangeSpec> change;
  std::uint64_t seed = 1;
};

// --- filters: deterministic maps from an innovation stream of length
// n + kBurnIn to n observations. Exposed so that tests can drive them.

inline std::vector<double> ar1_filter(std::span<const double> eps, double beta) {
  if (eps.size() < kBurnIn) throw InvalidArgument("innovation stream shorter than burn-in");
  std::vector<double> out;
  out.reserve(eps.size() - kBurnIn);
  double x = eps[0];
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i > 0) x = beta * x + eps[i];
    if (i >= kBurnIn) out.push_back(x);
  }
  return out;
}

inline std::vector<double> garch11_filter(std::span<const double> eps, double omega, double alpha,
                                          double beta) {
  if (eps.size() < kBurnIn) throw InvalidArgument("innovation stream shorter than burn-in");
  std::vector<double> out;
  out.reserve(eps.size() - kBurnIn);
  double s2 = omega / (1.0 - alpha - beta);
  double x = std::sqrt(s2) * eps[0];
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i > 0) {
      s2 = omega + alpha * x * x + beta * s2;
      x = std::sqrt(s2) * eps[i];
    }
    if (i >= kBurnIn) out.push_back(x);
  }
  return out;
}

/// X_i = 0.6 sin(X_{i-1}) + e_i.
inline std::vector<double> sin_ar_filter(std::span<const double> eps) {
  if (eps.size() < kBurnIn) throw InvalidArgument("innovation stream shorter than burn-in");
  std::vector<double> out;
  out.reserve(eps.size() - kBurnIn);
  double x = eps[0];
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i > 0) x = 0.6 * std::sin(x) + eps[i];
    if (i >= kBurnIn) out.push_back(x);
  }
  return out;
}

/// X_i = (0.8 - 1.1 exp(-50 X_{i-1}^2)) X_{i-1} + 0.1 e_i.
inline std::vector<double> exp_ar_filter(std::span<const double> eps) {
  if (eps.size() < kBurnIn) throw InvalidArgument("innovation stream shorter than burn-in");
  std::vector<double> out;
  out.reserve(eps.size() - kBurnIn);
  double x = 0.1 * eps[0];
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i > 0) x = (0.8 - 1.1 * std::exp(-50.0 * x * x)) * x + 0.1 * eps[i];
    if (i >= kBurnIn) out.push_back(x);
  }
  return out;
}

/// Componentwise AR(1) over (n + kBurnIn) x d innovations.
inline Matrix mvar1_filter(const Matrix& eps, double beta) {
  if (eps.rows() < kBurnIn) throw InvalidArgument("innovation stream shorter than burn-in");
  const std::size_t d = eps.cols();
  Matrix out(eps.rows() - kBurnIn, d);
  std::vector<double> x(eps.row(0).begin(), eps.row(0).end());
  for (std::size_t i = 0; i < eps.rows(); ++i) {
    if (i > 0)
      for (std::size_t j = 0; j < d; ++j) x[j] = beta * x[j] + eps(i, j);
    if (i >= kBurnIn)
      for (std::size_t j = 0; j < d; ++j) out(i - kBurnIn, j) = x[j];
  }
  return out;
}

inline std::vector<double> normal_stream(std::size_t n, Rng& rng) {
  std::vector<double> e(n);
  for (auto& v : e) v = rng.normal();
  return e;
}

// --- generators

inline std::vector<double> gen_ar1(std::size_t n, double beta, Rng& rng) {
  if (!(std::abs(beta) < 1.0)) throw InvalidArgument("AR(1) needs |beta| < 1");
  return ar1_filter(normal_stream(n + kBurnIn, rng), beta);
}

inline std::vector<double> gen_garch11(std::size_t n, double omega, double alpha, double beta,
                                       Rng& rng) {
  if (!(omega > 0.0)) throw InvalidArgument("GARCH omega must be positive");
  if (!(alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0)) {
    throw InvalidArgument("GARCH needs alpha, beta >= 0 and alpha + beta < 1");
  }
  return garch11_filter(normal_stream(n + kBurnIn, rng), omega, alpha, beta);
}

inline std::vector<double> gen_sin_ar(std::size_t n, Rng& rng) {
  return sin_ar_filter(normal_stream(n + kBurnIn, rng));
}

inline std::vector<double> gen_exp_ar(std::size_t n, Rng& rng) {
  return exp_ar_filter(normal_stream(n + kBurnIn, rng));
}

inline Matrix normal_scores(const Matrix& uniforms) {
  Matrix eps(uniforms.rows(), uniforms.cols());
  for (std::size_t i = 0; i < uniforms.data().size(); ++i) {
    eps.data()[i] = normal_quantile(uniforms.data()[i]);
  }
  return eps;
}

inline Matrix gen_mvar1(std::size_t n, std::size_t d, double beta, const CopulaSpec& copula,
                        Rng& rng) {
  if (!(std::abs(beta) < 1.0)) throw InvalidArgument("AR(1) needs |beta| < 1");
  if (copula.d != d) throw DimensionMismatch("copula dimension differs from series dimension");
  return mvar1_filter(normal_scores(sample_copula(copula, n + kBurnIn, rng)), beta);
}

/// Injects `change` into `series` (rows are observations 1..n). Rows after
/// position m + change.at are affected. Copula changes replace those rows by
/// the matching rows of `post_source`; variance changes draw fresh
/// N(0, sigma^2) values (from `post_source` scaled by sigma when given).
inline void apply_change(Matrix& series, std::size_t m, const ChangeSpec& change, Rng& rng,
                         const Matrix* post_source = nullptr) {
  const std::size_t n = series.rows();
  const std::size_t d = series.cols();
  const std::size_t start = m + change.at;
  if (start >= n) {
    throw ChangeBeyondHorizon("change after position " + std::to_string(start) +
                              " but only " + std::to_string(n) + " observations");
  }
  auto check_source = [&] {
    if (post_source == nullptr) throw InvalidArgument("this change needs a post-change source");
    if (post_source->rows() != n || post_source->cols() != d) {
      throw DimensionMismatch("post-change source has the wrong shape");
    }
  };

  std::visit(
      [&](const auto& kind) {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, MeanOffset>) {
          for (std::size_t i = start; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) series(i, j) += kind.delta;
        } else if constexpr (std::is_same_v<K, FirstComponentOffset>) {
          for (std::size_t i = start; i < n; ++i) series(i, 0) += kind.delta;
        } else if constexpr (std::is_same_v<K, VarianceScale>) {
          if (!(kind.sigma > 0.0)) throw InvalidArgument("sigma must be positive");
          if (post_source) check_source();
          for (std::size_t i = start; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              series(i, j) = kind.sigma * (post_source ? (*post_source)(i, j) : rng.normal());
            }
        } else if constexpr (std::is_same_v<K, MarginTDof>) {
          if (!(kind.nu_pre >= 3.0 && kind.nu_post >= 3.0)) {
            throw InvalidArgument("Student t margins need nu >= 3");
          }
          if (kind.component >= d) throw DimensionMismatch("margin component out of range");
          // Assumes N(0,1) margins: map through Phi, then the unit-variance t quantile.
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              const double nu = (i >= start && j == kind.component) ? kind.nu_post : kind.nu_pre;
              series(i, j) = scaled_t_quantile(nu, clamp_open_unit(normal_cdf(series(i, j))));
            }
        } else {
          // CopulaSwap, TauChange
          check_source();
          for (std::size_t i = start; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) series(i, j) = (*post_source)(i, j);
        }
      },
      change.kind);
}

/// Data for replication `rep` of a scenario: (m + n_post) x d.
inline Matrix generate_scenario(const ScenarioSpec& spec, std::uint64_t rep) {
  Rng rng = Rng::substream(spec.seed, rep);
  const std::size_t n = spec.m + spec.n_post;
  if (spec.change && spec.m + spec.change->at >= n) {
    throw ChangeBeyondHorizon("change position beyond the simulated horizon");
  }
  const bool copula_change =
      spec.change && (std::holds_alternative<CopulaSwap>(spec.change->kind) ||
                      std::holds_alternative<TauChange>(spec.change->kind));

  Matrix data;
  std::visit(
      [&](const auto& model) {
        using M = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<M, MvAr1Model>) {
          if (!(std::abs(model.beta) < 1.0)) throw InvalidArgument("AR(1) needs |beta| < 1");
          if (model.copula.d != model.d) {
            throw DimensionMismatch("copula dimension differs from series dimension");
          }
          Matrix u = sample_copula(model.copula, n + kBurnIn, rng);
          if (copula_change) {
            CopulaSpec post = model.copula;
            if (const auto* swap = std::get_if<CopulaSwap>(&spec.change->kind)) {
              post = swap->post;
              post.d = model.d;
            } else {
              post.tau = std::get<TauChange>(spec.change->kind).tau_post;
            }
            const Matrix v = sample_copula(post, n + kBurnIn, rng);
            // Innovation row kBurnIn + i drives observation i + 1.
            ChangeSpec shifted{spec.change->at + kBurnIn, spec.change->kind};
            apply_change(u, spec.m, shifted, rng, &v);
          }
          data = mvar1_filter(normal_scores(u), model.beta);
        } else {
          if (copula_change) throw InvalidArgument("copula changes need a multivariate model");
          std::vector<double> x;
          if constexpr (std::is_same_v<M, Ar1Model>) {
            x = gen_ar1(n, model.beta, rng);
          } else if constexpr (std::is_same_v<M, Garch11Model>) {
            x = gen_garch11(n, model.omega, model.alpha, model.beta, rng);
          } else if constexpr (std::is_same_v<M, SinArModel>) {
            x = gen_sin_ar(n, rng);
          } else {
            x = gen_exp_ar(n, rng);
          }
          data = Matrix::column(x);
        }
      },
      spec.model);

  if (spec.change && !copula_change) {
    if (std::holds_alternative<MarginTDof>(spec.change->kind)) {
      const bool iid = std::visit(
          [](const auto& model) {
            using M = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<M, Ar1Model> || std::is_same_v<M, MvAr1Model>) {
              return model.beta == 0.0;
            }
            return false;
          },
          spec.model);
      if (!iid) throw InvalidArgument("Student t margin changes need serially independent N(0,1) data");
    }
    apply_change(data, spec.m, *spec.change, rng);
  }
  return data;
}

}  // namespace edfmon
