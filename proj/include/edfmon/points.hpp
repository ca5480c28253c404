#pragma once

// Evaluation points: empirical quantiles, pseudo-observations, grid-based
// multivariate selection driven by the empirical copula, and the indicator
// vectors 1(X_i <= x_l) the detector works on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edfmon/errors.hpp"
#include "edfmon/matrix.hpp"

namespace edfmon {

enum class PointMode { User, UnivariateQuantile, MultivariateGrid };

struct EvalPoints {
  std::size_t d = 0;
  /// p x d, one point per row.
  Matrix points;
  /// p x d generating probabilities; empty for user-supplied points.
  Matrix probs;
  PointMode mode = PointMode::User;

  std::size_t p() const noexcept { return points.rows(); }

  /// User-supplied points. Rejects empty sets and duplicates.
  static EvalPoints user(Matrix pts);
};

struct PseudoObservations {
  std::size_t m = 0;
  /// m x d values rank/(m+1).
  Matrix values;
  /// m x d max-ranks (count of column values <= the entry), kept so that
  /// box membership can be decided in exact integer arithmetic.
  std::vector<std::uint32_t> ranks;

  std::uint32_t rank(std::size_t i, std::size_t j) const { return ranks[i * values.cols() + j]; }
};

namespace detail {

inline void check_distinct_rows(const Matrix& pts) {
  for (std::size_t a = 0; a < pts.rows(); ++a)
    for (std::size_t b = a + 1; b < pts.rows(); ++b) {
      if (std::equal(pts.row(a).begin(), pts.row(a).end(), pts.row(b).begin())) {
        throw DuplicatePoints("points " + std::to_string(a) + " and " + std::to_string(b) +
                              " coincide (ties in the learning sample?)");
      }
    }
}

// ceil(m * num / den) for nonnegative integers.
inline std::size_t ceil_ratio(std::size_t m, std::size_t num, std::size_t den) {
  return (m * num + den - 1) / den;
}

// Order statistic of rank `k` (1-based) of an already sorted sample.
inline double order_stat(const std::vector<double>& sorted, std::size_t k) {
  return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
}

}  // namespace detail

inline EvalPoints EvalPoints::user(Matrix pts) {
  if (pts.rows() == 0) throw InvalidArgument("at least one evaluation point is required");
  detail::check_distinct_rows(pts);
  EvalPoints ep;
  ep.d = pts.cols();
  ep.points = std::move(pts);
  ep.mode = PointMode::User;
  return ep;
}

/// inf{x : F_m(x) >= y}: the ceil(m*y)-th order statistic.
inline double empirical_quantile(std::span<const double> sample, double y) {
  if (sample.empty()) throw EmptySample("empirical quantile of an empty sample");
  if (!(y > 0.0 && y <= 1.0)) throw InvalidArgument("quantile level must lie in (0,1]");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double my = static_cast<double>(sorted.size()) * y;
  const double nearest = std::round(my);
  // Absorb representation error in m*y (e.g. 9 * (1/3)).
  const double k = std::abs(my - nearest) <= 1e-9 * std::max(1.0, my) ? nearest : std::ceil(my);
  return detail::order_stat(sorted, static_cast<std::size_t>(k));
}

/// Points at the i/(p+1) empirical quantiles, i = 1..p, of a univariate
/// learning sample (m x 1).
inline EvalPoints select_univariate(const Matrix& learning, std::size_t p) {
  if (learning.cols() != 1) throw DimensionMismatch("univariate selection needs one column");
  if (p == 0) throw InvalidArgument("p must be positive");
  const std::size_t m = learning.rows();
  if (m <= p) {
    throw TooFewObservations("need more than p=" + std::to_string(p) + " observations, got " +
                             std::to_string(m));
  }
  std::vector<double> sorted = learning.col(0);
  std::sort(sorted.begin(), sorted.end());
  EvalPoints ep;
  ep.d = 1;
  ep.mode = PointMode::UnivariateQuantile;
  ep.points = Matrix(p, 1);
  ep.probs = Matrix(p, 1);
  for (std::size_t i = 1; i <= p; ++i) {
    ep.points(i - 1, 0) = detail::order_stat(sorted, detail::ceil_ratio(m, i, p + 1));
    ep.probs(i - 1, 0) = static_cast<double>(i) / static_cast<double>(p + 1);
  }
  for (std::size_t i = 1; i < p; ++i) {
    if (ep.points(i, 0) == ep.points(i - 1, 0)) {
      throw DuplicatePoints("quantiles " + std::to_string(i) + " and " + std::to_string(i + 1) +
                            " coincide (discrete-looking data?)");
    }
  }
  return ep;
}

/// rank_max / (m + 1) per column, rank_max = #{values <= x}.
inline PseudoObservations pseudo_observations(const Matrix& learning) {
  const std::size_t m = learning.rows();
  const std::size_t d = learning.cols();
  if (m == 0) throw EmptySample("pseudo-observations of an empty sample");
  PseudoObservations po;
  po.m = m;
  po.values = Matrix(m, d);
  po.ranks.assign(m * d, 0);
  const double denom = static_cast<double>(m + 1);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> sorted = learning.col(j);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<std::uint32_t>(
          std::upper_bound(sorted.begin(), sorted.end(), learning(i, j)) - sorted.begin());
      po.ranks[i * d + j] = r;
      po.values(i, j) = static_cast<double>(r) / denom;
    }
  }
  return po;
}

/// The r^d grid points (j_1/(r+1), ..., j_d/(r+1)), j's in 1..r, in
/// lexicographic order (last coordinate fastest).
inline Matrix grid(std::size_t r, std::size_t d) {
  if (r == 0 || d == 0) throw InvalidArgument("grid needs r >= 1 and d >= 1");
  std::size_t count = 1;
  for (std::size_t i = 0; i < d; ++i) count *= r;
  Matrix g(count, d);
  std::vector<std::size_t> idx(d, 1);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t j = 0; j < d; ++j) {
      g(n, j) = static_cast<double>(idx[j]) / static_cast<double>(r + 1);
    }
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] <= r) break;
      idx[j] = 1;
    }
  }
  return g;
}

/// Grid indices (1..r per coordinate) of the grid points whose box
/// (pi - s, pi] carries empirical copula mass > 1/(kappa (r+1)^d).
inline std::vector<std::vector<std::size_t>> retained_grid_cells(const PseudoObservations& po,
                                                                 std::size_t r, double kappa) {
  const std::size_t m = po.m;
  const std::size_t d = po.values.cols();
  const std::size_t rp1 = r + 1;
  std::size_t cells = 1;
  for (std::size_t i = 0; i < d; ++i) cells *= r;

  // Cell index of each pseudo-observation: j with (j-1)/(r+1) < U <= j/(r+1),
  // i.e. (j-1)(m+1) < rank (r+1) <= j (m+1). j == r+1 falls outside the grid.
  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t flat = 0;
    bool inside = true;
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t scaled = static_cast<std::size_t>(po.rank(i, j)) * rp1;
      const std::size_t cell = (scaled + m) / (m + 1);  // ceil(scaled / (m+1))
      if (cell < 1 || cell > r) {
        inside = false;
        break;
      }
      flat = flat * r + (cell - 1);
    }
    if (inside) ++counts[flat];
  }

  double total_cells = 1.0;
  for (std::size_t i = 0; i < d; ++i) total_cells *= static_cast<double>(rp1);
  const double threshold = 1.0 / (kappa * total_cells);

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t flat = 0; flat < cells; ++flat) {
    const double mass = static_cast<double>(counts[flat]) / static_cast<double>(m);
    if (!(mass > threshold)) continue;
    std::vector<std::size_t> idx(d);
    std::size_t rest = flat;
    for (std::size_t j = d; j-- > 0;) {
      idx[j] = rest % r + 1;
      rest /= r;
    }
    out.push_back(std::move(idx));
  }
  return out;
}

/// Copula-filtered grid selection for d >= 2.
inline EvalPoints select_multivariate(const Matrix& learning, std::size_t r, double kappa) {
  const std::size_t m = learning.rows();
  const std::size_t d = learning.cols();
  if (d < 2) throw DimensionMismatch("multivariate selection needs d >= 2");
  if (r == 0) throw InvalidArgument("r must be positive");
  if (!(kappa > 1.0)) throw InvalidArgument("kappa must exceed 1");
  if (m <= r) {
    throw TooFewObservations("need more than r=" + std::to_string(r) + " observations");
  }

  const PseudoObservations po = pseudo_observations(learning);
  const auto cells = retained_grid_cells(po, r, kappa);
  if (cells.empty()) throw NoPointsRetained("no grid box carries enough empirical copula mass");

  std::vector<std::vector<double>> sorted(d);
  for (std::size_t j = 0; j < d; ++j) {
    sorted[j] = learning.col(j);
    std::sort(sorted[j].begin(), sorted[j].end());
  }

  EvalPoints ep;
  ep.d = d;
  ep.mode = PointMode::MultivariateGrid;
  ep.points = Matrix(cells.size(), d);
  ep.probs = Matrix(cells.size(), d);
  for (std::size_t n = 0; n < cells.size(); ++n) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t g = cells[n][j];
      ep.points(n, j) = detail::order_stat(sorted[j], detail::ceil_ratio(m, g, r + 1));
      ep.probs(n, j) = static_cast<double>(g) / static_cast<double>(r + 1);
    }
  }
  detail::check_distinct_rows(ep.points);
  return ep;
}

/// Writes 1(x <= point_l) componentwise for every point into `out` (length p).
inline void indicator_row(std::span<const double> x, const EvalPoints& pts, std::span<double> out) {
  const std::size_t d = pts.d;
  if (x.size() != d) {
    throw DimensionMismatch("observation has " + std::to_string(x.size()) +
                            " coordinates, points have " + std::to_string(d));
  }
  for (std::size_t l = 0; l < pts.p(); ++l) {
    const auto pt = pts.points.row(l);
    bool below = true;
    for (std::size_t j = 0; j < d && below; ++j) below = x[j] <= pt[j];
    out[l] = below ? 1.0 : 0.0;
  }
}

/// n x p matrix of 0/1 indicators.
inline Matrix indicator_rows(const Matrix& data, const EvalPoints& pts) {
  if (data.cols() != pts.d) {
    throw DimensionMismatch("data has " + std::to_string(data.cols()) +
                            " columns, points have dimension " + std::to_string(pts.d));
  }
  Matrix out(data.rows(), pts.p());
  for (std::size_t i = 0; i < data.rows(); ++i) indicator_row(data.row(i), pts, out.row(i));
  return out;
}

}  // namespace edfmon
