#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "edfmon/errors.hpp"

namespace edfmon {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("normal quantile level must lie in (0,1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, u);
}

/// Student t with `dof` degrees of freedom rescaled to unit variance.
inline double scaled_t_quantile(double dof, double u) {
  if (!(dof > 2.0)) throw InvalidArgument("unit-variance Student t needs dof > 2");
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("t quantile level must lie in (0,1)");
  const boost::math::students_t_distribution<double> t(dof);
  return boost::math::quantile(t, u) * std::sqrt((dof - 2.0) / dof);
}

/// Keeps a probability strictly inside (0, 1).
inline double clamp_open_unit(double u) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(u, lo, hi);
}

}  // namespace edfmon
