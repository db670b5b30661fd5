#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace nonlocal_rate {

/// Least-squares slope of log|err| against log h over the last `last` points.
/// Returns NaN when fewer than two usable (nonzero) points remain.
inline double fitted_order(std::span<const double> h, std::span<const double> err, std::size_t last = 4) {
  if (h.size() != err.size()) throw std::invalid_argument("fitted_order: size mismatch");
  const std::size_t start = h.size() > last ? h.size() - last : 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = start; i < h.size(); ++i) {
    if (!(std::abs(err[i]) > 0.0) || !(h[i] > 0.0)) continue;
    const double x = std::log(h[i]);
    const double y = std::log(std::abs(err[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

}  // namespace nonlocal_rate
