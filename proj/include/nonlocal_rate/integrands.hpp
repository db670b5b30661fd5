#pragma once

// Strongly convex integrands f with f(0) = f'(0) = 0, f'' >= gamma > 0.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

struct ConvexIntegrand {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
  double gamma = 0.0;                 ///< f'' >= gamma
  std::optional<double> f2_upper;     ///< f'' <= f2_upper, when bounded
};

/// quadratic: t^2; cosh: cosh(t) - 1; quartic: t^2 + t^4/12. All even, so
/// f(|t|) = f(t) in the d-dimensional energies.
inline ConvexIntegrand builtin_integrand(const std::string& name) {
  if (name == "quadratic") {
    return {name, [](double t) { return t * t; }, [](double t) { return 2.0 * t; }, [](double) { return 2.0; },
            2.0, 2.0};
  }
  if (name == "cosh") {
    // cosh(t) - 1 = 2 sinh^2(t/2) avoids cancellation near 0.
    return {name,
            [](double t) {
              const double s = std::sinh(0.5 * t);
              return 2.0 * s * s;
            },
            [](double t) { return std::sinh(t); }, [](double t) { return std::cosh(t); }, 1.0, std::nullopt};
  }
  if (name == "quartic") {
    return {name, [](double t) { return t * t + t * t * t * t / 12.0; },
            [](double t) { return 2.0 * t + t * t * t / 3.0; }, [](double t) { return 2.0 + t * t; }, 2.0,
            std::nullopt};
  }
  throw std::invalid_argument("unknown integrand '" + name + "' (expected quadratic, cosh or quartic)");
}

/// lambda = int_0^1 (1 - theta) f''((1 - theta) a + theta b) dtheta, so that
/// f(b) - f(a) = f'(a)(b - a) + lambda (b - a)^2.
inline double lambda_h(const ConvexIntegrand& fi, double a, double b, int order = 32) {
  const GaussRule& g = gauss_legendre(order);
  CompensatedSum s;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const double theta = 0.5 * (1.0 + g.nodes[i]);
    s += 0.5 * g.weights[i] * (1.0 - theta) * fi.d2f((1.0 - theta) * a + theta * b);
  }
  return s.value();
}

}  // namespace nonlocal_rate
