#pragma once

// One-dimensional rate functional
//   E_h(u) = h^{-2} int [ f(u(x)) - f(D_h U(x)) ] dx,
// its limit E_0(u) = (1/24) int f''(u) |u'|^2, and the lower / upper bounds
// that follow from strong convexity of f.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonlocal_rate/convergence.hpp"
#include "nonlocal_rate/fields.hpp"
#include "nonlocal_rate/functions.hpp"
#include "nonlocal_rate/integrands.hpp"
#include "nonlocal_rate/kernels.hpp"
#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

struct Energy1DResult {
  double value = 0.0;
  double h = 0.0;            ///< 0 for E_0
  double est_error = 0.0;    ///< change over the last panel refinement
  std::size_t nodes = 0;     ///< x-nodes of the final rule
  int refinements = 0;
  double a = 0.0, b = 0.0;   ///< support interval of u
};

/// phi in C_c(R^2) used in the dual form of the lower bound; zero outside `support`.
struct DualTestFunction {
  std::string name;
  std::function<double(double, double)> phi;
  Box<2> support;

  double operator()(double x, double y) const { return support.contains({x, y}) ? phi(x, y) : 0.0; }
};

namespace detail {

struct Refined {
  double value = 0.0;
  double est_error = 0.0;
  std::size_t nodes = 0;
  int refinements = 0;
};

/// Composite Gauss over the pieces of `breaks`, doubling panels per piece until
/// the relative change drops below q.tol (with a roundoff floor relative to
/// the integral of |g|).
template <class G>
Refined refine_1d(const std::vector<double>& breaks, const QuadratureScheme& q, G&& g) {
  auto run = [&](int m, double& abs_total, std::size_t& nodes) {
    const Rule1D rule = composite_gauss(breaks, m, q.gauss_order);
    CompensatedSum s, sa;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double v = g(rule.nodes[i]);
      s += rule.weights[i] * v;
      sa += rule.weights[i] * std::abs(v);
    }
    abs_total = sa.value();
    nodes = rule.size();
    return s.value();
  };
  Refined r;
  double abs_total = 0.0;
  int m = 1;
  double prev = run(m, abs_total, r.nodes);
  for (int level = 1; level <= q.max_refinements; ++level) {
    m *= 2;
    const double cur = run(m, abs_total, r.nodes);
    r.refinements = level;
    r.est_error = std::abs(cur - prev);
    prev = cur;
    if (r.est_error <= q.tol * std::abs(cur) + 1e-15 * abs_total) {
      r.value = cur;
      return r;
    }
  }
  throw QuadratureError("1-D energy: panel refinement did not converge (last change " + std::to_string(r.est_error) +
                        ")");
}

inline std::vector<double> shifted_breaks(const Field1D& u, double lo, double hi, std::initializer_list<double> shifts,
                                          std::vector<double> extra = {}) {
  const double a = u.support().lo[0], b = u.support().hi[0];
  std::vector<double> base = u.breakpoints(0);
  base.push_back(a);
  base.push_back(b);
  for (double p : base)
    for (double s : shifts) extra.push_back(p + s);
  return clip_breakpoints(lo, hi, extra);
}

}  // namespace detail

/// E_h(u) over x in (a - h, b), outside of which f(u) = f(D_h U) = 0.
inline Energy1DResult energy_E_h(const Field1D& u, const ConvexIntegrand& fi, double h, const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "energy_E_h");
  const double a = u.support().lo[0], b = u.support().hi[0];
  const auto breaks = detail::shifted_breaks(u, a - h, b, {0.0, -h});
  auto g = [&](double x) { return fi.f(u(x)) - fi.f(moving_average(u, h, x, q.inner_order)); };
  const auto r = detail::refine_1d(breaks, q, g);
  return {r.value / (h * h), h, r.est_error / (h * h), r.nodes, r.refinements, a, b};
}

/// E_0(u) = (1/24) int f''(u) |u'|^2.
inline Energy1DResult energy_E_0(const Field1D& u, const ConvexIntegrand& fi, const QuadratureScheme& q = {}) {
  const double a = u.support().lo[0], b = u.support().hi[0];
  const auto breaks = detail::shifted_breaks(u, a, b, {0.0});
  auto g = [&](double x) {
    const double d = u.derivative(x);
    return fi.d2f(u(x)) * d * d;
  };
  const auto r = detail::refine_1d(breaks, q, g);
  return {r.value / 24.0, 0.0, r.est_error / 24.0, r.nodes, r.refinements, a, b};
}

/// (gamma/4) int int_{-h}^{h} J_h(r) ((u(y+r) - u(y))/h)^2 dr dy.
inline double lower_bound_Jh(const Field1D& u, double gamma, double h, const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "lower_bound_Jh");
  const double a = u.support().lo[0], b = u.support().hi[0];
  const auto outer = detail::shifted_breaks(u, a - h, b + h, {0.0, -h, h});
  std::vector<double> kinks = u.breakpoints(0);
  kinks.push_back(a);
  kinks.push_back(b);
  auto g = [&](double y) {
    std::vector<double> cuts{0.0};
    for (double p : kinks) cuts.push_back(p - y);
    const auto pieces = clip_breakpoints(-h, h, cuts);
    const double uy = u(y);
    CompensatedSum s;
    const GaussRule& rule = gauss_legendre(q.inner_order);
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
      const double mid = 0.5 * (pieces[k] + pieces[k + 1]);
      const double half = 0.5 * (pieces[k + 1] - pieces[k]);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double r = mid + half * rule.nodes[i];
        const double dq = (u(y + r) - uy) / h;
        s += half * rule.weights[i] * triangle_J_h(r, h) * dq * dq;
      }
    }
    return s.value();
  };
  return 0.25 * gamma * detail::refine_1d(outer, q, g).value;
}

/// int_R (1/h) int_x^{x+h} [ (u(y) - D_hU(x))/h * phi - phi^2 / (4 lambda_h(x,y)) ] dy dx
/// for the supplied phi, with lambda_h evaluated at a = D_hU(x), b = u(y).
inline double dual_lower_bound(const Field1D& u, const ConvexIntegrand& fi, double h, const DualTestFunction& phi,
                               const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "dual_lower_bound");
  const double xlo = std::max(phi.support.lo[0], phi.support.lo[1] - h);
  const double xhi = std::min(phi.support.hi[0], phi.support.hi[1]);
  if (!(xhi > xlo)) return 0.0;
  const double a = u.support().lo[0], b = u.support().hi[0];
  const auto outer = detail::shifted_breaks(u, xlo, xhi, {0.0, -h},
                                            {phi.support.lo[1] - h, phi.support.hi[1] - h, phi.support.lo[1],
                                             phi.support.hi[1]});
  std::vector<double> kinks = u.breakpoints(0);
  kinks.insert(kinks.end(), {a, b, phi.support.lo[1], phi.support.hi[1]});
  auto g = [&](double x) {
    const double avg = moving_average(u, h, x, q.inner_order);
    const auto pieces = clip_breakpoints(x, x + h, kinks);
    const GaussRule& rule = gauss_legendre(q.inner_order);
    CompensatedSum s;
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
      const double mid = 0.5 * (pieces[k] + pieces[k + 1]);
      const double half = 0.5 * (pieces[k + 1] - pieces[k]);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double y = mid + half * rule.nodes[i];
        const double p = phi(x, y);
        if (p == 0.0) continue;
        const double uy = u(y);
        const double lam = lambda_h(fi, avg, uy, q.theta_order);
        s += half * rule.weights[i] * ((uy - avg) / h * p - p * p / (4.0 * lam));
      }
    }
    return s.value() / h;
  };
  return detail::refine_1d(outer, q, g).value;
}

/// (c/2) int |u'|^2 with c = fi.f2_upper, an h-uniform bound on E_h(u).
inline double upper_bound_check(const Field1D& u, const ConvexIntegrand& fi, const QuadratureScheme& q = {}) {
  if (!fi.f2_upper) throw std::invalid_argument("upper_bound_check: integrand '" + fi.name + "' has unbounded f''");
  const double a = u.support().lo[0], b = u.support().hi[0];
  const auto breaks = detail::shifted_breaks(u, a, b, {0.0});
  auto g = [&](double x) {
    const double d = u.derivative(x);
    return d * d;
  };
  return 0.5 * *fi.f2_upper * detail::refine_1d(breaks, q, g).value;
}

/// Smooth window equal to a bump covering [lo, hi] with margin.
inline std::function<double(double)> smooth_window(double lo, double hi, double margin) {
  const double c = 0.5 * (lo + hi);
  const double r = 0.5 * (hi - lo) + margin;
  auto bump = fields::smooth_bump<1>({c}, r, 1.0);
  return [bump](double x) { return bump(x); };
}

/// Five test functions for the dual lower bound, windowed to the region
/// where the integrand of E_h(u) can be nonzero.
inline std::vector<DualTestFunction> bundled_test_functions(const Field1D& u, const ConvexIntegrand& fi, double h,
                                                            int inner_order = 16) {
  const double a = u.support().lo[0], b = u.support().hi[0];
  const double margin = std::max(h, 0.05 * (b - a));
  const double xlo = a - h - margin, xhi = b + margin;
  auto eta = smooth_window(a - h, b, margin);
  const Box<2> box{{xlo, xlo}, {xhi, xhi + h}};
  const double gamma = fi.gamma;
  std::vector<DualTestFunction> out;
  out.push_back({"linear", [=](double x, double y) { return eta(x) * (y - x) / h; }, box});
  out.push_back({"affine", [=](double x, double y) { return gamma * eta(x) * (1.0 - 2.0 * (y - x) / h); }, box});
  out.push_back({"product", [=](double x, double y) { return eta(x) * eta(y); }, box});
  out.push_back(
      {"oscillatory", [=](double x, double y) { return eta(x) * std::sin(2.0 * std::numbers::pi * (y - x) / h); }, box});
  out.push_back({"near_optimal",
                 [=](double x, double y) { return gamma * eta(x) * (u(y) - moving_average(u, h, x, inner_order)) / h; },
                 box});
  return out;
}

/// One row of a pointwise convergence sweep.
struct ErrorRow {
  double h;
  double value_h;
  double value_0;
  double abs_error;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  double order = 0.0;  ///< least-squares order over the last four rows
};

/// |E_h(u) - E_0(u)| over `h_list`.
inline ErrorTable pointwise_error(const Field1D& u, const ConvexIntegrand& fi, const std::vector<double>& h_list,
                                  const QuadratureScheme& q = {}) {
  if (h_list.empty()) throw std::invalid_argument("pointwise_error: empty h list");
  ErrorTable t;
  const double e0 = energy_E_0(u, fi, q).value;
  std::vector<double> hs, errs;
  for (double h : h_list) {
    const double eh = energy_E_h(u, fi, h, q).value;
    t.rows.push_back({h, eh, e0, std::abs(eh - e0)});
    hs.push_back(h);
    errs.push_back(std::abs(eh - e0));
  }
  t.order = fitted_order(hs, errs);
  return t;
}

}  // namespace nonlocal_rate
