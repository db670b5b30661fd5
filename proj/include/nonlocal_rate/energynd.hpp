#pragma once

// d-dimensional functionals (d = 1, 2, 3):
//   F_h(u) = int int K(z) f(|u(x+hz) - u(x)| / (h|z|)) dz dx
//   F_0(u) = int int K(z) f(|grad u(x) . zhat|) dz dx
//   rate   = (F_0 - F_h) / h^2, evaluated as one fused integral
//   limit  = (1/24) int int K(z)|z|^2 f''(|grad u . zhat|) |zhat^T Hess u zhat|^2 dz dx
// plus the slicing evaluator, the effective-kernel lower bound and the H^2
// blow-up probe.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/functions.hpp"
#include "nonlocal_rate/integrands.hpp"
#include "nonlocal_rate/kernels.hpp"
#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

enum class EnergyMethod { direct, sliced, monte_carlo };

inline const char* to_string(EnergyMethod m) {
  switch (m) {
    case EnergyMethod::direct: return "direct";
    case EnergyMethod::sliced: return "sliced";
    case EnergyMethod::monte_carlo: return "monte_carlo";
  }
  return "?";
}

/// What a d-dimensional evaluation actually used.
struct QuadratureReport {
  std::size_t x_nodes = 0;
  std::size_t z_nodes = 0;
  std::string sphere_rule;
  int refinements = 0;
  double est_error = 0.0;
  std::size_t slice_lines = 0;     ///< sliced: 1-D energies evaluated
  std::uint64_t mc_seed = 0;
  std::size_t mc_samples = 0;
  double mc_std_error = 0.0;
};

struct EnergyNDResult {
  double value = 0.0;
  double h = 0.0;
  EnergyMethod method = EnergyMethod::direct;
  QuadratureReport report;
};

namespace detail {

/// Tensor rule over a box. Axis 0 is cut into contiguous chunks, one task each.
template <int D>
struct XGrid {
  std::array<Rule1D, D> axis;
  std::vector<std::pair<std::size_t, std::size_t>> chunks;  ///< [begin, end) on axis 0

  std::size_t size() const {
    std::size_t n = 1;
    for (int i = 0; i < D; ++i) n *= axis[i].size();
    return n;
  }
};

/// Composite Gauss aligned to the breaks when the field has interior kinks;
/// otherwise the trapezoid rule, which converges spectrally for smooth
/// compactly supported integrands. Both use panels * order nodes per axis.
template <int D>
XGrid<D> make_xgrid(const Box<D>& box, const std::array<std::vector<double>, D>& extra, int panels, int order,
                    bool trapezoid) {
  XGrid<D> g;
  for (int i = 0; i < D; ++i) {
    if (trapezoid) {
      const int n = panels * order + 1;
      const double dx = (box.hi[i] - box.lo[i]) / n;
      for (int k = 1; k < n; ++k) {
        g.axis[i].nodes.push_back(box.lo[i] + k * dx);
        g.axis[i].weights.push_back(dx);
      }
    } else {
      const auto breaks = clip_breakpoints(box.lo[i], box.hi[i], extra[i]);
      for (const auto& p : aligned_panels(breaks, panels)) append_gauss(g.axis[i], p.a, p.b, order);
    }
  }
  const std::size_t n0 = g.axis[0].size();
  const std::size_t step = std::max<std::size_t>(1, order);
  for (std::size_t b = 0; b < n0; b += step) g.chunks.push_back({b, std::min(n0, b + step)});
  return g;
}

/// Sum over the grid of w(x) g(x); deterministic for any worker count.
template <int D, class G>
double integrate_x(const XGrid<D>& grid, int threads, G&& g) {
  auto task = [&](std::size_t c) {
    CompensatedSum s;
    Vec<D> x{};
    for (std::size_t i0 = grid.chunks[c].first; i0 < grid.chunks[c].second; ++i0) {
      x[0] = grid.axis[0].nodes[i0];
      const double w0 = grid.axis[0].weights[i0];
      if constexpr (D == 1) {
        s += w0 * g(x);
      } else if constexpr (D == 2) {
        for (std::size_t i1 = 0; i1 < grid.axis[1].size(); ++i1) {
          x[1] = grid.axis[1].nodes[i1];
          s += w0 * grid.axis[1].weights[i1] * g(x);
        }
      } else {
        for (std::size_t i1 = 0; i1 < grid.axis[1].size(); ++i1) {
          x[1] = grid.axis[1].nodes[i1];
          const double w1 = w0 * grid.axis[1].weights[i1];
          for (std::size_t i2 = 0; i2 < grid.axis[2].size(); ++i2) {
            x[2] = grid.axis[2].nodes[i2];
            s += w1 * grid.axis[2].weights[i2] * g(x);
          }
        }
      }
    }
    return s.value();
  };
  const auto parts = parallel_map(grid.chunks.size(), threads, task);
  return pairwise_sum(parts);
}

template <int D>
bool use_trapezoid(const ScalarField<D>& u, const QuadratureScheme& q) {
  if (q.nd_x_rule == XRule::gauss) return false;
  if (q.nd_x_rule == XRule::trapezoid) return true;
  if (u.derivative_order() < 2) return false;
  for (int i = 0; i < D; ++i)
    if (!u.breakpoints(i).empty()) return false;
  return true;
}

/// Quadrature node of the z-integral: z = rho*e with weight w (incl. rho^{d-1}).
template <int D>
struct ZNode {
  Vec<D> z;
  Vec<D> e;
  double rho;
  double w;
};

template <int D>
std::vector<ZNode<D>> make_znodes(double radius, const std::vector<double>& breaks, const QuadratureScheme& q,
                                  int graded) {
  const Rule1D radial = radial_rule(radius, breaks, q.radial_order, q.radial_panels, graded);
  const SphereRule<D> sphere = sphere_rule<D>(q.angular);
  std::vector<ZNode<D>> nodes;
  for (std::size_t j = 0; j < sphere.directions.size(); ++j) {
    for (std::size_t i = 0; i < radial.size(); ++i) {
      ZNode<D> n;
      n.e = sphere.directions[j];
      n.rho = radial.nodes[i];
      for (int k = 0; k < D; ++k) n.z[k] = n.rho * n.e[k];
      n.w = sphere.weights[j] * radial.weights[i] * std::pow(n.rho, D - 1);
      nodes.push_back(n);
    }
  }
  return nodes;
}

template <int D>
std::string sphere_description(const QuadratureScheme& q) {
  std::ostringstream s;
  if constexpr (D == 1)
    s << "{-1,+1}";
  else if constexpr (D == 2)
    s << q.angular << " uniform angles";
  else
    s << q.angular << "x" << 2 * q.angular << " Gauss-cos x uniform-azimuth";
  return s.str();
}

template <int D>
std::array<std::vector<double>, D> axis_breaks(const ScalarField<D>& u, const Box<D>& padded, double reach = 0.0) {
  std::array<std::vector<double>, D> br;
  for (int i = 0; i < D; ++i) {
    br[i] = u.breakpoints(i);
    // Edges of the layer where shifted copies of a kink land.
    if (reach > 0.0)
      for (double b : u.breakpoints(i)) br[i].insert(br[i].end(), {b - reach, b + reach});
    br[i].push_back(u.support().lo[i]);
    br[i].push_back(u.support().hi[i]);
    br[i].push_back(padded.lo[i]);
    br[i].push_back(padded.hi[i]);
  }
  return br;
}

/// Runs `eval(level)` with x-panels doubled per level until the relative change
/// is below q.nd_tol or q.nd_max_refinements is reached.
template <class Eval>
std::pair<double, QuadratureReport> refine_nd(const QuadratureScheme& q, Eval&& eval) {
  QuadratureReport rep;
  double prev = eval(0, rep);
  for (int level = 1; level <= q.nd_max_refinements; ++level) {
    const double cur = eval(level, rep);
    rep.refinements = level;
    rep.est_error = std::abs(cur - prev);
    prev = cur;
    if (rep.est_error <= q.nd_tol * std::abs(cur)) break;
  }
  return {prev, rep};
}

template <int D>
void require_gradient(const ScalarField<D>& u, const char* what) {
  if (u.derivative_order() < 1) throw std::domain_error(std::string(what) + ": gradient unavailable");
}

template <int D>
void require_hessian(const ScalarField<D>& u, const char* what) {
  if (u.derivative_order() < 2) throw std::domain_error(std::string(what) + ": Hessian unavailable");
}

}  // namespace detail

/// F_h(u). Direct quadrature, or stratified Monte Carlo when q.mc_samples > 0.
template <int D>
EnergyNDResult energy_F_h(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K, double h,
                          const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "energy_F_h");
  const double R = K.support_radius();
  const Box<D> box = u.support().padded(h * R);
  if (q.mc_samples > 0) {
    const double V = box.volume();
    const double area = sphere_area(D);
    auto sample = [&](std::mt19937_64& rng, int s) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> normal;
      Vec<D> x, e;
      for (int i = 0; i < D; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
      if constexpr (D == 1) {
        e[0] = unit(rng) < 0.5 ? -1.0 : 1.0;
      } else {
        double n2 = 0.0;
        do {
          n2 = 0.0;
          for (int i = 0; i < D; ++i) {
            e[i] = normal(rng);
            n2 += e[i] * e[i];
          }
        } while (n2 == 0.0);
        for (int i = 0; i < D; ++i) e[i] /= std::sqrt(n2);
      }
      const double shell = R / q.mc_strata;
      const double rho = shell * (s + unit(rng));
      const double k = K.along(rho, e);
      if (k == 0.0) return 0.0;
      Vec<D> y;
      for (int i = 0; i < D; ++i) y[i] = x[i] + h * rho * e[i];
      const double dq = std::abs(u(y) - u(x)) / (h * rho);
      return V * area * shell * std::pow(rho, D - 1) * k * fi.f(dq);
    };
    const McEstimate est = stratified_mc(q.mc_samples, q.mc_strata, q.seed, q.threads, sample);
    EnergyNDResult res{est.mean, h, EnergyMethod::monte_carlo, {}};
    res.report.mc_seed = est.seed;
    res.report.mc_samples = est.samples;
    res.report.mc_std_error = est.std_error;
    return res;
  }
  auto zn = detail::make_znodes<D>(R, K.radial_breaks(), q, q.radial_graded);
  std::vector<double> kw;
  for (const auto& n : zn) kw.push_back(n.w * K.along(n.rho, n.e));
  const auto breaks = detail::axis_breaks(u, box, h * R);
  auto [value, rep] = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
    const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
    r.x_nodes = grid.size();
    r.z_nodes = zn.size();
    return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
      const double ux = u(x);
      CompensatedSum s;
      for (std::size_t k = 0; k < zn.size(); ++k) {
        if (kw[k] == 0.0) continue;
        Vec<D> y;
        for (int i = 0; i < D; ++i) y[i] = x[i] + h * zn[k].z[i];
        s += kw[k] * fi.f(std::abs(u(y) - ux) / (h * zn[k].rho));
      }
      return s.value();
    });
  });
  rep.sphere_rule = detail::sphere_description<D>(q);
  return {value, h, EnergyMethod::direct, rep};
}

/// F_0(u); radial kernels use ||K||_1 times the sphere average of f(|grad u . e|).
template <int D>
EnergyNDResult energy_F_0(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                          const QuadratureScheme& q = {}) {
  detail::require_gradient(u, "energy_F_0");
  const Box<D> box = u.support();
  const auto breaks = detail::axis_breaks(u, box);
  QuadratureReport rep;
  double value = 0.0;
  if (K.is_radial()) {
    const SphereRule<D> sphere = sphere_rule<D>(q.angular);
    const double area = sphere_area(D);
    std::tie(value, rep) = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
      const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
      r.x_nodes = grid.size();
      r.z_nodes = sphere.directions.size();
      return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
        const Vec<D> g = u.gradient(x);
        CompensatedSum s;
        for (std::size_t j = 0; j < sphere.directions.size(); ++j)
          s += sphere.weights[j] * fi.f(std::abs(dot<D>(g, sphere.directions[j])));
        return s.value() / area;
      });
    });
    value *= K.mass();
  } else {
    auto zn = detail::make_znodes<D>(K.support_radius(), K.radial_breaks(), q, q.radial_graded);
    std::vector<double> kw;
    for (const auto& n : zn) kw.push_back(n.w * K.along(n.rho, n.e));
    std::tie(value, rep) = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
      const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
      r.x_nodes = grid.size();
      r.z_nodes = zn.size();
      return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
        const Vec<D> g = u.gradient(x);
        CompensatedSum s;
        for (std::size_t k = 0; k < zn.size(); ++k) s += kw[k] * fi.f(std::abs(dot<D>(g, zn[k].e)));
        return s.value();
      });
    });
  }
  rep.sphere_rule = detail::sphere_description<D>(q);
  return {value, 0.0, EnergyMethod::direct, rep};
}

/// E_h(u) = (F_0(u) - F_h(u)) / h^2 as a single fused (x, z) quadrature.
template <int D>
EnergyNDResult rate_functional(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K, double h,
                               const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "rate_functional");
  detail::require_gradient(u, "rate_functional");
  const double R = K.support_radius();
  const Box<D> box = u.support().padded(h * R);
  auto zn = detail::make_znodes<D>(R, K.radial_breaks(), q, q.radial_graded);
  std::vector<double> kw;
  for (const auto& n : zn) kw.push_back(n.w * K.along(n.rho, n.e));
  const auto breaks = detail::axis_breaks(u, box, h * R);
  auto [value, rep] = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
    const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
    r.x_nodes = grid.size();
    r.z_nodes = zn.size();
    return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
      const double ux = u(x);
      const Vec<D> g = u.gradient(x);
      CompensatedSum s;
      for (std::size_t k = 0; k < zn.size(); ++k) {
        if (kw[k] == 0.0) continue;
        Vec<D> y;
        for (int i = 0; i < D; ++i) y[i] = x[i] + h * zn[k].z[i];
        const double local = fi.f(std::abs(dot<D>(g, zn[k].e)));
        const double nonlocal = fi.f(std::abs(u(y) - ux) / (h * zn[k].rho));
        s += kw[k] * (local - nonlocal);
      }
      return s.value();
    });
  });
  rep.sphere_rule = detail::sphere_description<D>(q);
  rep.est_error /= h * h;
  return {value / (h * h), h, EnergyMethod::direct, rep};
}

/// Fixed-rule E_s of a 1-D field with known primitive (used per slice line).
inline double slice_line_energy(const Field1D& v, const ConvexIntegrand& fi, double s, const QuadratureScheme& q) {
  const double a = v.support().lo[0], b = v.support().hi[0];
  const auto breaks = detail::shifted_breaks(v, a - s, b, {0.0, -s});
  const Rule1D rule = composite_gauss(breaks, q.slice_panels, q.slice_order);
  const auto& w = v.primitive();
  CompensatedSum acc;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double t = rule.nodes[i];
    const double avg = (w(t + s) - w(t)) / s;
    acc += rule.weights[i] * (fi.f(std::abs(v(t))) - fi.f(std::abs(avg)));
  }
  return acc.value() / (s * s);
}

/// E_h(u) through the slicing identity
///   E_h(u) = int_z int_{zhat^perp} K(z)|z|^2 E_{h|z|}(w'_{zhat,xi}) dxi dz,
/// with w_{zhat,xi}(t) = u(xi + t zhat) and f replaced by f(|.|).
template <int D>
EnergyNDResult rate_functional_sliced(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K, double h,
                                      const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "rate_functional_sliced");
  detail::require_gradient(u, "rate_functional_sliced");
  const double R = K.support_radius();
  const Rule1D radial = radial_rule(R, K.radial_breaks(), q.radial_order, q.radial_panels, q.radial_graded);
  const SphereRule<D> sphere = sphere_rule<D>(q.angular);
  const Box<D> box = u.support();
  const Vec<D> c = box.center();
  const double reach = box.padded(h * R).half_diagonal();
  const int nxi = std::max(1, static_cast<int>(std::ceil(2.0 * reach / q.slice_dx)));
  const double dxi = 2.0 * reach / nxi;

  // One task per direction; each returns its weighted contribution.
  std::vector<std::size_t> lines(sphere.directions.size(), 0);
  auto task = [&](std::size_t j) {
    const Vec<D>& e = sphere.directions[j];
    // Offsets xi in e^perp covering the projected support.
    std::vector<std::pair<Vec<D>, double>> offsets;
    Vec<D> c_perp = c;
    const double ce = dot<D>(c, e);
    for (int i = 0; i < D; ++i) c_perp[i] -= ce * e[i];
    if constexpr (D == 1) {
      offsets.push_back({Vec<1>{0.0}, 1.0});
    } else if constexpr (D == 2) {
      const Vec<2> perp{-e[1], e[0]};
      for (int k = 0; k < nxi; ++k) {
        const double s = -reach + (k + 0.5) * dxi;
        offsets.push_back({Vec<2>{c_perp[0] + s * perp[0], c_perp[1] + s * perp[1]}, dxi});
      }
    } else {
      Vec<3> a = std::abs(e[0]) < 0.9 ? Vec<3>{1, 0, 0} : Vec<3>{0, 1, 0};
      const double ae = dot<3>(a, e);
      for (int i = 0; i < 3; ++i) a[i] -= ae * e[i];
      const double an = norm<3>(a);
      for (int i = 0; i < 3; ++i) a[i] /= an;
      const Vec<3> b{e[1] * a[2] - e[2] * a[1], e[2] * a[0] - e[0] * a[2], e[0] * a[1] - e[1] * a[0]};
      for (int k = 0; k < nxi; ++k)
        for (int l = 0; l < nxi; ++l) {
          const double s = -reach + (k + 0.5) * dxi, t = -reach + (l + 0.5) * dxi;
          if (s * s + t * t > reach * reach) continue;
          Vec<3> xi;
          for (int i = 0; i < 3; ++i) xi[i] = c_perp[i] + s * a[i] + t * b[i];
          offsets.push_back({xi, dxi * dxi});
        }
    }
    // Exact orthogonality of the offsets (removes rounding in xi . e).
    for (auto& [xi, w] : offsets) {
      const double xe = dot<D>(xi, e);
      for (int i = 0; i < D; ++i) xi[i] -= xe * e[i];
    }
    CompensatedSum total;
    std::size_t count = 0;
    for (const auto& [xi, wxi] : offsets) {
      const LineSlice<D> line(u, e, xi);
      if (line.empty()) continue;
      const Field1D v = line.derivative_field();
      CompensatedSum along;
      for (std::size_t i = 0; i < radial.size(); ++i) {
        const double rho = radial.nodes[i];
        const double k = K.along(rho, e);
        if (k == 0.0) continue;
        const double s = h * rho;
        double e1d;
        if constexpr (D == 1) {
          e1d = energy_E_h(v, fi, s, q).value;
        } else {
          e1d = slice_line_energy(v, fi, s, q);
        }
        along += radial.weights[i] * std::pow(rho, D - 1) * k * rho * rho * e1d;
        ++count;
      }
      total += wxi * along.value();
    }
    lines[j] = count;
    return sphere.weights[j] * total.value();
  };
  const auto parts = parallel_map(sphere.directions.size(), q.threads, task);
  EnergyNDResult res{pairwise_sum(parts), h, EnergyMethod::sliced, {}};
  res.report.z_nodes = radial.size() * sphere.directions.size();
  res.report.sphere_rule = detail::sphere_description<D>(q);
  for (auto n : lines) res.report.slice_lines += n;
  return res;
}

/// (1/24) int int K(z)|z|^2 f''(|grad u . zhat|) |zhat^T Hess u zhat|^2 dz dx.
template <int D>
EnergyNDResult limit_functional(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                                const QuadratureScheme& q = {}) {
  detail::require_hessian(u, "limit_functional");
  const Box<D> box = u.support();
  const auto breaks = detail::axis_breaks(u, box);
  const SphereRule<D> sphere = sphere_rule<D>(q.angular);
  QuadratureReport rep;
  double value = 0.0;
  if (K.is_radial()) {
    const double area = sphere_area(D);
    std::tie(value, rep) = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
      const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
      r.x_nodes = grid.size();
      r.z_nodes = sphere.directions.size();
      return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
        const Vec<D> g = u.gradient(x);
        const Mat<D> H = u.hessian(x);
        CompensatedSum s;
        for (std::size_t j = 0; j < sphere.directions.size(); ++j) {
          const auto& e = sphere.directions[j];
          const double c = quad_form<D>(H, e);
          s += sphere.weights[j] * fi.d2f(std::abs(dot<D>(g, e))) * c * c;
        }
        return s.value() / area;
      });
    });
    value *= K.second_moment() / 24.0;
  } else {
    auto zn = detail::make_znodes<D>(K.support_radius(), K.radial_breaks(), q, q.radial_graded);
    std::vector<double> kw;
    for (const auto& n : zn) kw.push_back(n.w * K.along(n.rho, n.e) * n.rho * n.rho);
    std::tie(value, rep) = detail::refine_nd(q, [&](int level, QuadratureReport& r) {
      const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
      r.x_nodes = grid.size();
      r.z_nodes = zn.size();
      return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
        const Vec<D> g = u.gradient(x);
        const Mat<D> H = u.hessian(x);
        CompensatedSum s;
        for (std::size_t k = 0; k < zn.size(); ++k) {
          const double c = quad_form<D>(H, zn[k].e);
          s += kw[k] * fi.d2f(std::abs(dot<D>(g, zn[k].e))) * c * c;
        }
        return s.value();
      });
    });
    value /= 24.0;
  }
  rep.sphere_rule = detail::sphere_description<D>(q);
  return {value, 0.0, EnergyMethod::direct, rep};
}

/// (gamma/4) int int Kt(z) [ (grad u(x+hz) - grad u(x)) . zhat / h ]^2 dx dz.
template <int D>
double lower_bound_form(const ScalarField<D>& u, double gamma, const EffectiveKernel<D>& Kt, double h,
                        const QuadratureScheme& q = {}) {
  detail::require_positive_h(h, "lower_bound_form");
  detail::require_gradient(u, "lower_bound_form");
  const double R = Kt.support_radius();
  const Box<D> box = u.support().padded(h * R);
  const int graded = std::max(q.radial_graded, 6);
  auto zn = detail::make_znodes<D>(R, Kt.base().radial_breaks(), q, graded);
  std::vector<double> kw(zn.size());
  if (Kt.base().is_radial()) {
    std::map<double, double> cache;
    for (std::size_t k = 0; k < zn.size(); ++k) {
      auto it = cache.find(zn[k].rho);
      if (it == cache.end()) it = cache.emplace(zn[k].rho, Kt.along(zn[k].rho, zn[k].e)).first;
      kw[k] = zn[k].w * it->second;
    }
  } else {
    for (std::size_t k = 0; k < zn.size(); ++k) kw[k] = zn[k].w * Kt.along(zn[k].rho, zn[k].e);
  }
  const auto breaks = detail::axis_breaks(u, box, h * R);
  auto [value, rep] = detail::refine_nd(q, [&](int level, QuadratureReport&) {
    const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
    return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
      const Vec<D> g = u.gradient(x);
      CompensatedSum s;
      for (std::size_t k = 0; k < zn.size(); ++k) {
        if (kw[k] == 0.0) continue;
        Vec<D> y;
        for (int i = 0; i < D; ++i) y[i] = x[i] + h * zn[k].z[i];
        const Vec<D> gy = u.gradient(y);
        double d = 0.0;
        for (int i = 0; i < D; ++i) d += (gy[i] - g[i]) * zn[k].e[i];
        d /= h;
        s += kw[k] * d * d;
      }
      return s.value();
    });
  });
  return 0.25 * gamma * value;
}

/// (c/2) (int K|z|^2) int |Hess u|_F^2, the h-uniform bound when f'' <= c.
template <int D>
double h2_upper_bound(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                      const QuadratureScheme& q = {}) {
  if (!fi.f2_upper) throw std::invalid_argument("h2_upper_bound: integrand '" + fi.name + "' has unbounded f''");
  detail::require_hessian(u, "h2_upper_bound");
  const Box<D> box = u.support();
  const auto breaks = detail::axis_breaks(u, box);
  auto [value, rep] = detail::refine_nd(q, [&](int level, QuadratureReport&) {
    const auto grid = detail::make_xgrid<D>(box, breaks, q.nd_x_panels << level, q.nd_x_order, detail::use_trapezoid(u, q));
    return detail::integrate_x<D>(grid, q.threads, [&](const Vec<D>& x) {
      const Mat<D> H = u.hessian(x);
      double s = 0.0;
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) s += H[i][j] * H[i][j];
      return s;
    });
  });
  return 0.5 * *fi.f2_upper * K.second_moment() * value;
}

struct ProbeRow {
  double h;
  double value;
  std::optional<double> upper_bound;
};

/// E_h(u) over `h_list`, with the bounded-f'' upper bound when it applies.
template <int D>
std::vector<ProbeRow> h2_criterion_probe(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                                         const std::vector<double>& h_list, const QuadratureScheme& q = {}) {
  if (h_list.empty()) throw std::invalid_argument("h2_criterion_probe: empty h list");
  std::optional<double> bound;
  if (fi.f2_upper && u.derivative_order() >= 2) bound = h2_upper_bound(u, fi, K, q);
  std::vector<ProbeRow> rows;
  for (double h : h_list) rows.push_back({h, rate_functional(u, fi, K, h, q).value, bound});
  return rows;
}

}  // namespace nonlocal_rate
