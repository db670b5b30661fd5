#pragma once

// Scalar fields on R^d (analytic or sampled on a uniform grid), their
// derivatives, 1-D antiderivatives and moving averages, and line slices.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

enum class FieldKind { analytic, grid };

/// Samples on a uniform tensor grid; the last axis varies fastest.
template <int D>
struct GridData {
  Box<D> box;
  std::array<std::size_t, D> counts{};
  std::vector<double> values;

  double spacing(int axis) const { return (box.hi[axis] - box.lo[axis]) / (counts[axis] - 1); }

  double max_spacing() const {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s = std::max(s, spacing(i));
    return s;
  }

  std::size_t flat(const std::array<std::size_t, D>& idx) const {
    std::size_t f = 0;
    for (int i = 0; i < D; ++i) f = f * counts[i] + idx[i];
    return f;
  }

  Vec<D> node(const std::array<std::size_t, D>& idx) const {
    Vec<D> x;
    for (int i = 0; i < D; ++i) x[i] = box.lo[i] + spacing(i) * idx[i];
    return x;
  }

  /// Multilinear interpolation; 0 outside the box.
  double interpolate(const Vec<D>& x) const {
    if (!box.contains(x)) return 0.0;
    std::array<std::size_t, D> base{};
    std::array<double, D> frac{};
    for (int i = 0; i < D; ++i) {
      const double s = (x[i] - box.lo[i]) / spacing(i);
      std::size_t k = static_cast<std::size_t>(std::floor(s));
      if (k >= counts[i] - 1) k = counts[i] - 2;
      base[i] = k;
      frac[i] = s - static_cast<double>(k);
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << D); ++corner) {
      double w = 1.0;
      std::array<std::size_t, D> idx = base;
      for (int i = 0; i < D; ++i) {
        if (corner & (1 << i)) {
          idx[i] += 1;
          w *= frac[i];
        } else {
          w *= 1.0 - frac[i];
        }
      }
      if (w != 0.0) v += w * values[flat(idx)];
    }
    return v;
  }

  /// Checks uniformity, finiteness and the zero boundary condition.
  void validate() const {
    std::size_t total = 1;
    for (int i = 0; i < D; ++i) {
      if (counts[i] < 2) throw std::invalid_argument("grid: need at least 2 nodes per axis");
      if (!(box.hi[i] > box.lo[i])) throw std::invalid_argument("grid: spacing must be positive");
      total *= counts[i];
    }
    if (values.size() != total) throw std::invalid_argument("grid: sample count does not match the grid shape");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("grid: non-finite sample");
    std::array<std::size_t, D> idx{};
    for (std::size_t f = 0; f < total; ++f) {
      std::size_t rem = f;
      bool boundary = false;
      for (int i = D - 1; i >= 0; --i) {
        idx[i] = rem % counts[i];
        rem /= counts[i];
        if (idx[i] == 0 || idx[i] + 1 == counts[i]) boundary = true;
      }
      if (boundary && std::abs(values[f]) > 1e-12)
        throw std::invalid_argument("grid: boundary samples must vanish (u = 0 outside the domain)");
    }
  }
};

/// Real-valued function on R^d that vanishes outside its support box.
///
/// Derivatives are analytic when supplied and otherwise synthesized by
/// centered differences with step max(1e-5, grid spacing). `derivative_order`
/// records how many (weak) derivatives the field is declared to have; asking
/// for more raises std::domain_error.
template <int D>
class ScalarField {
 public:
  using Value = std::function<double(const Vec<D>&)>;
  using Gradient = std::function<Vec<D>(const Vec<D>&)>;
  using Hessian = std::function<Mat<D>(const Vec<D>&)>;

  static ScalarField analytic(Box<D> support, Value value, Gradient gradient = {}, Hessian hessian = {},
                              int derivative_order = 2) {
    ScalarField f;
    f.kind_ = FieldKind::analytic;
    f.support_ = support;
    f.value_ = std::move(value);
    f.gradient_ = std::move(gradient);
    f.hessian_ = std::move(hessian);
    f.derivative_order_ = derivative_order;
    return f;
  }

  static ScalarField from_grid(GridData<D> grid, int derivative_order = 1) {
    grid.validate();
    ScalarField f;
    f.kind_ = FieldKind::grid;
    f.support_ = grid.box;
    auto data = std::make_shared<const GridData<D>>(std::move(grid));
    f.grid_ = data;
    f.value_ = [data](const Vec<D>& x) { return data->interpolate(x); };
    f.derivative_order_ = derivative_order;
    for (int i = 0; i < D; ++i) {
      auto& bp = f.breakpoints_[i];
      for (std::size_t k = 0; k < data->counts[i]; ++k) bp.push_back(data->box.lo[i] + data->spacing(i) * k);
    }
    if constexpr (D == 1) {
      // Exact running integral of the piecewise-linear interpolant.
      std::vector<double> cum(data->counts[0], 0.0);
      const double dx = data->spacing(0);
      for (std::size_t k = 1; k < cum.size(); ++k)
        cum[k] = cum[k - 1] + 0.5 * dx * (data->values[k - 1] + data->values[k]);
      auto running = [data, cum = std::move(cum), dx](double x) {
        const double lo = data->box.lo[0];
        if (x <= lo) return 0.0;
        if (x >= data->box.hi[0]) return cum.back();
        std::size_t k = static_cast<std::size_t>(std::floor((x - lo) / dx));
        if (k >= cum.size() - 1) k = cum.size() - 2;
        const double tau = x - (lo + dx * k);
        const double u0 = data->values[k];
        const double u1 = data->values[k + 1];
        return cum[k] + u0 * tau + (u1 - u0) * tau * tau / (2.0 * dx);
      };
      f.primitive_ = running;
    }
    return f;
  }

  /// Attaches a closed-form primitive (any additive constant).
  ScalarField with_primitive(std::function<double(double)> primitive) const
    requires(D == 1)
  {
    ScalarField f = *this;
    f.primitive_ = std::move(primitive);
    return f;
  }

  /// Declares points along `axis` where derivatives may jump.
  ScalarField with_breakpoints(int axis, std::vector<double> points) const {
    ScalarField f = *this;
    f.breakpoints_[axis] = std::move(points);
    return f;
  }

  ScalarField with_name(std::string name) const {
    ScalarField f = *this;
    f.name_ = std::move(name);
    return f;
  }

  double operator()(const Vec<D>& x) const { return support_.contains(x) ? value_(x) : 0.0; }

  double operator()(double x) const
    requires(D == 1)
  {
    return (*this)(Vec<1>{x});
  }

  Vec<D> gradient(const Vec<D>& x) const {
    if (derivative_order_ < 1) throw std::domain_error("field '" + name_ + "': gradient unavailable");
    if (!support_.contains(x)) return Vec<D>{};
    if (gradient_) return gradient_(x);
    const double d = fd_step();
    Vec<D> g;
    for (int i = 0; i < D; ++i) {
      Vec<D> p = x, m = x;
      p[i] += d;
      m[i] -= d;
      g[i] = ((*this)(p) - (*this)(m)) / (2.0 * d);
    }
    return g;
  }

  double derivative(double x) const
    requires(D == 1)
  {
    return gradient(Vec<1>{x})[0];
  }

  Mat<D> hessian(const Vec<D>& x) const {
    if (derivative_order_ < 2) throw std::domain_error("field '" + name_ + "': Hessian unavailable");
    if (!support_.contains(x)) return Mat<D>{};
    if (hessian_) return hessian_(x);
    const double d = fd_step();
    Mat<D> h{};
    if (gradient_) {
      for (int j = 0; j < D; ++j) {
        Vec<D> p = x, m = x;
        p[j] += d;
        m[j] -= d;
        const Vec<D> gp = gradient(p), gm = gradient(m);
        for (int i = 0; i < D; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * d);
      }
      for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) h[i][j] = h[j][i] = 0.5 * (h[i][j] + h[j][i]);
      return h;
    }
    const double u0 = (*this)(x);
    for (int i = 0; i < D; ++i) {
      Vec<D> p = x, m = x;
      p[i] += d;
      m[i] -= d;
      h[i][i] = ((*this)(p) - 2.0 * u0 + (*this)(m)) / (d * d);
      for (int j = i + 1; j < D; ++j) {
        Vec<D> pp = x, pm = x, mp = x, mm = x;
        pp[i] += d, pp[j] += d;
        pm[i] += d, pm[j] -= d;
        mp[i] -= d, mp[j] += d;
        mm[i] -= d, mm[j] -= d;
        h[i][j] = h[j][i] = ((*this)(pp) - (*this)(pm) - (*this)(mp) + (*this)(mm)) / (4.0 * d * d);
      }
    }
    return h;
  }

  /// Finite-difference step for synthesized derivatives.
  double fd_step() const { return grid_ ? std::max(1e-5, grid_->max_spacing()) : 1e-5; }

  const Box<D>& support() const { return support_; }
  FieldKind kind() const { return kind_; }
  int derivative_order() const { return derivative_order_; }
  bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }
  bool has_analytic_hessian() const { return static_cast<bool>(hessian_); }
  const std::vector<double>& breakpoints(int axis) const { return breakpoints_[axis]; }
  const std::string& name() const { return name_; }
  const GridData<D>* grid() const { return grid_.get(); }

  /// Primitive with an arbitrary constant, when known in closed form or from grid data.
  const std::function<double(double)>& primitive() const
    requires(D == 1)
  {
    return primitive_;
  }

 private:
  FieldKind kind_ = FieldKind::analytic;
  Box<D> support_{};
  Value value_;
  Gradient gradient_;
  Hessian hessian_;
  std::function<double(double)> primitive_;
  std::shared_ptr<const GridData<D>> grid_;
  std::array<std::vector<double>, D> breakpoints_{};
  int derivative_order_ = 2;
  std::string name_ = "field";
};

using Field1D = ScalarField<1>;

// ---------------------------------------------------------------------------
// 1-D antiderivative and moving average

namespace detail {

/// Breakpoints of a 1-D field inside [a, b]: support ends plus declared kinks.
inline std::vector<double> field_breaks(const Field1D& u, double a, double b) {
  std::vector<double> extra = u.breakpoints(0);
  extra.push_back(u.support().lo[0]);
  extra.push_back(u.support().hi[0]);
  return clip_breakpoints(a, b, extra);
}

/// Integral of u over [a, b] by Gauss rules of order n on every smooth piece.
inline double integrate_pieces(const Field1D& u, double a, double b, int n) {
  if (b <= a) return 0.0;
  const double lo = std::max(a, u.support().lo[0]);
  const double hi = std::min(b, u.support().hi[0]);
  if (hi <= lo) return 0.0;
  const auto breaks = field_breaks(u, lo, hi);
  const GaussRule& g = gauss_legendre(n);
  CompensatedSum s;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
    const double half = 0.5 * (breaks[k + 1] - breaks[k]);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) s += half * g.weights[i] * u(mid + half * g.nodes[i]);
  }
  return s.value();
}

inline void require_positive_h(double h, const char* what) {
  if (!(h > 0.0)) throw std::invalid_argument(std::string(what) + ": h must be positive");
}

}  // namespace detail

/// U(x) = integral of u from 0 to x. Uses the field's primitive when present,
/// otherwise adaptive Gauss quadrature on the smooth pieces of [0, x].
inline std::function<double(double)> antiderivative(const Field1D& u) {
  if (const auto& p = u.primitive()) {
    const double p0 = p(0.0);
    return [p, p0](double x) { return x == 0.0 ? 0.0 : p(x) - p0; };
  }
  return [u](double x) {
    if (x == 0.0) return 0.0;
    const double a = std::min(0.0, x), b = std::max(0.0, x);
    const double lo = std::max(a, u.support().lo[0]);
    const double hi = std::min(b, u.support().hi[0]);
    double v = 0.0;
    if (hi > lo) {
      const auto breaks = detail::field_breaks(u, lo, hi);
      for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
        v += adaptive_gauss([&](double y) { return u(y); }, breaks[k], breaks[k + 1], 1e-14);
    }
    return x >= 0.0 ? v : -v;
  };
}

/// D_h U(x) = (U(x+h) - U(x)) / h, the mean of u over [x, x+h]. Exact through
/// the primitive when one is known (including grid fields); otherwise Gauss
/// quadrature with `n_min` nodes on every smooth piece of the window.
inline double moving_average(const Field1D& u, double h, double x, int n_min = 16) {
  detail::require_positive_h(h, "moving_average");
  if (const auto& p = u.primitive()) return (p(x + h) - p(x)) / h;
  return detail::integrate_pieces(u, x, x + h, n_min) / h;
}

// ---------------------------------------------------------------------------
// Line slices

/// The 1-D restriction t -> u(offset + t*direction).
template <int D>
class LineSlice {
 public:
  LineSlice(ScalarField<D> base, Vec<D> direction, Vec<D> offset)
      : base_(std::move(base)), dir_(direction), offset_(offset) {
    if (std::abs(norm<D>(dir_) - 1.0) > 1e-12) throw std::invalid_argument("slice: direction must be a unit vector");
    if (std::abs(dot<D>(dir_, offset_)) > 1e-12)
      throw std::invalid_argument("slice: offset must be orthogonal to the direction");
    std::tie(t0_, t1_) = base_.support().line_intersection(offset_, dir_);
  }

  Vec<D> point(double t) const { return axpy<D>(offset_, t, dir_); }
  double operator()(double t) const { return base_(point(t)); }
  /// w'(t) = grad u(offset + t*dir) . dir
  double derivative(double t) const { return dot<D>(base_.gradient(point(t)), dir_); }
  /// w''(t) = dir^T Hess u dir
  double second_derivative(double t) const { return quad_form<D>(base_.hessian(point(t)), dir_); }

  bool empty() const { return !(t1_ > t0_); }
  std::pair<double, double> interval() const { return {t0_, t1_}; }
  const Vec<D>& direction() const { return dir_; }
  const Vec<D>& offset() const { return offset_; }

  /// The slice as a 1-D field supported on the line/box intersection.
  Field1D field() const {
    auto self = std::make_shared<const LineSlice>(*this);
    auto f = Field1D::analytic(
        support_box(), [self](const Vec<1>& t) { return (*self)(t[0]); },
        base_.derivative_order() >= 1 ? Field1D::Gradient([self](const Vec<1>& t) { return Vec<1>{self->derivative(t[0])}; })
                                      : Field1D::Gradient{},
        {}, base_.derivative_order());
    return f.with_breakpoints(0, crossing_points()).with_primitive({});
  }

  /// The slice derivative w' as a 1-D field whose primitive is w itself.
  Field1D derivative_field() const {
    auto self = std::make_shared<const LineSlice>(*this);
    const int order = base_.derivative_order() - 1;
    auto f = Field1D::analytic(
        support_box(), [self](const Vec<1>& t) { return self->derivative(t[0]); },
        order >= 1 ? Field1D::Gradient([self](const Vec<1>& t) { return Vec<1>{self->second_derivative(t[0])}; })
                   : Field1D::Gradient{},
        {}, order);
    return f.with_breakpoints(0, crossing_points()).with_primitive([self](double t) { return (*self)(t); });
  }

 private:
  Box<1> support_box() const {
    if (empty()) return Box<1>{{0.0}, {0.0}};
    return Box<1>{{t0_}, {t1_}};
  }

  /// Parameters where the line crosses a declared kink plane of the base field.
  std::vector<double> crossing_points() const {
    std::vector<double> pts;
    for (int i = 0; i < D; ++i) {
      if (std::abs(dir_[i]) < 1e-14) continue;
      for (double p : base_.breakpoints(i)) pts.push_back((p - offset_[i]) / dir_[i]);
    }
    return pts;
  }

  ScalarField<D> base_;
  Vec<D> dir_;
  Vec<D> offset_;
  double t0_ = 0.0;
  double t1_ = 0.0;
};

template <int D>
LineSlice<D> slice(const ScalarField<D>& u, const Vec<D>& direction, const Vec<D>& offset) {
  return LineSlice<D>(u, direction, offset);
}

// ---------------------------------------------------------------------------
// CSV I/O for grid fields: header "x0,...,x{d-1},value", one row per node.

template <int D>
void save_grid_csv(const ScalarField<D>& u, const std::string& path) {
  const GridData<D>* g = u.grid();
  if (!g) throw std::invalid_argument("save_grid_csv: field is not a grid field");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_grid_csv: cannot open " + path);
  for (int i = 0; i < D; ++i) out << 'x' << i << ',';
  out << "value\n";
  out.precision(17);
  std::array<std::size_t, D> idx{};
  for (std::size_t f = 0; f < g->values.size(); ++f) {
    std::size_t rem = f;
    for (int i = D - 1; i >= 0; --i) {
      idx[i] = rem % g->counts[i];
      rem /= g->counts[i];
    }
    const Vec<D> x = g->node(idx);
    for (int i = 0; i < D; ++i) out << x[i] << ',';
    out << g->values[f] << '\n';
  }
}

/// Loads and validates a grid field; rows may appear in any order.
template <int D>
ScalarField<D> load_grid_csv(const std::string& path, int derivative_order = 1) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_grid_csv: cannot open " + path);
  std::string line;
  std::getline(in, line);
  {
    std::ostringstream expect;
    for (int i = 0; i < D; ++i) expect << 'x' << i << ',';
    expect << "value";
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expect.str()) throw std::invalid_argument("load_grid_csv: expected header '" + expect.str() + "'");
  }
  std::vector<std::array<double, D + 1>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::array<double, D + 1> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i <= D; ++i) {
      if (!std::getline(ss, cell, ',')) throw std::invalid_argument("load_grid_csv: short row '" + line + "'");
      try {
        row[i] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument("load_grid_csv: bad number '" + cell + "'");
      }
    }
    rows.push_back(row);
  }
  GridData<D> g;
  std::array<std::vector<double>, D> axes;
  for (int i = 0; i < D; ++i) {
    for (const auto& r : rows) axes[i].push_back(r[i]);
    std::sort(axes[i].begin(), axes[i].end());
    std::vector<double> uniq;
    for (double v : axes[i])
      if (uniq.empty() || v - uniq.back() > 1e-9 * std::max(1.0, std::abs(v))) uniq.push_back(v);
    if (uniq.size() < 2) throw std::invalid_argument("load_grid_csv: axis " + std::to_string(i) + " has < 2 nodes");
    const double dx = (uniq.back() - uniq.front()) / (uniq.size() - 1);
    for (std::size_t k = 0; k < uniq.size(); ++k)
      if (std::abs(uniq[k] - (uniq.front() + dx * k)) > 1e-7 * dx)
        throw std::invalid_argument("load_grid_csv: non-uniform spacing on axis " + std::to_string(i));
    axes[i] = uniq;
    g.box.lo[i] = uniq.front();
    g.box.hi[i] = uniq.back();
    g.counts[i] = uniq.size();
  }
  std::size_t total = 1;
  for (int i = 0; i < D; ++i) total *= g.counts[i];
  if (rows.size() != total) throw std::invalid_argument("load_grid_csv: incomplete grid");
  g.values.assign(total, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    std::array<std::size_t, D> idx{};
    for (int i = 0; i < D; ++i)
      idx[i] = static_cast<std::size_t>(std::llround((r[i] - g.box.lo[i]) / g.spacing(i)));
    g.values[g.flat(idx)] = r[D];
  }
  for (double v : g.values)
    if (std::isnan(v)) throw std::invalid_argument("load_grid_csv: duplicate or missing grid node");
  return ScalarField<D>::from_grid(std::move(g), derivative_order).with_name(path);
}

/// Samples an analytic field on a uniform grid with `n` nodes per axis.
template <int D>
ScalarField<D> sample_to_grid(const ScalarField<D>& u, std::size_t n, int derivative_order = 1) {
  GridData<D> g;
  g.box = u.support();
  g.counts.fill(n);
  std::size_t total = 1;
  for (int i = 0; i < D; ++i) total *= n;
  g.values.resize(total);
  std::array<std::size_t, D> idx{};
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t rem = f;
    bool boundary = false;
    for (int i = D - 1; i >= 0; --i) {
      idx[i] = rem % n;
      rem /= n;
      if (idx[i] == 0 || idx[i] + 1 == n) boundary = true;
    }
    g.values[f] = boundary ? 0.0 : u(g.node(idx));
  }
  return ScalarField<D>::from_grid(std::move(g), derivative_order).with_name(u.name() + "@grid");
}

}  // namespace nonlocal_rate
