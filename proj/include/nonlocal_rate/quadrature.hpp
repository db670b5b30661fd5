#pragma once

// Quadrature building blocks shared by every energy evaluator: Gauss-Legendre
// rules, composite panel rules, sphere rules, compensated and deterministic
// parallel reductions, and a reproducible stratified Monte Carlo sampler.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

namespace nonlocal_rate {

template <int D>
using Vec = std::array<double, D>;

template <int D>
using Mat = std::array<std::array<double, D>, D>;

/// Raised when an integral fails to converge within its refinement budget.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}

template <int D>
inline double norm(const Vec<D>& a) {
  return std::sqrt(dot<D>(a, a));
}

template <int D>
inline Vec<D> axpy(const Vec<D>& x, double a, const Vec<D>& y) {
  Vec<D> r;
  for (int i = 0; i < D; ++i) r[i] = x[i] + a * y[i];
  return r;
}

/// Quadratic form e^T M e.
template <int D>
inline double quad_form(const Mat<D>& m, const Vec<D>& e) {
  double s = 0.0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) s += e[i] * m[i][j] * e[j];
  return s;
}

/// Axis-aligned box [lo, hi].
template <int D>
struct Box {
  Vec<D> lo{};
  Vec<D> hi{};

  bool contains(const Vec<D>& x) const {
    for (int i = 0; i < D; ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  Box padded(double pad) const {
    Box b = *this;
    for (int i = 0; i < D; ++i) {
      b.lo[i] -= pad;
      b.hi[i] += pad;
    }
    return b;
  }

  Vec<D> center() const {
    Vec<D> c;
    for (int i = 0; i < D; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }

  double half_diagonal() const {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += 0.25 * (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(s);
  }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= hi[i] - lo[i];
    return v;
  }

  /// Parameter interval {t : p + t*dir in box}; empty when first > second.
  std::pair<double, double> line_intersection(const Vec<D>& p, const Vec<D>& dir) const {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < D; ++i) {
      if (std::abs(dir[i]) < 1e-300) {
        if (p[i] < lo[i] || p[i] > hi[i]) return {1.0, 0.0};
        continue;
      }
      double a = (lo[i] - p[i]) / dir[i];
      double b = (hi[i] - p[i]) / dir[i];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    return {t0, t1};
  }
};

/// Surface measure of the unit sphere S^{D-1} (counting measure for D = 1).
inline double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw std::invalid_argument("sphere_area: dimension must be 1, 2 or 3");
  }
}

/// Volume of the unit ball in R^d.
inline double ball_volume(int d) { return sphere_area(d) / d; }

// ---------------------------------------------------------------------------
// Summation

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Pairwise (tree) reduction; the result depends only on the order of `v`.
inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() <= 8) {
    CompensatedSum s;
    for (double x : v) s += x;
    return s.value();
  }
  const std::size_t mid = v.size() / 2;
  return pairwise_sum(v.first(mid)) + pairwise_sum(v.subspan(mid));
}

/// Resolves a requested worker count: positive values win, otherwise the
/// NONLOCAL_RATE_THREADS environment variable, otherwise 1.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NONLOCAL_RATE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Evaluates task(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order. Output is independent of the worker count.
template <class Task>
std::vector<double> parallel_map(std::size_t n, int threads, Task&& task) {
  std::vector<double> out(n, 0.0);
  const int workers = std::min<int>(resolve_threads(threads), static_cast<int>(std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = task(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            out[i] = task(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre

/// n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline GaussRule make_gauss_rule(int n) {
  GaussRule rule;
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  auto weight = [n](double x) {
    const double dp = boost::math::legendre_p_prime<double>(n, x);
    return 2.0 / ((1.0 - x * x) * dp * dp);
  };
  // legendre_p_zeros returns the nonnegative zeros in increasing order.
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
    if (*it == 0.0) continue;
    rule.nodes.push_back(-*it);
    rule.weights.push_back(weight(*it));
  }
  if (n % 2 == 1) {
    rule.nodes.push_back(0.0);
    rule.weights.push_back(weight(0.0));
  }
  for (double z : zeros) {
    if (z == 0.0) continue;
    rule.nodes.push_back(z);
    rule.weights.push_back(weight(z));
  }
  return rule;
}

}  // namespace detail

/// Cached Gauss-Legendre rule; references stay valid for the program lifetime.
inline const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussRule>(detail::make_gauss_rule(n));
  return *slot;
}

/// Nodes and weights of a 1-D rule.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& f) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s.value();
  }
};

/// Sorted, de-duplicated breakpoints restricted to [a, b], endpoints included.
inline std::vector<double> clip_breakpoints(double a, double b, std::span<const double> extra) {
  std::vector<double> pts{a, b};
  const double eps = 1e-13 * std::max(1.0, std::abs(b - a));
  for (double p : extra)
    if (p > a + eps && p < b - eps) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts)
    if (out.empty() || p - out.back() > eps) out.push_back(p);
  if (out.size() == 1) out.push_back(b);
  return out;
}

/// Appends an order-n Gauss rule on [a, b] to `rule`.
inline void append_gauss(Rule1D& rule, double a, double b, int n) {
  const GaussRule& g = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    rule.nodes.push_back(mid + half * g.nodes[i]);
    rule.weights.push_back(half * g.weights[i]);
  }
}

/// Composite Gauss rule: each interval between consecutive breakpoints is
/// split into `panels_per_piece` equal panels of order n.
inline Rule1D composite_gauss(std::span<const double> breaks, int panels_per_piece, int n) {
  Rule1D rule;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    for (int p = 0; p < panels_per_piece; ++p) {
      append_gauss(rule, a + (b - a) * p / panels_per_piece, a + (b - a) * (p + 1) / panels_per_piece, n);
    }
  }
  return rule;
}

/// Panels of a composite rule; used to partition work across workers.
struct Panel {
  double a;
  double b;
};

/// Splits [breaks.front(), breaks.back()] into about `target` panels, aligned to
/// every breakpoint, with panel counts proportional to piece length.
inline std::vector<Panel> aligned_panels(std::span<const double> breaks, int target) {
  std::vector<Panel> out;
  const double total = breaks.back() - breaks.front();
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    const int m = std::max(1, static_cast<int>(std::ceil(target * (b - a) / total - 1e-9)));
    for (int p = 0; p < m; ++p) out.push_back({a + (b - a) * p / m, a + (b - a) * (p + 1) / m});
  }
  return out;
}

/// Adaptive Gauss-Legendre on [a, b]: a panel is accepted when the order-n
/// estimate and the sum over its two halves agree to `tol` (absolute, scaled
/// by `scale`). Throws QuadratureError past `max_depth` bisections.
template <class F>
double adaptive_gauss(F&& f, double a, double b, double tol, int max_depth = 30, int n = 15, double* error = nullptr) {
  const GaussRule& g = gauss_legendre(n);
  auto panel = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    CompensatedSum s;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * f(mid + half * g.nodes[i]);
    return half * s.value();
  };
  CompensatedSum total;
  double err_total = 0.0;
  struct Item {
    double lo, hi, value;
    int depth;
  };
  std::vector<Item> stack{{a, b, panel(a, b), 0}};
  const double width = b - a;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (it.lo + it.hi);
    const double left = panel(it.lo, mid);
    const double right = panel(mid, it.hi);
    const double diff = std::abs(left + right - it.value);
    const double allowed = tol * std::max((it.hi - it.lo) / width, 1e-6);
    if (diff <= allowed || diff <= 1e-15 * std::abs(left + right)) {
      total += left + right;
      err_total += diff;
      continue;
    }
    if (it.depth >= max_depth) {
      throw QuadratureError("adaptive_gauss: no convergence on [" + std::to_string(it.lo) + ", " +
                            std::to_string(it.hi) + "]");
    }
    stack.push_back({mid, it.hi, right, it.depth + 1});
    stack.push_back({it.lo, mid, left, it.depth + 1});
  }
  if (error) *error = err_total;
  return total.value();
}

// ---------------------------------------------------------------------------
// Sphere and ball rules

/// Quadrature rule on S^{D-1}; weights sum to the sphere area.
template <int D>
struct SphereRule {
  std::vector<Vec<D>> directions;
  std::vector<double> weights;
};

/// D = 1: {-1, +1}; D = 2: `angular` uniform angles; D = 3: Gauss in cos(theta)
/// with `angular` nodes times 2*`angular` uniform azimuths.
template <int D>
SphereRule<D> sphere_rule(int angular) {
  SphereRule<D> rule;
  if constexpr (D == 1) {
    rule.directions = {Vec<1>{-1.0}, Vec<1>{1.0}};
    rule.weights = {1.0, 1.0};
  } else if constexpr (D == 2) {
    for (int j = 0; j < angular; ++j) {
      const double a = 2.0 * std::numbers::pi * (j + 0.5) / angular;
      rule.directions.push_back({std::cos(a), std::sin(a)});
      rule.weights.push_back(2.0 * std::numbers::pi / angular);
    }
  } else {
    static_assert(D == 3, "dimensions 1..3 only");
    const GaussRule& g = gauss_legendre(angular);
    const int nphi = 2 * angular;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double c = g.nodes[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int j = 0; j < nphi; ++j) {
        const double p = 2.0 * std::numbers::pi * (j + 0.5) / nphi;
        rule.directions.push_back({s * std::cos(p), s * std::sin(p), c});
        rule.weights.push_back(g.weights[i] * 2.0 * std::numbers::pi / nphi);
      }
    }
  }
  return rule;
}

/// Radial Gauss rule on (0, R] aligned to `breaks`; the innermost piece is
/// graded geometrically toward 0 with `graded` extra panels (no node at 0).
inline Rule1D radial_rule(double radius, std::span<const double> breaks, int n, int panels_per_piece = 1,
                          int graded = 0) {
  std::vector<double> pts = clip_breakpoints(0.0, radius, breaks);
  Rule1D rule;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    double a = pts[k];
    const double b = pts[k + 1];
    if (k == 0 && graded > 0) {
      double lo = b * std::pow(0.25, graded);
      append_gauss(rule, 0.0, lo, n);
      for (int g = graded; g >= 1; --g) {
        const double hi = b * std::pow(0.25, g - 1);
        if (g == 1) {
          for (int p = 0; p < panels_per_piece; ++p)
            append_gauss(rule, lo + (hi - lo) * p / panels_per_piece, lo + (hi - lo) * (p + 1) / panels_per_piece, n);
        } else {
          append_gauss(rule, lo, hi, n);
        }
        lo = hi;
      }
      continue;
    }
    for (int p = 0; p < panels_per_piece; ++p)
      append_gauss(rule, a + (b - a) * p / panels_per_piece, a + (b - a) * (p + 1) / panels_per_piece, n);
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Discretization contract

/// x-rule of the d-dimensional energies; `automatic` picks the trapezoid rule
/// for smooth fields without kinks and aligned Gauss panels otherwise.
enum class XRule { automatic, gauss, trapezoid };

/// Discretization parameters for every integral in the library.
struct QuadratureScheme {
  // 1-D energies
  int gauss_order = 16;        ///< nodes per x-panel
  int inner_order = 16;        ///< n_min: nodes per panel of inner averages
  int theta_order = 32;        ///< nodes for the curvature weight
  double tol = 1e-8;           ///< relative stopping tolerance of panel refinement
  int max_refinements = 20;

  // d-dimensional energies
  int nd_x_panels = 16;        ///< panels per axis over the padded support
  int nd_x_order = 8;          ///< Gauss nodes per panel and axis
  XRule nd_x_rule = XRule::automatic;
  int nd_max_refinements = 0;  ///< extra panel doublings of the x-rule
  double nd_tol = 1e-6;        ///< relative stopping tolerance of those doublings
  int radial_order = 16;       ///< Gauss nodes per radial piece
  int radial_panels = 1;       ///< panels per radial piece
  int radial_graded = 0;       ///< geometric panels toward z = 0
  int angular = 64;            ///< D = 2 angles; D = 3 polar order
  double slice_dx = 0.01;      ///< hyperplane grid spacing for slicing
  int slice_panels = 4;        ///< panels per piece of each sliced 1-D energy
  int slice_order = 12;        ///< Gauss nodes per panel of each sliced 1-D energy

  // kernels
  double kernel_tol = 1e-13;   ///< absolute tolerance of effective-kernel integrals
  int kernel_grid = 200;       ///< sampling points for positivity checks

  // Monte Carlo
  std::uint64_t seed = 0;
  std::size_t mc_samples = 0;  ///< 0 disables the Monte Carlo backend
  int mc_strata = 16;

  int threads = 0;             ///< 0: NONLOCAL_RATE_THREADS or 1
};

/// Estimate of a Monte Carlo integral.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Stratified Monte Carlo over `strata` independent strata. `sample(rng, s)`
/// returns one weighted sample of stratum s whose expectation is that
/// stratum's contribution. Each stratum draws from its own generator keyed by
/// (seed, s), so the estimate does not depend on the worker count.
template <class Sampler>
McEstimate stratified_mc(std::size_t samples, int strata, std::uint64_t seed, int threads, Sampler&& sample) {
  if (samples == 0 || strata <= 0) throw std::invalid_argument("stratified_mc: empty sample budget");
  const std::size_t per = std::max<std::size_t>(2, samples / strata);
  std::vector<double> means(strata), vars(strata);
  auto run = [&](std::size_t s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    CompensatedSum sum, sum2;
    for (std::size_t i = 0; i < per; ++i) {
      const double v = sample(rng, static_cast<int>(s));
      sum += v;
      sum2 += v * v;
    }
    const double m = sum.value() / per;
    means[s] = m;
    vars[s] = std::max(0.0, sum2.value() / per - m * m) * per / (per - 1.0);
    return 0.0;
  };
  parallel_map(static_cast<std::size_t>(strata), threads, run);
  McEstimate est;
  est.samples = per * strata;
  est.seed = seed;
  double var = 0.0;
  for (int s = 0; s < strata; ++s) {
    est.mean += means[s];
    var += vars[s] / per;
  }
  est.std_error = std::sqrt(var);
  return est;
}

}  // namespace nonlocal_rate
