#pragma once

// Reference computations used to validate the main evaluators. Everything
// here uses uniform trapezoid rules, FFTs or Monte Carlo, never the Gauss
// machinery of the main path. Single-threaded.

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/energynd.hpp"
#include "nonlocal_rate/functions.hpp"
#include "nonlocal_rate/integrands.hpp"
#include "nonlocal_rate/kernels.hpp"

namespace nonlocal_rate::oracles {

/// Reference vs main value. The discrepancies are always derived from the
/// two stored values.
class OracleReport {
 public:
  OracleReport(std::string name, double reference, double main, nlohmann::json resolution = nlohmann::json::object())
      : name_(std::move(name)), reference_(reference), main_(main), resolution_(std::move(resolution)) {}

  const std::string& name() const { return name_; }
  double reference() const { return reference_; }
  double main() const { return main_; }
  double abs_discrepancy() const { return std::abs(main_ - reference_); }
  double rel_discrepancy() const {
    const double s = std::abs(reference_);
    return s > 0.0 ? abs_discrepancy() / s : abs_discrepancy();
  }
  const nlohmann::json& resolution() const { return resolution_; }

  nlohmann::json to_json() const {
    return {{"oracle", name_},
            {"reference", reference_},
            {"main", main_},
            {"abs_discrepancy", abs_discrepancy()},
            {"rel_discrepancy", rel_discrepancy()},
            {"resolution", resolution_}};
  }

 private:
  std::string name_;
  double reference_;
  double main_;
  nlohmann::json resolution_;
};

class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t max_oracle_points = std::size_t{1} << 28;

namespace detail {

inline void check_budget(double points, const char* what) {
  if (!(points <= static_cast<double>(max_oracle_points)))
    throw ResourceLimit(std::string(what) + ": resolution exceeds the oracle budget");
}

/// 1 - sinc^2(s), with a series near 0.
inline double one_minus_sinc2(double s) {
  if (std::abs(s) < 1e-3) {
    const double s2 = s * s;
    return s2 / 3.0 - 2.0 * s2 * s2 / 45.0 + s2 * s2 * s2 / 315.0;
  }
  const double c = std::sin(s) / s;
  return 1.0 - c * c;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  ~FftwPlan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

/// Trapezoid sum over a uniform grid of `n` intervals on [a, b] with the
/// endpoint values nudged inside (one-sided limits at jumps).
template <class G>
double trapezoid(G&& g, double a, double b, std::size_t n) {
  if (!(b > a)) return 0.0;
  const double dx = (b - a) / n;
  const double nudge = 1e-13 * (b - a);
  CompensatedSum s;
  s += 0.5 * g(a + nudge);
  s += 0.5 * g(b - nudge);
  for (std::size_t i = 1; i < n; ++i) s += g(a + i * dx);
  return s.value() * dx;
}

/// Trapezoid over each piece of `breaks`, with points split by length.
template <class G>
double trapezoid_pieces(G&& g, const std::vector<double>& breaks, std::size_t n) {
  const double total = breaks.back() - breaks.front();
  CompensatedSum s;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double len = breaks[k + 1] - breaks[k];
    const auto m = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(n * len / total)));
    s += trapezoid(g, breaks[k], breaks[k + 1], m);
  }
  return s.value();
}

}  // namespace detail

/// E_h(u) for f(t) = t^2 from the spectrum of u:
///   E_h = h^{-2} int |u^(k)|^2 (1 - sinc^2(kh/2)) dk / 2 pi,
/// using `samples` points on a window `padding` times the support length.
inline double spectral_E_h_quadratic(const Field1D& u, const ConvexIntegrand& fi, double h,
                                     std::size_t samples = std::size_t{1} << 18, int padding = 8) {
  if (fi.name != "quadratic") throw std::invalid_argument("spectral_E_h_quadratic: integrand must be quadratic");
  nonlocal_rate::detail::require_positive_h(h, "spectral_E_h_quadratic");
  if (samples < 16 || (samples & (samples - 1)) != 0)
    throw std::invalid_argument("spectral_E_h_quadratic: samples must be a power of two");
  if (padding < 2) throw std::invalid_argument("spectral_E_h_quadratic: padding must be at least 2");
  const double a = u.support().lo[0], b = u.support().hi[0];
  const double len = std::max(b - a, 0.0) + h;
  const double L = padding * len;
  const double x0 = 0.5 * (a + b) - 0.5 * L;
  const double dx = L / samples;
  const std::size_t nk = samples / 2 + 1;
  std::unique_ptr<double, detail::FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * samples)));
  std::unique_ptr<fftw_complex, detail::FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nk)));
  detail::FftwPlan plan;
  plan.plan = fftw_plan_dft_r2c_1d(static_cast<int>(samples), in.get(), out.get(), FFTW_ESTIMATE);
  for (std::size_t j = 0; j < samples; ++j) in.get()[j] = u(x0 + j * dx);
  fftw_execute(plan.plan);
  CompensatedSum s;
  for (std::size_t m = 0; m < nk; ++m) {
    const double re = out.get()[m][0], im = out.get()[m][1];
    const double k = 2.0 * std::numbers::pi * m / L;
    const double mult = (m == 0 || 2 * m == samples) ? 1.0 : 2.0;
    s += mult * (re * re + im * im) * detail::one_minus_sinc2(0.5 * k * h);
  }
  return dx * dx / L * s.value() / (h * h);
}

/// E_h(u) by cumulative trapezoid: U on a grid of spacing h/m, D_hU as a
/// difference of grid values, then the trapezoid rule in x.
inline double bruteforce_E_h(const Field1D& u, const ConvexIntegrand& fi, double h, std::size_t resolution = 400000) {
  nonlocal_rate::detail::require_positive_h(h, "bruteforce_E_h");
  detail::check_budget(static_cast<double>(resolution), "bruteforce_E_h");
  const double a = u.support().lo[0], b = u.support().hi[0];
  const double span = b - a + 2.0 * h;
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(resolution * h / span)));
  const double dx = h / m;
  const auto n = static_cast<std::size_t>(std::ceil(span / dx)) + 1;
  detail::check_budget(static_cast<double>(n), "bruteforce_E_h");
  std::vector<double> val(n), cum(n, 0.0);
  const double x0 = a - h;
  for (std::size_t j = 0; j < n; ++j) val[j] = u(x0 + j * dx);
  for (std::size_t j = 1; j < n; ++j) cum[j] = cum[j - 1] + 0.5 * dx * (val[j - 1] + val[j]);
  CompensatedSum s;
  for (std::size_t j = 0; j + m < n; ++j) {
    const double avg = (cum[j + m] - cum[j]) / h;
    const double w = (j == 0) ? 0.5 : 1.0;
    s += w * (fi.f(val[j]) - fi.f(avg));
  }
  return s.value() * dx / (h * h);
}

/// E_0(u) = (1/24) int f''(u) u'^2 by the trapezoid rule.
inline double bruteforce_E_0(const Field1D& u, const ConvexIntegrand& fi, std::size_t resolution = 400000) {
  detail::check_budget(static_cast<double>(resolution), "bruteforce_E_0");
  const double a = u.support().lo[0], b = u.support().hi[0];
  std::vector<double> breaks = u.breakpoints(0);
  breaks = clip_breakpoints(a, b, breaks);
  auto g = [&](double x) {
    const double d = u.derivative(x);
    return fi.d2f(u(x)) * d * d;
  };
  return detail::trapezoid_pieces(g, breaks, resolution) / 24.0;
}

/// lambda_h(a, b) by the trapezoid rule in theta.
inline double bruteforce_lambda(const ConvexIntegrand& fi, double a, double b, std::size_t resolution = 100000) {
  detail::check_budget(static_cast<double>(resolution), "bruteforce_lambda");
  return detail::trapezoid([&](double t) { return (1.0 - t) * fi.d2f((1.0 - t) * a + t * b); }, 0.0, 1.0,
                           resolution);
}

/// (1/h) int_x^{x+h} u by the trapezoid rule.
inline double bruteforce_moving_average(const Field1D& u, double h, double x, std::size_t resolution = 100000) {
  nonlocal_rate::detail::require_positive_h(h, "bruteforce_moving_average");
  detail::check_budget(static_cast<double>(resolution), "bruteforce_moving_average");
  std::vector<double> cuts = u.breakpoints(0);
  cuts.push_back(u.support().lo[0]);
  cuts.push_back(u.support().hi[0]);
  return detail::trapezoid_pieces([&](double y) { return u(y); }, clip_breakpoints(x, x + h, cuts), resolution) / h;
}

/// int Kt(z) |z|^p dz for a radial kernel by nested trapezoid rules:
/// Kt(rho) = 2 int (1 - r) r^{-d} K(rho/r) dr in log r, then the rho
/// integral in log rho, each split at the kernel's radial breaks.
template <int D>
double bruteforce_effective_moment(const Kernel<D>& K, int p, std::size_t resolution = 2000) {
  if (!K.is_radial()) throw std::invalid_argument("bruteforce_effective_moment: radial kernel required");
  detail::check_budget(static_cast<double>(resolution) * resolution, "bruteforce_effective_moment");
  const double R = K.support_radius();
  Vec<D> e{};
  e[0] = 1.0;
  auto kt = [&](double rho) {
    std::vector<double> cuts;
    for (double b : K.radial_breaks())
      if (b > 0.0) cuts.push_back(std::log(rho / b));
    std::vector<double> pieces{std::log(rho / R), 0.0};
    for (double c : cuts)
      if (c > pieces.front() && c < 0.0) pieces.push_back(c);
    std::sort(pieces.begin(), pieces.end());
    auto g = [&](double s) {
      const double r = std::exp(s);
      return 2.0 * (1.0 - r) * std::pow(r, 1 - D) * K.along(rho / r, e);
    };
    return detail::trapezoid_pieces(g, pieces, resolution);
  };
  const double floor = 1e-12 * R;
  std::vector<double> outer{std::log(floor), std::log(R)};
  for (double b : K.radial_breaks())
    if (b > floor && b < R) outer.push_back(std::log(b));
  std::sort(outer.begin(), outer.end());
  auto g = [&](double s) {
    const double rho = std::exp(s);
    return std::pow(rho, D + p) * kt(rho);
  };
  return sphere_area(D) * detail::trapezoid_pieces(g, outer, resolution);
}

/// int K(z) |z|^p dz for a radial kernel by the trapezoid rule in rho.
template <int D>
double bruteforce_kernel_moment(const Kernel<D>& K, int p, std::size_t resolution = 200000) {
  if (!K.is_radial()) throw std::invalid_argument("bruteforce_kernel_moment: radial kernel required");
  detail::check_budget(static_cast<double>(resolution), "bruteforce_kernel_moment");
  Vec<D> e{};
  e[0] = 1.0;
  std::vector<double> br = clip_breakpoints(0.0, K.support_radius(), K.radial_breaks());
  return sphere_area(D) *
         detail::trapezoid_pieces([&](double r) { return std::pow(r, D - 1 + p) * K.along(r, e); }, br, resolution);
}

/// Plain Monte Carlo estimate of the d-dimensional limit functional with x
/// uniform on the support and z uniform on the kernel ball.
template <int D>
McEstimate monte_carlo_limit_functional(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                                        std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("monte_carlo_limit_functional: need at least two samples");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box<D> box = u.support();
  const double R = K.support_radius();
  const double vol = box.volume() * ball_volume(D) * std::pow(R, D);
  CompensatedSum s, s2;
  for (std::size_t i = 0; i < samples; ++i) {
    Vec<D> x, z;
    for (int k = 0; k < D; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng);
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (int k = 0; k < D; ++k) {
        z[k] = R * (2.0 * unit(rng) - 1.0);
        r2 += z[k] * z[k];
      }
    } while (r2 > R * R || r2 == 0.0);
    const double rho = std::sqrt(r2);
    Vec<D> e;
    for (int k = 0; k < D; ++k) e[k] = z[k] / rho;
    const double c = quad_form<D>(u.hessian(x), e);
    const double v = vol * K(z) * r2 * fi.d2f(std::abs(dot<D>(u.gradient(x), e))) * c * c / 24.0;
    s += v;
    s2 += v * v;
  }
  McEstimate est;
  est.samples = samples;
  est.seed = seed;
  est.mean = s.value() / samples;
  est.std_error = std::sqrt(std::max(0.0, s2.value() / samples - est.mean * est.mean) / (samples - 1.0));
  return est;
}

/// Plain Monte Carlo estimate of F_h(u): x uniform on the support padded by
/// h R_K, z uniform on B(0, R_K), y = x + h z.
template <int D>
McEstimate monte_carlo_F_h(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K, double h,
                           std::size_t samples, std::uint64_t seed) {
  nonlocal_rate::detail::require_positive_h(h, "monte_carlo_F_h");
  if (samples < 2) throw std::invalid_argument("monte_carlo_F_h: need at least two samples");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double R = K.support_radius();
  const Box<D> box = u.support().padded(h * R);
  const double vol = box.volume() * ball_volume(D) * std::pow(R, D);
  CompensatedSum s, s2;
  for (std::size_t i = 0; i < samples; ++i) {
    Vec<D> x, z, y;
    for (int k = 0; k < D; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng);
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (int k = 0; k < D; ++k) {
        z[k] = R * (2.0 * unit(rng) - 1.0);
        r2 += z[k] * z[k];
      }
    } while (r2 > R * R || r2 == 0.0);
    for (int k = 0; k < D; ++k) y[k] = x[k] + h * z[k];
    const double v = vol * K(z) * fi.f(std::abs(u(y) - u(x)) / (h * std::sqrt(r2)));
    s += v;
    s2 += v * v;
  }
  McEstimate est;
  est.samples = samples;
  est.seed = seed;
  est.mean = s.value() / samples;
  est.std_error = std::sqrt(std::max(0.0, s2.value() / samples - est.mean * est.mean) / (samples - 1.0));
  return est;
}

// ---------------------------------------------------------------------------
// Named-integral dispatcher

struct RateIntegral {
  Field1D u;
  ConvexIntegrand fi;
  double h;
};
struct LimitIntegral {
  Field1D u;
  ConvexIntegrand fi;
};
struct CurvatureWeight {
  ConvexIntegrand fi;
  double a, b;
};
struct MovingAverage {
  Field1D u;
  double h, x;
};
template <int D>
struct EffectiveKernelMoment {
  Kernel<D> K;
  int p;
};

using IntegralSpec = std::variant<RateIntegral, LimitIntegral, CurvatureWeight, MovingAverage,
                                  EffectiveKernelMoment<1>, EffectiveKernelMoment<2>, EffectiveKernelMoment<3>>;

/// Recomputes the named integral with trapezoid rules at `resolution`
/// points per level.
inline double bruteforce_quadrature(const IntegralSpec& spec, std::size_t resolution) {
  struct Visitor {
    std::size_t n;
    double operator()(const RateIntegral& s) const { return bruteforce_E_h(s.u, s.fi, s.h, n); }
    double operator()(const LimitIntegral& s) const { return bruteforce_E_0(s.u, s.fi, n); }
    double operator()(const CurvatureWeight& s) const { return bruteforce_lambda(s.fi, s.a, s.b, n); }
    double operator()(const MovingAverage& s) const { return bruteforce_moving_average(s.u, s.h, s.x, n); }
    double operator()(const EffectiveKernelMoment<1>& s) const { return bruteforce_effective_moment<1>(s.K, s.p, n); }
    double operator()(const EffectiveKernelMoment<2>& s) const { return bruteforce_effective_moment<2>(s.K, s.p, n); }
    double operator()(const EffectiveKernelMoment<3>& s) const { return bruteforce_effective_moment<3>(s.K, s.p, n); }
  };
  return std::visit(Visitor{resolution}, spec);
}

}  // namespace nonlocal_rate::oracles
