#pragma once

// Even, nonnegative, compactly supported kernels K on R^d, their rescalings
// K_h(z) = h^{-d} K(z/h), the triangle kernel J, and the effective kernel
//   Kt(z) = int_{-1}^{1} J(r) K_{|r|}(z) dr
// with its closed-form lower bound on B(0, r1).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

/// Shrink factor of the guaranteed positivity ball of the effective kernel:
/// 1 for d = 2, (d-2)/(d-1) for d > 2.
inline double sigma_d(int d) {
  if (d < 2) throw std::invalid_argument("sigma_d: defined for d >= 2 only");
  return d == 2 ? 1.0 : static_cast<double>(d - 2) / static_cast<double>(d - 1);
}

/// J(r) = (1 - |r|)^+
inline double triangle_J(double r) { return std::max(0.0, 1.0 - std::abs(r)); }

/// J_h(r) = J(r/h)/h, a probability density on [-h, h].
inline double triangle_J_h(double r, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("triangle_J_h: h must be positive");
  return triangle_J(r / h) / h;
}

/// Annulus B(0, r1) \ B(0, r0) on which the kernel is bounded below.
struct PositivityAnnulus {
  double r0 = 0.0;
  double r1 = 1.0;
};

/// Kernel K: R^d -> [0, inf) vanishing outside B(0, support_radius).
///
/// `radial_breaks` lists radii across which K may jump; quadratures are
/// aligned to them. Mass and second moment are computed once at
/// construction by radial x sphere quadrature.
template <int D>
class Kernel {
 public:
  using Evaluator = std::function<double(const Vec<D>&)>;
  using Profile = std::function<double(double)>;

  Kernel(std::string name, Evaluator eval, double support_radius, PositivityAnnulus annulus,
         std::vector<double> radial_breaks = {}, Profile radial_profile = {})
      : name_(std::move(name)),
        eval_(std::move(eval)),
        profile_(std::move(radial_profile)),
        radius_(support_radius),
        annulus_(annulus),
        breaks_(std::move(radial_breaks)) {
    if (!(radius_ > 0.0) || !std::isfinite(radius_))
      throw std::invalid_argument("kernel '" + name_ + "': support radius must be positive and finite");
    compute_moments();
  }

  double operator()(const Vec<D>& z) const {
    if (norm<D>(z) > radius_) return 0.0;
    return eval_(z);
  }

  /// Value along the ray rho*e (uses the radial profile when available).
  double along(double rho, const Vec<D>& e) const {
    if (rho > radius_) return 0.0;
    if (profile_) return profile_(rho);
    Vec<D> z;
    for (int i = 0; i < D; ++i) z[i] = rho * e[i];
    return eval_(z);
  }

  const std::string& name() const { return name_; }
  double support_radius() const { return radius_; }
  bool is_radial() const { return static_cast<bool>(profile_); }
  const Profile& radial_profile() const { return profile_; }
  const PositivityAnnulus& annulus() const { return annulus_; }
  const std::vector<double>& radial_breaks() const { return breaks_; }
  double mass() const { return mass_; }
  double second_moment() const { return second_moment_; }

  /// Documented mass lost by truncation of a non-compact kernel (0 otherwise).
  double mass_defect() const { return mass_defect_; }
  Kernel with_mass_defect(double defect) const {
    Kernel k = *this;
    k.mass_defect_ = defect;
    return k;
  }

  /// int K(z) |z|^p dz by radial x sphere quadrature aligned to the breaks.
  double moment(int p, int radial_order = 24, int angular = 32) const {
    std::vector<double> pts = breaks_;
    const Rule1D radial = radial_rule(radius_, pts, radial_order, 4);
    if (profile_) {
      CompensatedSum s;
      for (std::size_t i = 0; i < radial.size(); ++i) {
        const double r = radial.nodes[i];
        s += radial.weights[i] * profile_(r) * std::pow(r, D - 1 + p);
      }
      return sphere_area(D) * s.value();
    }
    const SphereRule<D> sphere = sphere_rule<D>(angular);
    CompensatedSum s;
    for (std::size_t j = 0; j < sphere.directions.size(); ++j)
      for (std::size_t i = 0; i < radial.size(); ++i) {
        const double r = radial.nodes[i];
        s += sphere.weights[j] * radial.weights[i] * along(r, sphere.directions[j]) * std::pow(r, D - 1 + p);
      }
    return s.value();
  }

 private:
  void compute_moments() {
    mass_ = moment(0);
    second_moment_ = moment(2);
  }

  std::string name_;
  Evaluator eval_;
  Profile profile_;
  double radius_;
  PositivityAnnulus annulus_;
  std::vector<double> breaks_;
  double mass_ = 0.0;
  double second_moment_ = 0.0;
  double mass_defect_ = 0.0;
};

/// K_h(z) = h^{-d} K(z/h); mass is preserved and the support scales by h.
template <int D>
Kernel<D> rescale(const Kernel<D>& k, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("rescale: h must be positive");
  const double scale = std::pow(h, -D);
  auto eval = [k, h, scale](const Vec<D>& z) {
    Vec<D> y;
    for (int i = 0; i < D; ++i) y[i] = z[i] / h;
    return scale * k(y);
  };
  typename Kernel<D>::Profile profile;
  if (k.is_radial()) profile = [p = k.radial_profile(), h, scale](double r) { return scale * p(r / h); };
  std::vector<double> breaks = k.radial_breaks();
  for (double& b : breaks) b *= h;
  PositivityAnnulus ann{k.annulus().r0 * h, k.annulus().r1 * h};
  std::ostringstream name;
  name << k.name() << "_h=" << h;
  return Kernel<D>(name.str(), eval, k.support_radius() * h, ann, breaks, profile).with_mass_defect(k.mass_defect());
}

// ---------------------------------------------------------------------------
// Built-in kernels

/// Normalized indicator of B(0, 1): 1/|B_d| inside.
template <int D>
Kernel<D> ball_kernel() {
  const double c = 1.0 / ball_volume(D);
  auto profile = [c](double r) { return r <= 1.0 ? c : 0.0; };
  auto eval = [profile](const Vec<D>& z) { return profile(norm<D>(z)); };
  return Kernel<D>("ball", eval, 1.0, {0.0, 1.0}, {1.0}, profile);
}

/// exp(-|z|^2) truncated at |z| <= cutoff; positivity declared on B(0, r1).
template <int D>
Kernel<D> gaussian_kernel(double cutoff = 4.0, double r1 = 1.0) {
  auto profile = [cutoff](double r) { return r <= cutoff ? std::exp(-r * r) : 0.0; };
  auto eval = [profile](const Vec<D>& z) { return profile(norm<D>(z)); };
  // Tail mass of the untruncated Gaussian: pi^{d/2} Q(d/2, cutoff^2).
  const double defect = std::pow(std::numbers::pi, 0.5 * D) * boost::math::gamma_q(0.5 * D, cutoff * cutoff);
  return Kernel<D>("gaussian", eval, cutoff, {0.0, r1}, {cutoff}, profile).with_mass_defect(defect);
}

/// Normalized indicator of the annulus inner <= |z| <= 1.
template <int D>
Kernel<D> annulus_kernel(double inner = 0.25) {
  if (!(inner > 0.0 && inner < 1.0)) throw std::invalid_argument("annulus kernel: inner radius must lie in (0, 1)");
  const double c = 1.0 / (ball_volume(D) * (1.0 - std::pow(inner, D)));
  auto profile = [c, inner](double r) { return (r >= inner && r <= 1.0) ? c : 0.0; };
  auto eval = [profile](const Vec<D>& z) { return profile(norm<D>(z)); };
  return Kernel<D>("annulus", eval, 1.0, {inner, 1.0}, {inner, 1.0}, profile);
}

/// Wraps K as K(z)(1 + eps*z_0): breaks evenness, used to exercise the validator.
template <int D>
Kernel<D> odd_perturbation(const Kernel<D>& k, double eps) {
  auto eval = [k, eps](const Vec<D>& z) { return k(z) * (1.0 + eps * z[0]); };
  return Kernel<D>(k.name() + "+odd", eval, k.support_radius(), k.annulus(), k.radial_breaks());
}

template <int D>
Kernel<D> builtin_kernel(const std::string& name, double param = -1.0) {
  if (name == "ball") return ball_kernel<D>();
  if (name == "gaussian") return param > 0 ? gaussian_kernel<D>(param) : gaussian_kernel<D>();
  if (name == "annulus") return param > 0 ? annulus_kernel<D>(param) : annulus_kernel<D>();
  throw std::invalid_argument("unknown kernel '" + name + "' (expected ball, gaussian or annulus)");
}

// ---------------------------------------------------------------------------
// Validation

/// Outcome of the structural checks on a kernel.
struct KernelValidation {
  bool even = true;
  bool finite_moments = true;
  bool positive_on_annulus = true;
  bool sigma_condition = true;   ///< r0 < sigma_d r1 (d >= 2)
  double max_odd_defect = 0.0;   ///< max |K(z) - K(-z)| over samples
  double positivity = 0.0;       ///< k: min of K over the annulus sampling grid
  double grid_spacing = 0.0;     ///< radial spacing of that grid
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Deterministic sample points filling B(0, r) \ B(0, r_in): `n` radii times
/// the directions of a sphere rule.
template <int D>
std::vector<Vec<D>> annulus_samples(double r_in, double r, int n) {
  std::vector<Vec<D>> pts;
  const SphereRule<D> sphere = sphere_rule<D>(D == 3 ? 6 : 16);
  for (int i = 0; i < n; ++i) {
    const double rho = r_in + (r - r_in) * (i + 0.5) / n;
    for (const auto& e : sphere.directions) {
      Vec<D> z;
      for (int j = 0; j < D; ++j) z[j] = rho * e[j];
      pts.push_back(z);
    }
  }
  return pts;
}

template <int D>
KernelValidation validate_kernel(const Kernel<D>& k, int grid = 200) {
  KernelValidation v;
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double R = k.support_radius();
  for (int s = 0; s < 2000; ++s) {
    Vec<D> z;
    for (int i = 0; i < D; ++i) z[i] = R * u(rng);
    Vec<D> m;
    for (int i = 0; i < D; ++i) m[i] = -z[i];
    const double a = k(z), b = k(m);
    if (a < 0.0 || b < 0.0) v.failures.push_back("kernel takes negative values");
    v.max_odd_defect = std::max(v.max_odd_defect, std::abs(a - b));
  }
  if (v.max_odd_defect > 1e-12 * std::max(1.0, k.mass())) {
    v.even = false;
    v.failures.push_back("kernel is not even: max |K(z) - K(-z)| = " + std::to_string(v.max_odd_defect));
  }
  if (!std::isfinite(k.mass()) || !std::isfinite(k.second_moment()) || k.mass() <= 0.0) {
    v.finite_moments = false;
    v.failures.push_back("kernel mass / second moment not finite and positive");
  }
  const auto& ann = k.annulus();
  v.grid_spacing = (ann.r1 - ann.r0) / grid;
  double kmin = std::numeric_limits<double>::infinity();
  for (const auto& z : annulus_samples<D>(ann.r0, ann.r1, grid)) kmin = std::min(kmin, k(z));
  v.positivity = kmin;
  if (!(kmin > 0.0)) {
    v.positive_on_annulus = false;
    v.failures.push_back("kernel not bounded below on the positivity annulus");
  }
  if constexpr (D >= 2) {
    if (!(ann.r0 < sigma_d(D) * ann.r1)) {
      v.sigma_condition = false;
      v.failures.push_back("annulus violates r0 < sigma_d * r1");
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Effective kernel

/// Kt(z) = int_{-1}^{1} J(r) K_{|r|}(z) dr = 2 int_{|z|/R}^{1} (1 - r) r^{-d} K(z/r) dr.
///
/// Point values use adaptive Gauss-Legendre in log r on the pieces between
/// the images |z|/b of the kernel's radial breaks. Mass and second moment are
/// computed eagerly and cached.
template <int D>
class EffectiveKernel {
 public:
  explicit EffectiveKernel(Kernel<D> base, double tol = 1e-13) : base_(std::move(base)), tol_(tol) {
    mass_ = moment(0);
    second_moment_ = moment(2);
  }

  const Kernel<D>& base() const { return base_; }
  double mass() const { return mass_; }
  double second_moment() const { return second_moment_; }
  double support_radius() const { return base_.support_radius(); }

  double operator()(const Vec<D>& z) const {
    const double rho = norm<D>(z);
    if (rho == 0.0) return std::numeric_limits<double>::infinity();
    Vec<D> e;
    for (int i = 0; i < D; ++i) e[i] = z[i] / rho;
    return along(rho, e);
  }

  /// Kt(rho*e) for a unit vector e.
  double along(double rho, const Vec<D>& e) const {
    const double R = base_.support_radius();
    if (rho >= R) return 0.0;
    if (rho <= 0.0) return std::numeric_limits<double>::infinity();
    // Pieces in s = log r, cut where rho/r crosses a kernel break.
    std::vector<double> cuts;
    for (double b : base_.radial_breaks())
      if (b > 0.0) cuts.push_back(std::log(rho / b));
    const auto pieces = clip_breakpoints(std::log(rho / R), 0.0, cuts);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
      const double lo = pieces[k], hi = pieces[k + 1];
      // K is smooth for rho/r inside this piece; clamping keeps rounding in
      // exp(s) from landing on the wrong side of a kernel jump.
      const double arg_lo = rho * std::exp(-hi) * (1.0 + 1e-12), arg_hi = rho * std::exp(-lo) * (1.0 - 1e-12);
      // 2 (1 - r) r^{1-d} K(rho e / r) ds.
      auto integrand = [&](double s) {
        const double r = std::exp(s);
        return 2.0 * (1.0 - r) * std::pow(r, 1 - D) * base_.along(std::clamp(rho / r, arg_lo, arg_hi), e);
      };
      try {
        total += adaptive_gauss(integrand, lo, hi, tol_ * std::max(1.0, std::pow(rho, 1 - D)), 40, 15);
      } catch (const QuadratureError& err) {
        std::ostringstream msg;
        msg << "effective kernel: quadrature failed at |z| = " << rho << " (" << err.what() << ")";
        throw QuadratureError(msg.str());
      }
    }
    return total;
  }

  /// int Kt(z) |z|^p dz by adaptive quadrature in log rho over each piece
  /// between kernel breaks, times a sphere rule (or |S^{d-1}| when radial).
  double moment(int p) const {
    std::vector<Vec<D>> dirs;
    std::vector<double> wts;
    if (base_.is_radial()) {
      Vec<D> e{};
      e[0] = 1.0;
      dirs.push_back(e);
      wts.push_back(sphere_area(D));
    } else {
      const SphereRule<D> s = sphere_rule<D>(D == 3 ? 12 : 32);
      dirs = s.directions;
      wts = s.weights;
    }
    const double R = base_.support_radius();
    std::vector<double> cuts = base_.radial_breaks();
    auto pieces = clip_breakpoints(0.0, R, cuts);
    const double floor = R * 1e-14;
    CompensatedSum total;
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      auto integrand = [&](double s) {
        const double rho = std::exp(s);
        return along(rho, dirs[j]) * std::pow(rho, D + p);
      };
      for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
        const double lo = std::log(std::max(pieces[k], floor));
        const double hi = std::log(pieces[k + 1]);
        total += wts[j] * adaptive_gauss(integrand, lo, hi, 1e-12 * std::max(1.0, base_.mass()), 40, 15);
      }
    }
    return total.value();
  }

 private:
  Kernel<D> base_;
  double tol_;
  double mass_ = 0.0;
  double second_moment_ = 0.0;
};

template <int D>
EffectiveKernel<D> effective_kernel(const Kernel<D>& k) {
  return EffectiveKernel<D>(k);
}

/// Closed-form lower bound of Kt at |z| = rho < r1:
///   (2k / rho^{d-1}) int_{max(r0, rho)}^{r1} s^{d-2} (1 - rho/s) ds,
/// with k the positivity constant of K on B(0, r1) \ B(0, r0).
inline double effective_kernel_lower_bound(int d, double k, double r0, double r1, double rho) {
  if (rho > r1) throw std::domain_error("effective_kernel_lower_bound: |z| must not exceed r1");
  if (rho == r1) return 0.0;
  const double M = std::max(r0, rho);
  if (M <= 0.0) return std::numeric_limits<double>::infinity();
  switch (d) {
    case 1:
      return 2.0 * k * (std::log(r1 / M) - rho * (1.0 / M - 1.0 / r1));
    case 2:
      return 2.0 * k * ((r1 - M) / rho - std::log(r1 / M));
    default: {
      const double dd = d;
      return 2.0 * k / ((dd - 1.0) * (dd - 2.0) * std::pow(rho, dd - 1.0)) *
             ((dd - 2.0) * (std::pow(r1, dd - 1.0) - std::pow(M, dd - 1.0)) -
              (dd - 1.0) * rho * (std::pow(r1, dd - 2.0) - std::pow(M, dd - 2.0)));
    }
  }
}

template <int D>
double effective_kernel_lower_bound(const Kernel<D>& kernel, double positivity, const Vec<D>& z) {
  return effective_kernel_lower_bound(D, positivity, kernel.annulus().r0, kernel.annulus().r1, norm<D>(z));
}

}  // namespace nonlocal_rate
