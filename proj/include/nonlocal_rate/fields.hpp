#pragma once

// Catalog of analytic test fields with closed-form derivatives.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nonlocal_rate/functions.hpp"

namespace nonlocal_rate::fields {

template <int D>
Box<D> cube(const Vec<D>& center, double radius) {
  Box<D> b;
  for (int i = 0; i < D; ++i) {
    b.lo[i] = center[i] - radius;
    b.hi[i] = center[i] + radius;
  }
  return b;
}

template <int D>
ScalarField<D> zero(const Box<D>& box) {
  return ScalarField<D>::analytic(
             box, [](const Vec<D>&) { return 0.0; }, [](const Vec<D>&) { return Vec<D>{}; },
             [](const Vec<D>&) { return Mat<D>{}; }, 3)
      .with_name("zero");
}

namespace detail {

/// Radial profile g(s) of s = |x - c|^2 / R^2 with its first two s-derivatives.
struct Profile {
  double g, dg, d2g;
};

template <int D, class P>
ScalarField<D> radial_field(const Vec<D>& c, double radius, P profile, int order, std::string name) {
  const double r2 = radius * radius;
  auto value = [c, r2, profile](const Vec<D>& x) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    s /= r2;
    return s >= 1.0 ? 0.0 : profile(s).g;
  };
  auto gradient = [c, r2, profile](const Vec<D>& x) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    s /= r2;
    Vec<D> g{};
    if (s >= 1.0) return g;
    const double dg = profile(s).dg;
    for (int i = 0; i < D; ++i) g[i] = dg * 2.0 * (x[i] - c[i]) / r2;
    return g;
  };
  auto hessian = [c, r2, profile](const Vec<D>& x) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    s /= r2;
    Mat<D> h{};
    if (s >= 1.0) return h;
    const Profile p = profile(s);
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < D; ++j) {
        h[i][j] = p.d2g * 4.0 * (x[i] - c[i]) * (x[j] - c[j]) / (r2 * r2);
        if (i == j) h[i][j] += p.dg * 2.0 / r2;
      }
    }
    return h;
  };
  return ScalarField<D>::analytic(cube<D>(c, radius), value, gradient, hessian, order).with_name(std::move(name));
}

}  // namespace detail

/// C-infinity bump A*exp(1 - 1/(1 - |x-c|^2/R^2)), maximum A at c.
template <int D>
ScalarField<D> smooth_bump(const Vec<D>& center, double radius, double amplitude = 1.0) {
  auto profile = [amplitude](double s) {
    const double q = 1.0 - s;
    const double g = amplitude * std::exp(1.0 - 1.0 / q);
    return detail::Profile{g, -g / (q * q), g * (2.0 * s - 1.0) / (q * q * q * q)};
  };
  return detail::radial_field<D>(center, radius, profile, 3, "smooth_bump");
}

/// Polynomial bump A*(1 - |x-c|^2/R^2)^p, of class C^{p-1}.
template <int D>
ScalarField<D> poly_bump(const Vec<D>& center, double radius, double amplitude = 1.0, int power = 4) {
  auto profile = [amplitude, power](double s) {
    const double q = 1.0 - s;
    const double p = power;
    return detail::Profile{amplitude * std::pow(q, p), -amplitude * p * std::pow(q, p - 1),
                           amplitude * p * (p - 1) * std::pow(q, p - 2)};
  };
  return detail::radial_field<D>(center, radius, profile, std::min(power - 1, 3), "poly_bump");
}

/// A*sin(pi*(x-a)/(b-a)) on [a, b]: in H^1 with kinks at a and b.
inline Field1D sin_bump(double a = 0.0, double b = 1.0, double amplitude = 1.0) {
  const double k = std::numbers::pi / (b - a);
  auto f = Field1D::analytic(
      Box<1>{{a}, {b}}, [=](const Vec<1>& x) { return amplitude * std::sin(k * (x[0] - a)); },
      [=](const Vec<1>& x) { return Vec<1>{amplitude * k * std::cos(k * (x[0] - a))}; },
      [=](const Vec<1>& x) { return Mat<1>{{{-amplitude * k * k * std::sin(k * (x[0] - a))}}}; }, 2);
  return f
      .with_primitive([=](double x) {
        const double t = std::clamp(x, a, b);
        return -amplitude / k * std::cos(k * (t - a));
      })
      .with_breakpoints(0, {a, b})
      .with_name("sin_bump");
}

/// Hat profile: A*(1 - |x0-c0|/R)^+ times smooth bumps in the other
/// coordinates. In H^1 but not H^2 (kinks at c0 - R, c0, c0 + R).
template <int D>
ScalarField<D> hat(const Vec<D>& center, double radius, double amplitude = 1.0) {
  auto side = [radius](double t) {
    const double s = t * t / (radius * radius);
    if (s >= 1.0) return std::pair{0.0, 0.0};
    const double q = 1.0 - s;
    const double g = std::exp(1.0 - 1.0 / q);
    return std::pair{g, -g / (q * q) * 2.0 * t / (radius * radius)};
  };
  auto value = [=](const Vec<D>& x) {
    double v = amplitude * std::max(0.0, 1.0 - std::abs(x[0] - center[0]) / radius);
    for (int i = 1; i < D; ++i) v *= side(x[i] - center[i]).first;
    return v;
  };
  auto gradient = [=](const Vec<D>& x) {
    Vec<D> g{};
    const double t = x[0] - center[0];
    if (std::abs(t) >= radius) return g;
    const double ridge = amplitude * (1.0 - std::abs(t) / radius);
    const double dridge = -amplitude * (t > 0 ? 1.0 : (t < 0 ? -1.0 : 0.0)) / radius;
    std::array<std::pair<double, double>, D> s{};
    double prod = 1.0;
    for (int i = 1; i < D; ++i) {
      s[i] = side(x[i] - center[i]);
      prod *= s[i].first;
    }
    g[0] = dridge * prod;
    for (int i = 1; i < D; ++i) {
      double p = ridge * s[i].second;
      for (int j = 1; j < D; ++j)
        if (j != i) p *= s[j].first;
      g[i] = p;
    }
    return g;
  };
  auto f = ScalarField<D>::analytic(cube<D>(center, radius), value, gradient, {}, 1);
  return f.with_breakpoints(0, {center[0] - radius, center[0], center[0] + radius}).with_name("hat");
}

/// Parameters of one smooth bump in a sum.
template <int D>
struct BumpSpec {
  Vec<D> center{};
  double radius = 1.0;
  double amplitude = 1.0;
};

/// Sum of smooth bumps, supported on the bounding box of their supports.
template <int D>
ScalarField<D> bump_sum(const std::vector<BumpSpec<D>>& bumps) {
  std::vector<ScalarField<D>> parts;
  Box<D> box = cube<D>(bumps.front().center, bumps.front().radius);
  for (const auto& b : bumps) {
    parts.push_back(smooth_bump<D>(b.center, b.radius, b.amplitude));
    const Box<D> c = cube<D>(b.center, b.radius);
    for (int i = 0; i < D; ++i) {
      box.lo[i] = std::min(box.lo[i], c.lo[i]);
      box.hi[i] = std::max(box.hi[i], c.hi[i]);
    }
  }
  auto value = [parts](const Vec<D>& x) {
    double v = 0.0;
    for (const auto& p : parts) v += p(x);
    return v;
  };
  auto gradient = [parts](const Vec<D>& x) {
    Vec<D> g{};
    for (const auto& p : parts) {
      const Vec<D> q = p.gradient(x);
      for (int i = 0; i < D; ++i) g[i] += q[i];
    }
    return g;
  };
  auto hessian = [parts](const Vec<D>& x) {
    Mat<D> h{};
    for (const auto& p : parts) {
      const Mat<D> q = p.hessian(x);
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) h[i][j] += q[i][j];
    }
    return h;
  };
  return ScalarField<D>::analytic(box, value, gradient, hessian, 3).with_name("bump_sum");
}

/// One to three random smooth bumps inside `domain`, reproducible from `seed`.
template <int D>
ScalarField<D> random_bumps(std::uint64_t seed, const Box<D>& domain) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double extent = std::numeric_limits<double>::infinity();
  for (int i = 0; i < D; ++i) extent = std::min(extent, domain.hi[i] - domain.lo[i]);
  std::vector<BumpSpec<D>> bumps(count(rng));
  for (auto& b : bumps) {
    b.radius = extent * (0.15 + 0.3 * unit(rng));
    for (int i = 0; i < D; ++i)
      b.center[i] = domain.lo[i] + b.radius + (domain.hi[i] - domain.lo[i] - 2.0 * b.radius) * unit(rng);
    b.amplitude = (unit(rng) < 0.25 ? -1.0 : 1.0) * (0.3 + 1.2 * unit(rng));
  }
  return bump_sum<D>(bumps).with_name("random_bumps#" + std::to_string(seed));
}

}  // namespace nonlocal_rate::fields
