#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/fields.hpp"
#include "nonlocal_rate/oracles.hpp"

using namespace nonlocal_rate;

namespace {

const double kPi = std::numbers::pi;

Field1D bump() { return fields::smooth_bump<1>({0.5}, 0.5); }
Field1D zero() { return fields::zero<1>(Box<1>{{0.0}, {1.0}}); }

const char* kNames[] = {"quadratic", "cosh", "quartic"};

}  // namespace

TEST(EnergyEh, ZeroField) {
  for (const char* name : kNames) {
    EXPECT_EQ(energy_E_h(zero(), builtin_integrand(name), 0.1).value, 0.0);
    EXPECT_EQ(energy_E_0(zero(), builtin_integrand(name)).value, 0.0);
  }
}

TEST(EnergyEh, RejectsNonPositiveH) {
  const auto fi = builtin_integrand("quadratic");
  EXPECT_THROW(energy_E_h(bump(), fi, 0.0), std::invalid_argument);
  EXPECT_THROW(energy_E_h(bump(), fi, -0.2), std::invalid_argument);
  EXPECT_THROW(lower_bound_Jh(bump(), 2.0, 0.0), std::invalid_argument);
}

TEST(EnergyEh, MatchesSpectralOracleForSine) {
  const auto u = fields::sin_bump();
  const auto fi = builtin_integrand("quadratic");
  const double main = energy_E_h(u, fi, 0.1).value;
  const double spectral = oracles::spectral_E_h_quadratic(u, fi, 0.1);
  EXPECT_NEAR(main, spectral, 1e-6 * spectral);
}

TEST(EnergyEh, CoshBumpErrorsDecrease) {
  const auto u = bump();
  const auto fi = builtin_integrand("cosh");
  const double e0 = energy_E_0(u, fi).value;
  EXPECT_NEAR(e0, oracles::bruteforce_E_0(u, fi), 1e-9 * e0);
  double prev = INFINITY;
  for (double h : {0.2, 0.1, 0.05}) {
    const double eh = energy_E_h(u, fi, h).value;
    EXPECT_NEAR(eh, oracles::bruteforce_E_h(u, fi, h), 1e-7 * eh) << h;
    const double err = std::abs(eh - e0);
    EXPECT_LT(err, prev) << h;
    prev = err;
  }
}

TEST(EnergyEh, GridFieldWithKinks) {
  const auto u = sample_to_grid(fields::sin_bump(), 41);
  const auto fi = builtin_integrand("quartic");
  for (double h : {0.1, 0.0337}) {
    const double eh = energy_E_h(u, fi, h).value;
    EXPECT_NEAR(eh, oracles::bruteforce_E_h(u, fi, h), 1e-7 * eh) << h;
  }
}

TEST(EnergyEh, NonnegativeAcrossInputs) {
  for (const char* name : kNames) {
    const auto fi = builtin_integrand(name);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto u = fields::random_bumps<1>(seed, Box<1>{{-1.0}, {1.0}});
      for (double h : {0.3, 0.05}) EXPECT_GE(energy_E_h(u, fi, h).value, -1e-12) << name << seed << ' ' << h;
    }
  }
}

TEST(EnergyEh, ScaledEnergyVanishes) {
  const auto u = bump();
  const auto fi = builtin_integrand("quadratic");
  const double coarse = 0.2 * energy_E_h(u, fi, 0.2).value;
  const double fine = 0.0125 * energy_E_h(u, fi, 0.0125).value;
  EXPECT_LT(fine, 0.1 * coarse);
}

TEST(EnergyE0, SineClosedForm) {
  const auto u = fields::sin_bump();
  const auto fi = builtin_integrand("quadratic");
  EXPECT_NEAR(energy_E_0(u, fi).value, kPi * kPi / 24.0, 1e-8 * kPi * kPi / 24.0);
}

TEST(EnergyE0, QuadraticIsATwelfthOfDirichletEnergy) {
  const auto fi = builtin_integrand("quadratic");
  const auto u = fields::random_bumps<1>(11, Box<1>{{-1.0}, {1.0}});
  EXPECT_NEAR(energy_E_0(u, fi).value, upper_bound_check(u, fi) / 12.0, 1e-12);
}

TEST(EnergyE0, BumpAgainstOracle) {
  const auto fi = builtin_integrand("quadratic");
  const double e0 = energy_E_0(bump(), fi).value;
  const double oracle = oracles::bruteforce_E_0(bump(), fi);
  EXPECT_NEAR(e0, oracle, 1e-9 * oracle);
  EXPECT_NEAR(e0, 0.504410294883055, 1e-8 * 0.504410294883055);
}

TEST(LowerBoundJh, TentSlopeDensity) {
  // A tent of slope s on [0, 2l]: every unit of length away from the three
  // kinks contributes (gamma/4) s^2 / 6, so the l-dependence isolates it.
  const double s = 1.3, gamma = 2.0, h = 0.05;
  auto tent = [s](double l) { return fields::hat<1>({l}, l, s * l); };
  const double v1 = lower_bound_Jh(tent(0.5), gamma, h);
  const double v2 = lower_bound_Jh(tent(0.8), gamma, h);
  EXPECT_NEAR((v2 - v1) / (2.0 * 0.3), gamma / 4.0 * s * s / 6.0, 1e-9);
  EXPECT_EQ(lower_bound_Jh(zero(), gamma, h), 0.0);
}

TEST(LowerBoundJh, BelowEnergyForBump) {
  for (const char* name : kNames) {
    const auto fi = builtin_integrand(name);
    const double eh = energy_E_h(bump(), fi, 0.1).value;
    EXPECT_LE(lower_bound_Jh(bump(), fi.gamma, 0.1), eh + 1e-8) << name;
  }
}

TEST(DualLowerBound, TrivialCases) {
  const auto fi = builtin_integrand("cosh");
  const DualTestFunction none{"zero", [](double, double) { return 0.0; }, Box<2>{{-1.0, -1.0}, {2.0, 2.0}}};
  EXPECT_EQ(dual_lower_bound(bump(), fi, 0.1, none), 0.0);
  const DualTestFunction one{"one", [](double, double) { return 1.0; }, Box<2>{{0.0, 0.0}, {1.0, 1.0}}};
  const double v = dual_lower_bound(zero(), fi, 0.1, one);
  EXPECT_LT(v, 0.0);
  // u = 0 gives -(1/h) int int 1 / (4 lambda) with lambda = f''(0)/2 = 1/2 over
  // {x, y in [0, 1], x <= y <= x + h}, of area h - h^2/2.
  EXPECT_NEAR(v, -0.5 * (1.0 - 0.1 / 2.0), 1e-10);
}

TEST(DualLowerBound, BundledFunctionsStayBelowEnergy) {
  for (const char* name : kNames) {
    const auto fi = builtin_integrand(name);
    for (double h : {0.2, 0.1}) {
      const double eh = energy_E_h(bump(), fi, h).value;
      const auto phis = bundled_test_functions(bump(), fi, h);
      ASSERT_EQ(phis.size(), 5u);
      for (const auto& phi : phis) EXPECT_LE(dual_lower_bound(bump(), fi, h, phi), eh + 1e-8) << name << ' ' << phi.name;
    }
  }
}

TEST(DualLowerBound, NearOptimalChoiceIsTight) {
  // For quadratic f the pointwise maximizer of the dual integrand recovers E_h
  // up to the window, which is 1 on the region where the integrand lives.
  const auto fi = builtin_integrand("quadratic");
  const auto u = bump();
  const double h = 0.1;
  const double eh = energy_E_h(u, fi, h).value;
  const auto phis = bundled_test_functions(u, fi, h);
  const double v = dual_lower_bound(u, fi, h, phis.back());
  EXPECT_GT(v, 0.5 * eh);
}

TEST(UpperBound, SineAndZero) {
  const auto fi = builtin_integrand("quadratic");
  EXPECT_NEAR(upper_bound_check(fields::sin_bump(), fi), kPi * kPi / 2.0, 1e-10);
  EXPECT_EQ(upper_bound_check(zero(), fi), 0.0);
  EXPECT_THROW(upper_bound_check(bump(), builtin_integrand("cosh")), std::invalid_argument);
}

TEST(UpperBound, HoldsAcrossH) {
  const auto fi = builtin_integrand("quadratic");
  const double bound = upper_bound_check(bump(), fi);
  for (double h : {1.0, 0.1, 0.01}) EXPECT_LE(energy_E_h(bump(), fi, h).value, bound + 1e-8) << h;
}

TEST(PointwiseError, BumpConvergesAtFirstOrderOrBetter) {
  const auto t = pointwise_error(bump(), builtin_integrand("quadratic"), {0.2, 0.1, 0.05, 0.025, 0.0125});
  ASSERT_EQ(t.rows.size(), 5u);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].abs_error, t.rows[i - 1].abs_error);
  EXPECT_GE(t.order, 1.0);
}

TEST(PointwiseError, ZeroFieldAndEmptyList) {
  const auto t = pointwise_error(zero(), builtin_integrand("quadratic"), {0.2, 0.1});
  for (const auto& r : t.rows) EXPECT_EQ(r.abs_error, 0.0);
  EXPECT_THROW(pointwise_error(bump(), builtin_integrand("quadratic"), {}), std::invalid_argument);
}
