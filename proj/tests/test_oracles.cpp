#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/fields.hpp"
#include "nonlocal_rate/oracles.hpp"

using namespace nonlocal_rate;

namespace {
const double kPi = std::numbers::pi;
}

TEST(OracleReport, DiscrepanciesFollowTheValues) {
  const oracles::OracleReport r("x", 2.0, 2.5, {{"n", 10}});
  EXPECT_DOUBLE_EQ(r.abs_discrepancy(), 0.5);
  EXPECT_DOUBLE_EQ(r.rel_discrepancy(), 0.25);
  const auto j = r.to_json();
  EXPECT_EQ(j["oracle"], "x");
  EXPECT_DOUBLE_EQ(j["rel_discrepancy"].get<double>(), 0.25);
  EXPECT_EQ(j["resolution"]["n"], 10);
  EXPECT_DOUBLE_EQ(oracles::OracleReport("z", 0.0, 1e-3).rel_discrepancy(), 1e-3);
}

TEST(Spectral, ValidatedAgainstBruteForce) {
  // The Fourier identity is checked against direct trapezoid sums before use.
  const auto u = fields::sin_bump();
  const auto fi = builtin_integrand("quadratic");
  for (double h : {0.1, 0.037}) {
    const double spectral = oracles::spectral_E_h_quadratic(u, fi, h);
    const double brute = oracles::bruteforce_E_h(u, fi, h);
    EXPECT_NEAR(spectral, brute, 1e-7 * brute) << h;
  }
  const auto bump = fields::smooth_bump<1>({0.3}, 0.6);
  EXPECT_NEAR(oracles::spectral_E_h_quadratic(bump, fi, 0.2), oracles::bruteforce_E_h(bump, fi, 0.2), 1e-7);
}

TEST(Spectral, ZeroFieldAndSmallHLimit) {
  const auto fi = builtin_integrand("quadratic");
  EXPECT_EQ(oracles::spectral_E_h_quadratic(fields::zero<1>(Box<1>{{0.0}, {1.0}}), fi, 0.1), 0.0);
  // (1 - sinc^2(s/2)) / s^2 -> 1/12, so E_h -> ||u'||^2 / 12 for smooth u.
  const auto u = fields::smooth_bump<1>({0.5}, 0.5);
  const double limit = upper_bound_check(u, fi) / 12.0;
  EXPECT_NEAR(oracles::spectral_E_h_quadratic(u, fi, 1e-3), limit, 1e-5 * limit);
}

TEST(Spectral, ArgumentErrors) {
  const auto u = fields::sin_bump();
  EXPECT_THROW(oracles::spectral_E_h_quadratic(u, builtin_integrand("cosh"), 0.1), std::invalid_argument);
  const auto fi = builtin_integrand("quadratic");
  EXPECT_THROW(oracles::spectral_E_h_quadratic(u, fi, 0.0), std::invalid_argument);
  EXPECT_THROW(oracles::spectral_E_h_quadratic(u, fi, 0.1, 1000), std::invalid_argument);
  EXPECT_THROW(oracles::spectral_E_h_quadratic(u, fi, 0.1, 1024, 1), std::invalid_argument);
}

TEST(Spectral, SincSeriesIsContinuous) {
  const double s = 1e-3;
  const double c = std::sin(s) / s;
  EXPECT_NEAR(oracles::detail::one_minus_sinc2(s * (1 - 1e-9)), 1.0 - c * c, 1e-15);
  EXPECT_NEAR(oracles::detail::one_minus_sinc2(1e-6) / 1e-12, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(oracles::detail::one_minus_sinc2(0.0), 0.0);
}

TEST(BruteForce, ClosedFormReferences) {
  const auto fi = builtin_integrand("quadratic");
  EXPECT_NEAR(oracles::bruteforce_quadrature(oracles::CurvatureWeight{fi, 0.3, -2.0}, 1000), 1.0, 1e-12);
  EXPECT_NEAR(oracles::bruteforce_quadrature(oracles::LimitIntegral{fields::sin_bump(), fi}, 400000), kPi * kPi / 24.0,
              1e-9);
  EXPECT_NEAR(oracles::bruteforce_quadrature(oracles::EffectiveKernelMoment<1>{ball_kernel<1>(), 0}, 4000), 1.0, 1e-6);
}

TEST(BruteForce, MovingAverageOfSine) {
  // Closed form: (cos(pi x) - cos(pi (x + h))) / (pi h).
  const auto u = fields::sin_bump();
  const double x = 0.45, h = 0.1;
  const double exact = (std::cos(kPi * x) - std::cos(kPi * (x + h))) / (kPi * h);
  EXPECT_NEAR(oracles::bruteforce_moving_average(u, h, x), exact, 1e-10);
  EXPECT_NEAR(oracles::bruteforce_quadrature(oracles::MovingAverage{u, h, x}, 100000), exact, 1e-10);
}

TEST(BruteForce, ResourceLimit) {
  const auto u = fields::sin_bump();
  const auto fi = builtin_integrand("quadratic");
  EXPECT_THROW(oracles::bruteforce_E_h(u, fi, 0.1, std::size_t{1} << 30), oracles::ResourceLimit);
  EXPECT_THROW(oracles::bruteforce_effective_moment<2>(ball_kernel<2>(), 0, 1 << 15), oracles::ResourceLimit);
}

TEST(BruteForce, EffectiveMomentNeedsRadialKernel) {
  EXPECT_THROW(oracles::bruteforce_effective_moment<2>(odd_perturbation(ball_kernel<2>(), 0.0), 0, 100),
               std::invalid_argument);
}

TEST(MonteCarlo, ReproducibleFromSeed) {
  const auto u = fields::smooth_bump<2>({0.0, 0.0}, 1.0);
  const auto fi = builtin_integrand("quadratic");
  const auto K = ball_kernel<2>();
  const auto a = oracles::monte_carlo_F_h<2>(u, fi, K, 0.2, 20000, 9);
  const auto b = oracles::monte_carlo_F_h<2>(u, fi, K, 0.2, 20000, 9);
  const auto c = oracles::monte_carlo_F_h<2>(u, fi, K, 0.2, 20000, 10);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_NE(a.mean, c.mean);
  EXPECT_GT(a.std_error, 0.0);
  EXPECT_THROW(oracles::monte_carlo_limit_functional<2>(u, fi, K, 1, 9), std::invalid_argument);
}
