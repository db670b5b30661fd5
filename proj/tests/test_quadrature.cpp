#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "nonlocal_rate/quadrature.hpp"

using namespace nonlocal_rate;

TEST(GaussLegendre, IntegratesPolynomialsUpToDegree2nMinus1) {
  for (int n : {1, 4, 16, 32}) {
    const GaussRule& g = gauss_legendre(n);
    ASSERT_EQ(g.nodes.size(), static_cast<std::size_t>(n));
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g.weights[i] * std::pow(g.nodes[i], p);
      const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
      EXPECT_NEAR(s, exact, 1e-14) << "n=" << n << " p=" << p;
    }
  }
}

TEST(GaussLegendre, RejectsNonPositiveOrder) { EXPECT_THROW(gauss_legendre(0), std::invalid_argument); }

TEST(CompositeGauss, ExponentialOnBrokenInterval) {
  const std::vector<double> breaks{0.0, 0.3, 1.0};
  const Rule1D r = composite_gauss(breaks, 3, 8);
  EXPECT_NEAR(r.integrate([](double x) { return std::exp(x); }), std::numbers::e - 1.0, 1e-14);
}

TEST(ClipBreakpoints, KeepsInteriorPointsSortedAndUnique) {
  const std::vector<double> extra{2.0, 0.5, -1.0, 0.5, 0.25};
  const auto b = clip_breakpoints(0.0, 1.0, extra);
  EXPECT_EQ(b, (std::vector<double>{0.0, 0.25, 0.5, 1.0}));
}

TEST(AdaptiveGauss, SquareRootSingularity) {
  const double v = adaptive_gauss([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-12);
  EXPECT_NEAR(v, 2.0 / 3.0, 1e-11);
}

TEST(AdaptiveGauss, ThrowsWhenItCannotConverge) {
  EXPECT_THROW(adaptive_gauss([](double x) { return x > 0.3 ? 1.0 / (x - 0.3) : 0.0; }, 0.0, 1.0, 1e-12, 8),
               QuadratureError);
}

TEST(SphereRule, WeightsSumToSphereArea) {
  EXPECT_DOUBLE_EQ(sphere_area(1), 2.0);
  EXPECT_NEAR(sphere_area(2), 2.0 * std::numbers::pi, 1e-14);
  EXPECT_NEAR(sphere_area(3), 4.0 * std::numbers::pi, 1e-14);
  auto total = [](const auto& r) {
    double s = 0.0;
    for (double w : r.weights) s += w;
    return s;
  };
  EXPECT_NEAR(total(sphere_rule<1>(4)), 2.0, 1e-14);
  EXPECT_NEAR(total(sphere_rule<2>(16)), 2.0 * std::numbers::pi, 1e-13);
  EXPECT_NEAR(total(sphere_rule<3>(8)), 4.0 * std::numbers::pi, 1e-13);
}

TEST(SphereRule, SecondMomentsOfDirections) {
  // int_{S^{d-1}} e_0^2 = |S^{d-1}| / d.
  const auto r2 = sphere_rule<2>(16);
  const auto r3 = sphere_rule<3>(8);
  double s2 = 0.0, s3 = 0.0, s3q = 0.0;
  for (std::size_t i = 0; i < r2.weights.size(); ++i) s2 += r2.weights[i] * r2.directions[i][0] * r2.directions[i][0];
  for (std::size_t i = 0; i < r3.weights.size(); ++i) {
    const auto& e = r3.directions[i];
    s3 += r3.weights[i] * e[2] * e[2];
    s3q += r3.weights[i] * e[0] * e[0] * e[1] * e[1];
    EXPECT_NEAR(norm<3>(e), 1.0, 1e-14);
  }
  EXPECT_NEAR(s2, std::numbers::pi, 1e-13);
  EXPECT_NEAR(s3, 4.0 * std::numbers::pi / 3.0, 1e-13);
  EXPECT_NEAR(s3q, 4.0 * std::numbers::pi / 15.0, 1e-13);
}

TEST(RadialRule, HasNoNodeAtOriginAndHandlesLogSingularity) {
  const std::vector<double> breaks{0.5};
  const Rule1D r = radial_rule(1.0, breaks, 16, 1, 8);
  for (double x : r.nodes) EXPECT_GT(x, 0.0);
  EXPECT_NEAR(r.integrate([](double x) { return x; }), 0.5, 1e-14);
  EXPECT_NEAR(r.integrate([](double x) { return std::log(x); }), -1.0, 1e-7);
}

TEST(Summation, CompensatedAndPairwiseRecoverCancellation) {
  CompensatedSum s;
  s += 1e16;
  s += 1.0;
  s += -1e16;
  EXPECT_EQ(s.value(), 1.0);
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
}

TEST(Parallel, MapIsIndependentOfWorkerCount) {
  auto task = [](std::size_t i) { return std::sin(static_cast<double>(i)) / (1.0 + i); };
  const auto a = parallel_map(257, 1, task);
  const auto b = parallel_map(257, 4, task);
  EXPECT_EQ(a, b);
}

TEST(Parallel, ExceptionsPropagate) {
  auto task = [](std::size_t i) -> double {
    if (i == 5) throw std::runtime_error("boom");
    return 0.0;
  };
  EXPECT_THROW(parallel_map(10, 3, task), std::runtime_error);
}

TEST(Parallel, EnvironmentVariableIsTheFallback) {
  ::setenv("NONLOCAL_RATE_THREADS", "3", 1);
  EXPECT_EQ(resolve_threads(0), 3);
  EXPECT_EQ(resolve_threads(2), 2);
  ::unsetenv("NONLOCAL_RATE_THREADS");
  EXPECT_EQ(resolve_threads(0), 1);
}

TEST(MonteCarlo, StratifiedEstimateIsReproducibleAcrossThreads) {
  // int_0^1 x^2 dx with 16 strata of width 1/16.
  auto sample = [](std::mt19937_64& rng, int s) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = (s + u(rng)) / 16.0;
    return x * x / 16.0;
  };
  const McEstimate a = stratified_mc(20000, 16, 42, 1, sample);
  const McEstimate b = stratified_mc(20000, 16, 42, 4, sample);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NEAR(a.mean, 1.0 / 3.0, 5.0 * a.std_error);
  const McEstimate c = stratified_mc(20000, 16, 43, 1, sample);
  EXPECT_NE(a.mean, c.mean);
}

TEST(Box, LineIntersection) {
  const Box<2> b{{0.0, 0.0}, {1.0, 2.0}};
  const auto [t0, t1] = b.line_intersection({0.5, -1.0}, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(t0, 1.0);
  EXPECT_DOUBLE_EQ(t1, 3.0);
  const auto miss = b.line_intersection({2.0, 0.0}, {0.0, 1.0});
  EXPECT_GT(miss.first, miss.second);
  EXPECT_NEAR(b.half_diagonal(), std::sqrt(5.0) / 2.0, 1e-15);
}
