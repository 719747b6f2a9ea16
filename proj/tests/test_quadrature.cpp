#include <gtest/gtest.h>

#include <cmath>

#include "kp/quadrature.hpp"

using namespace kp;
using namespace kp::quad;

TEST(Integrate1d, ConstantIsExact) {
    const auto r = integrate_1d([](double) { return 1.0; }, 0.0, 1.0);
    EXPECT_EQ(r.value, 1.0);
    EXPECT_TRUE(r.converged);
}

TEST(Integrate1d, InverseSqrtWithSqrtSubstitution) {
    QuadratureSpec spec;
    spec = spec.with(Substitution::sqrt, Endpoint::left);
    const auto r = integrate_1d([](double x) { return 1 / std::sqrt(x); }, 0.0, 1.0, spec);
    EXPECT_NEAR(r.value, 2.0, 1e-10);
    EXPECT_TRUE(r.converged);
}

TEST(Integrate1d, SubstitutionBattery) {
    const QuadratureSpec base;
    // x^{-2/3} on [0,1] needs gamma >= 3.
    auto r1 = integrate_1d([](double x) { return std::pow(x, -2.0 / 3.0); }, 0.0, 1.0,
                           base.with(Substitution::power, Endpoint::left, 3));
    EXPECT_NEAR(r1.value, 3.0, 1e-9);
    EXPECT_LE(std::abs(r1.value - 3.0), r1.error + 1e-12);
    // (1-x)^{-1/2} singular at the right end.
    auto r2 = integrate_1d([](double x) { return 1 / std::sqrt(1 - x); }, 0.0, 1.0,
                           base.with(Substitution::sqrt, Endpoint::right));
    EXPECT_NEAR(r2.value, 2.0, 1e-10);
    // Both ends: Beta(1/2,1/2) = pi.
    auto r3 = integrate_1d([](double x) { return 1 / std::sqrt(x * (1 - x)); }, 0.0, 1.0,
                           base.with(Substitution::sqrt, Endpoint::both));
    EXPECT_NEAR(r3.value, pi, 1e-9);
    // Singular left end on an unbounded range: int_0^inf x^{-1/2} e^{-x} = sqrt(pi).
    auto r4 = integrate_1d([](double x) { return std::exp(-x) / std::sqrt(x); }, 0.0, inf,
                           base.with(Substitution::sqrt, Endpoint::left));
    EXPECT_NEAR(r4.value, std::sqrt(pi), 1e-9);
}

TEST(Integrate1d, UnboundedRanges) {
    auto g = [](double x) { return std::exp(-x * x); };
    EXPECT_NEAR(integrate_1d(g, -inf, inf).value, std::sqrt(pi), 1e-10);
    EXPECT_NEAR(integrate_1d(g, -inf, 0.0).value, std::sqrt(pi) / 2, 1e-10);
    // Cauchy tails decay slowly; the map handles them without truncation.
    auto c = [](double x) { return 1 / (pi * (1 + x * x)); };
    EXPECT_NEAR(integrate_1d(c, -inf, inf).value, 1.0, 1e-9);
}

TEST(Integrate1d, TruncationFallback) {
    QuadratureSpec spec;
    spec.truncation_radius = 40;
    auto g = [](double x) { return std::exp(-x * x); };
    EXPECT_NEAR(integrate_1d(g, -inf, inf, spec).value, std::sqrt(pi), 1e-10);
}

TEST(Integrate1d, ReversedLimitsFlipSign) {
    auto f = [](double x) { return x * x; };
    EXPECT_NEAR(integrate_1d(f, 1.0, 0.0).value, -1.0 / 3.0, 1e-14);
}

TEST(Integrate1d, BudgetExhaustionIsFlagged) {
    QuadratureSpec spec;
    spec.max_subdivisions = 2;
    const auto r = integrate_1d([](double x) { return std::sin(400 * x); }, 0.0, 3.0, spec);
    EXPECT_FALSE(r.converged);
}

TEST(Integrate1d, ScaleAwareBreakpointsResolveNarrowPeak) {
    // A peak of width 1e-4 is invisible to a single panel on [-5, 5]; cutting
    // at the peak and one scale-length beyond exposes it.
    auto f = [](double x) { return std::exp(-(x - 0.3) * (x - 0.3) / 2e-8); };
    const double exact = std::sqrt(2 * pi * 1e-8);
    const auto r = integrate_1d(f, {-5.0, 0.3 - 1e-3, 0.3, 0.3 + 1e-3, 5.0});
    EXPECT_NEAR(r.value / exact, 1.0, 1e-9);
}

TEST(Integrate1d, NestedErrorsPropagate) {
    // int_0^1 int_0^1 (x + y) dy dx = 1, inner returns an Estimate.
    auto outer = [](double x) {
        return integrate_1d([x](double y) { return x + y; }, 0.0, 1.0);
    };
    const auto r = integrate_1d(outer, 0.0, 1.0);
    EXPECT_NEAR(r.value, 1.0, 1e-14);
    EXPECT_GE(r.error, 0.0);
}

TEST(Integrate1d, VectorValued) {
    auto f = [](double x, std::span<double> out) {
        out[0] = 1;
        out[1] = x;
        out[2] = std::cos(x);
    };
    const auto r = integrate_1d_vec(f, {0.0, pi / 2}, 3);
    EXPECT_NEAR(r.value[0], pi / 2, 1e-13);
    EXPECT_NEAR(r.value[1], pi * pi / 8, 1e-13);
    EXPECT_NEAR(r.value[2], 1.0, 1e-13);
}

TEST(Integrate1d, Linearity) {
    auto f = [](double x) { return std::exp(x); };
    auto g = [](double x) { return 1 / (1 + x * x); };
    const double a = 2.5, b = -0.75;
    const auto rf = integrate_1d(f, 0.0, 2.0);
    const auto rg = integrate_1d(g, 0.0, 2.0);
    const auto rh = integrate_1d([&](double x) { return a * f(x) + b * g(x); }, 0.0, 2.0);
    EXPECT_NEAR(rh.value, a * rf.value + b * rg.value,
                std::abs(a) * rf.error + std::abs(b) * rg.error + rh.error + 1e-14);
}

TEST(Integrate1d, Deterministic) {
    auto f = [](double x) { return std::log1p(x) * std::sin(3 * x); };
    const auto r1 = integrate_1d(f, 0.0, 7.0);
    const auto r2 = integrate_1d(f, 0.0, 7.0);
    EXPECT_EQ(r1.value, r2.value);
    EXPECT_EQ(r1.error, r2.error);
}

TEST(Integrate1d, RejectsBadSpec) {
    QuadratureSpec spec;
    spec.rel_tol = 0;
    EXPECT_THROW(integrate_1d([](double) { return 1.0; }, 0.0, 1.0, spec), input_error);
}

TEST(IntegrateNd, GaussianProductNormalizes) {
    auto f = [](std::span<const double> p) {
        return std::exp(-0.5 * (p[0] * p[0] + p[1] * p[1])) / (2 * pi);
    };
    QuadratureSpec spec;
    spec.rel_tol = 1e-9;
    const auto r = integrate_nd(f, Box{{-inf, -inf}, {inf, inf}}, spec);
    EXPECT_NEAR(r.value, 1.0, 1e-6);
}

TEST(IntegrateNd, EmptyBoxIsZero) {
    auto f = [](std::span<const double>) { return 1.0; };
    const auto r = integrate_nd(f, Box{{0.0, 1.0}, {2.0, 1.0}});
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.error, 0.0);
}

TEST(IntegrateNd, PerAxisSubstitution) {
    // int_0^1 int_0^1 x^{-1/2} y dy dx = 1.
    auto f = [](std::span<const double> p) { return p[1] / std::sqrt(p[0]); };
    QuadratureSpec plain;
    const auto r = integrate_nd(f, Box{{0.0, 0.0}, {1.0, 1.0}}, plain,
                                {plain.with(Substitution::sqrt, Endpoint::left), plain});
    EXPECT_NEAR(r.value, 1.0, 1e-10);
}

TEST(IntegrateNd, RejectsHighDimension) {
    auto f = [](std::span<const double>) { return 1.0; };
    Box b{std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)};
    EXPECT_THROW(integrate_nd(f, b), input_error);
}

TEST(MonteCarlo, ExactRatioHasZeroVariance) {
    GaussianSampler s{{0.0, 0.0}, 1.5};
    auto f = [&](std::span<const double> x) { return 3.0 * s.density(x); };
    const auto r = mc_integrate(f, s, MCSpec{1000, 1});
    EXPECT_NEAR(r.value, 3.0, 1e-12);
    EXPECT_NEAR(r.std_error, 0.0, 1e-12);
}

TEST(MonteCarlo, GaussianNormalizationInThreeDimensions) {
    GaussianSampler s{{0.0, 0.0, 0.0}, 1.3};
    auto f = [](std::span<const double> x) {
        const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        return std::pow(2 * pi, -1.5) * std::exp(-r2 / 2);
    };
    const auto r = mc_integrate(f, s, MCSpec{100000, 7});
    EXPECT_GT(r.std_error, 0.0);
    EXPECT_NEAR(r.value, 1.0, 3 * r.std_error);
}

TEST(MonteCarlo, AgreesWithTensorQuadrature) {
    auto f = [](std::span<const double> x) {
        return std::exp(-x[0] * x[0] - 0.5 * x[1] * x[1]) * (1 + 0.3 * std::sin(x[0] + x[1]));
    };
    const auto tensor = integrate_nd(f, Box{{-inf, -inf}, {inf, inf}});
    GaussianSampler s{{0.0, 0.0}, 1.2};
    const auto mc = mc_integrate(f, s, MCSpec{200000, 11});
    EXPECT_NEAR(mc.value, tensor.value, 4 * mc.std_error + tensor.error);
}

TEST(MonteCarlo, SameSeedSameBits) {
    GaussianSampler s{{0.0}, 1.0};
    auto f = [](std::span<const double> x) { return std::cos(x[0]); };
    const auto a = mc_integrate(f, s, MCSpec{50000, 42});
    const auto b = mc_integrate(f, s, MCSpec{50000, 42});
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(MonteCarlo, UnderflowingProposalIsAnError) {
    struct Dead {
        std::size_t dim() const { return 1; }
        void draw(CounterRng&, std::span<double> out) const { out[0] = 0; }
        double density(std::span<const double>) const { return 0; }
    };
    EXPECT_THROW(mc_integrate([](std::span<const double>) { return 1.0; }, Dead{}, MCSpec{100, 0}),
                 convergence_error);
}
