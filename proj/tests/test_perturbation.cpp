#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "kp/perturbation.hpp"

using namespace kp;

namespace {

SeriesOptions alt_options() {
    SeriesOptions o;
    o.semantics = AtomSemantics::alternative;
    return o;
}

PerturbingMeasure three_atoms(double eta) {
    return PerturbingMeasure(Density::none(), {{0.2, eta}, {0.5, eta}, {0.8, eta}});
}

std::vector<SeriesTarget> line_targets(double s, double a, double b, int n) {
    std::vector<SeriesTarget> out;
    for (int i = 0; i < n; ++i) out.push_back({s, a + (b - a) * i / (n - 1)});
    return out;
}

}  // namespace

TEST(Measure, RestrictionExamples) {
    const PerturbingMeasure mu(Density::constant(2), {{1.0, 0.5}});
    EXPECT_EQ(restrict_measure(mu, Interval::all()), mu);
    EXPECT_TRUE(restrict_measure(mu, Interval::empty_set()).is_zero());
    EXPECT_TRUE(restrict_measure(mu, Interval::left_closed(0, 1)).atoms().empty());
    EXPECT_EQ(restrict_measure(mu, Interval::closed(0, 1)).atoms().size(), 1u);
    const auto once = restrict_measure(mu, Interval::open(0.2, 3));
    EXPECT_EQ(restrict_measure(once, Interval::open(0.2, 3)), once);
    EXPECT_EQ(once.q(0.1, 0.0), 0.0);
    EXPECT_EQ(once.q(0.5, 0.0), 2.0);
}

TEST(Measure, Validation) {
    EXPECT_THROW(PerturbingMeasure(Density::none(), {{0.0, 0.0}}), input_error);
    EXPECT_THROW(PerturbingMeasure(Density::none(), {{0.5, 1.0}, {0.5, 1.0}}), input_error);
    EXPECT_THROW(PerturbingMeasure(Density::none(), {{0.5, 1.0}, {0.2, 1.0}}), input_error);
    EXPECT_THROW(PerturbingMeasure(Density::q0(1, 0.6), {}), input_error);
    EXPECT_THROW(PerturbingMeasure(Density::constant(-1), {}), input_error);
}

TEST(PnTerm, ZeroMeasure) {
    GaussianKernel g;
    for (std::size_t n = 1; n <= 3; ++n) EXPECT_EQ(pn_term(g, PerturbingMeasure::zero(), n, 0, 0.1, 1, 0.3), 0.0);
    EXPECT_EQ(pn_term(g, PerturbingMeasure::zero(), 0, 0, 0.1, 1, 0.3), g(0, 0.1, 1, 0.3));
}

TEST(PnTerm, AtomlessFactorial) {
    GaussianKernel g;
    const double p = g(0, 0.1, 1, 0.2);
    const auto terms = pn_terms_batch(g, PerturbingMeasure::lebesgue(), 4, 1, 0.2, {{0, 0.1}});
    double fact = 1;
    for (std::size_t n = 0; n <= 4; ++n) {
        if (n > 0) fact *= double(n);
        EXPECT_NEAR(terms[0][n] / p, 1 / fact, 1e-8) << "n=" << n;
    }
    EXPECT_NEAR(pn_term(g, PerturbingMeasure::lebesgue(), 2, 0, 0.1, 1, 0.2), p / 2, 1e-8 * p);
}

TEST(PnTerm, SingleDirac) {
    GaussianKernel g;
    const auto mu = PerturbingMeasure::dirac(0.4, 0.7);
    const double p = g(0, 0.1, 1, 0.3);
    const auto terms = pn_terms_batch(g, mu, 3, 1, 0.3, {{0, 0.1}});
    EXPECT_NEAR(terms[0][1], 0.7 * p, 1e-9 * p);
    EXPECT_EQ(terms[0][2], 0.0);
    EXPECT_EQ(terms[0][3], 0.0);
    EXPECT_EQ(pn_term(g, mu, 1, 0.4, 0.1, 1, 0.3), 0.0);
    EXPECT_EQ(pn_term(g, mu, 1, 0.5, 0.1, 1, 0.3), 0.0);
    EXPECT_EQ(pn_term(g, PerturbingMeasure::dirac(1.0, 0.7), 1, 0, 0.1, 1, 0.3), 0.0);
}

TEST(PnTerm, CausalityAndPositivity) {
    GaussianKernel g;
    const PerturbingMeasure mu(Density::constant(0.5), {{0.3, 0.4}});
    std::vector<SeriesTarget> targets;
    for (double s : {-0.5, 0.0, 0.3, 0.7, 1.0, 1.5})
        for (double x : {-1.0, 0.0, 2.0}) targets.push_back({s, x});
    const auto terms = pn_terms_batch(g, mu, 3, 1, 0.2, targets);
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (double v : terms[i]) {
            EXPECT_GE(v, 0.0);
            if (targets[i].s >= 1) {
                EXPECT_EQ(v, 0.0);
            }
        }
}

TEST(PnTerm, MeasureMonotonicity) {
    GaussianKernel g;
    const PerturbingMeasure small(Density::constant(0.5), {{0.5, 0.2}});
    const PerturbingMeasure big(Density::constant(1.0), {{0.3, 0.1}, {0.5, 0.4}});
    const auto targets = line_targets(0, -1, 1, 5);
    const auto a = pn_terms_batch(g, small, 3, 1, 0.1, targets);
    const auto b = pn_terms_batch(g, big, 3, 1, 0.1, targets);
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t n = 0; n <= 3; ++n) EXPECT_LE(a[i][n], b[i][n] * (1 + 1e-7));
}

TEST(Series, NonCausalIsZero) {
    GaussianKernel g;
    const auto r = series(g, PerturbingMeasure::lebesgue(), 1, 0, 1, 0);
    EXPECT_EQ(r.value, 0.0);
    for (double v : r.terms) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(series(g, PerturbingMeasure::lebesgue(), 2, 0, 1, 0).value, 0.0);
}

TEST(Series, GaussianAtomlessOracle) {
    GaussianKernel g;
    for (double lambda : {0.25, 1.0}) {
        const auto res = series_batch(g, PerturbingMeasure::lebesgue(lambda), 1, 0.3, line_targets(0, -2, 2, 20));
        for (const auto& r : res) {
            EXPECT_EQ(r.status, SeriesStatus::converged);
            EXPECT_NEAR(r.value / (std::exp(lambda) * r.p), 1.0, 1e-7);
            double sum = 0;
            for (double v : r.terms) {
                EXPECT_GE(v, 0.0);
                sum += v;
            }
            EXPECT_NEAR(sum, r.value, 1e-14 * r.value);
        }
    }
}

TEST(Series, CauchyAtomlessOracle) {
    CauchyKernel c;
    const auto res = series_batch(c, PerturbingMeasure::lebesgue(0.5), 1, 0, line_targets(0.2, -1, 1, 5));
    for (const auto& r : res) EXPECT_NEAR(r.ratio() / std::exp(0.4), 1.0, 1e-6);
}

TEST(Series, DiracOracle) {
    GaussianKernel g;
    const auto mu = PerturbingMeasure::dirac(0.4, 0.7);
    EXPECT_NEAR(series(g, mu, 0, 0.1, 1, 0.3).ratio(), 1.7, 1e-8);
    EXPECT_NEAR(series(g, mu, 0.5, 0.1, 1, 0.3).ratio(), 1.0, 1e-15);
    EXPECT_NEAR(series(g, mu, 0.4, 0.1, 1, 0.3).ratio(), 1.0, 1e-15);
}

TEST(Series, AlternativeMultiAtomOracle) {
    GaussianKernel g;
    const auto mu = three_atoms(0.5);
    const std::vector<double> atoms{0.2, 0.5, 0.8};
    for (double s : {0.0, 0.2, 0.35, 0.5, 0.6, 0.8, 0.9}) {
        long L = 0;
        for (double u : atoms) L += u >= s;
        const auto r = series(g, mu, s, -0.2, 1, 0.4, alt_options());
        EXPECT_NEAR(r.ratio() / multi_atom_series_factor(0.5, L), 1.0, 1e-7) << "s=" << s;
        const auto terms = pn_terms_batch(g, mu, 4, 1, 0.4, {{s, -0.2}}, alt_options());
        for (long n = 0; n <= 4; ++n)
            EXPECT_NEAR(terms[0][std::size_t(n)] / (r.p * std::pow(0.5, double(n))),
                        double(multi_atom_iterate_count(L, n)), 1e-7);
    }
}

TEST(Series, StrictVersusAlternativeSemantics) {
    GaussianKernel g;
    const auto mu = three_atoms(0.5);
    EXPECT_NEAR(series(g, mu, 0, 0, 1, 0).ratio(), 1.5 * 1.5 * 1.5, 1e-7);
    EXPECT_NEAR(series(g, mu, 0, 0, 1, 0, alt_options()).ratio(), 8.0, 1e-6);
}

TEST(Series, RestrictionConsistency) {
    GaussianKernel g;
    const PerturbingMeasure mu(Density::constant(0.8), {{-0.5, 0.3}, {0.5, 0.3}, {1.5, 0.3}});
    const auto a = series(g, mu, 0, 0.2, 1, -0.1);
    const auto b = series(g, restrict_measure(mu, Interval::open(0, 1)), 0, 0.2, 1, -0.1);
    EXPECT_NEAR(a.value / b.value, 1.0, 1e-7);
    EXPECT_NEAR(a.ratio(), std::exp(0.8) * 1.3, 1e-6);
}

TEST(Series, DeterministicAcrossRuns) {
    GaussianKernel g;
    const PerturbingMeasure mu(Density::constant(0.5), {{0.5, 0.3}});
    const auto a = series(g, mu, 0, 0.2, 1, -0.1);
    const auto b = series(g, mu, 0, 0.2, 1, -0.1);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.terms, b.terms);
}

TEST(Series, InvalidTolerance) {
    GaussianKernel g;
    SeriesOptions o;
    o.quad_tol = 0;
    EXPECT_THROW(series(g, PerturbingMeasure::lebesgue(), 0, 0, 1, 0, o), input_error);
}

TEST(AltAtomKernel, ThreeCases) {
    GaussianKernel g;
    const double t = 1, y = 0.3, u0 = 0.5;
    auto f = [&](double s, double x) { return g(s, x, t, y); };
    EXPECT_EQ(alt_atom_kernel_apply(f, 0.7, 0.1, u0, g), 0.0);
    EXPECT_EQ(alt_atom_kernel_apply(f, u0, 0.1, u0, g), f(u0, 0.1));
    for (double x : {-1.0, 0.0, 0.4, 2.0}) {
        const double kf = alt_atom_kernel_apply(f, 0.1, x, u0, g, {y});
        EXPECT_NEAR(kf / f(0.1, x), 1.0, 1e-8);
    }
}

TEST(MultiAtom, IterateCounts) {
    EXPECT_EQ(multi_atom_iterate_count(5, 0), 1u);
    EXPECT_EQ(multi_atom_iterate_count(0, 0), 1u);
    EXPECT_EQ(multi_atom_iterate_count(0, 3), 0u);
    EXPECT_EQ(multi_atom_iterate_count(2, 3), 4u);
    for (long n = 0; n < 10; ++n) EXPECT_EQ(multi_atom_iterate_count(1, n), 1u);
    EXPECT_THROW(multi_atom_iterate_count(-1, 2), input_error);
}

TEST(MultiAtom, CountsMatchEnumeration) {
    const std::vector<double> times{0.1, 0.3, 0.3001, 0.6, 0.9};
    for (double s : {0.0, 0.2, 0.3, 0.5, 0.95}) {
        long L = 0;
        for (double u : times) L += u >= s;
        for (long n = 0; n <= 5; ++n) EXPECT_EQ(count_atom_chains(times, s, n), multi_atom_iterate_count(L, n));
    }
}

TEST(MultiAtom, SeriesFactor) {
    EXPECT_EQ(multi_atom_series_factor(0.3, 0), 1.0);
    EXPECT_NEAR(multi_atom_series_factor(0.5, 3), 8.0, 1e-14);
    EXPECT_NEAR(multi_atom_series_factor(0.5, 1), 2.0, 1e-15);
    for (long L = 0; L <= 4; ++L) {
        double sum = 0;
        for (long n = 0; n < 200; ++n) sum += std::pow(0.5, double(n)) * double(multi_atom_iterate_count(L, n));
        EXPECT_NEAR(sum, multi_atom_series_factor(0.5, L), 1e-10);
    }
    EXPECT_THROW(multi_atom_series_factor(1.0, 2), domain_error);
    EXPECT_THROW(multi_atom_series_factor(1.5, 2), domain_error);
}

TEST(SliceCertify, ZeroMeasureTriviallyValid) {
    GaussianKernel g;
    const std::vector<Interval> I{Interval::left_closed(0.5, 1), Interval::left_closed(0, 0.5)};
    const auto certs = theorem46_certify(g, PerturbingMeasure::zero(), 0, 1, 0, I, 0.0);
    ASSERT_EQ(certs.size(), 2u);
    for (const auto& c : certs) {
        EXPECT_EQ(c.status, CertificateStatus::valid);
        EXPECT_EQ(c.bound, 1.0);
    }
}

TEST(SliceCertify, AtomlessValidWithMargin) {
    GaussianKernel g;
    const double lambda = 0.4, h = 0.25;
    std::vector<Interval> I;
    for (int j = 0; j < 4; ++j) I.push_back(Interval::left_closed(1 - h * (j + 1), 1 - h * j));
    const auto certs = theorem46_certify(g, PerturbingMeasure::lebesgue(lambda), 0, 1, 0, I, lambda * h);
    for (const auto& c : certs) {
        EXPECT_EQ(c.status, CertificateStatus::valid) << c.provenance;
        EXPECT_GT(c.margin, 0.0);
        EXPECT_LE(c.measured_ratio, std::exp(lambda * h * double(c.slice)) * (1 + 1e-7));
    }
}

TEST(SliceCertify, AtomsAttainTheBound) {
    GaussianKernel g;
    const std::vector<Interval> I{Interval::left_closed(2.0 / 3, 1), Interval::left_closed(1.0 / 3, 2.0 / 3),
                                  Interval::left_closed(0, 1.0 / 3)};
    const PerturbingMeasure mu(Density::none(), {{0.3, 0.5}, {0.6, 0.5}, {0.95, 0.5}});
    SliceSampler sampler;
    sampler.xs = {-0.5, 0.0, 0.5};
    sampler.s_per_slice = 3;
    const auto certs = theorem46_certify(g, mu, 0, 1, 0, I, 0.5, alt_options(), sampler);
    for (const auto& c : certs) {
        EXPECT_EQ(c.status, CertificateStatus::valid) << c.provenance;
        EXPECT_NEAR(c.measured_ratio / std::pow(2.0, double(c.slice)), 1.0, 1e-6);
    }
}

TEST(SliceCertify, HypothesisFailure) {
    GaussianKernel g;
    const std::vector<Interval> I{Interval::left_closed(0.5, 1), Interval::left_closed(0, 0.5)};
    const auto certs = theorem46_certify(g, PerturbingMeasure::lebesgue(1), 0, 1, 0, I, 0.1);
    for (const auto& c : certs) EXPECT_EQ(c.status, CertificateStatus::hypothesis_fail);
}

TEST(SliceCertify, AtomsInOneSliceBreakTheBound) {
    GaussianKernel g;
    const std::vector<Interval> I{Interval::left_closed(0.5, 1), Interval::left_closed(0, 0.5)};
    const PerturbingMeasure mu(Density::none(), {{0.6, 0.5}, {0.7, 0.5}, {0.8, 0.5}});
    SliceSampler sampler;
    sampler.xs = {0.0, 0.5};
    sampler.s_per_slice = 2;
    const auto certs = theorem46_certify(g, mu, 0, 1, 0, I, 0.5, alt_options(), sampler);
    ASSERT_EQ(certs.size(), 2u);
    EXPECT_EQ(certs[0].status, CertificateStatus::hypothesis_fail);
    EXPECT_EQ(certs[1].status, CertificateStatus::invalid);
    for (const auto& c : certs) {
        EXPECT_NEAR(c.measured_ratio, 8.0, 8e-6);
        EXPECT_GT(c.measured_ratio, c.bound);
        EXPECT_EQ(judge_slice(c.slice, c.bound, {{c.measured_ratio}}, 1e-7).status, CertificateStatus::invalid);
    }
}

TEST(SliceCertify, InputValidation) {
    GaussianKernel g;
    const auto mu = PerturbingMeasure::zero();
    EXPECT_THROW(theorem46_certify(g, mu, 0, 1, 0, {Interval::left_closed(0, 0.5)}, 0.1), input_error);
    EXPECT_THROW(theorem46_certify(g, mu, 0, 1, 0, {Interval::left_closed(0, 0.5), Interval::left_closed(0.5, 1)}, 0.1),
                 input_error);
    EXPECT_THROW(theorem46_certify(g, mu, 0, 1, 0, {Interval::left_closed(0, 1)}, 1.0), domain_error);
}

TEST(GlobalBound, Constant) {
    EXPECT_NEAR(corollary47_constant(2, 1, 2), 12.0, 1e-12);
    EXPECT_EQ(corollary47_constant(1, 3, 4), 1.0);
    EXPECT_THROW(corollary47_constant(0.5, 1, 2), domain_error);
}

TEST(GlobalBound, AtomlessBoundHolds) {
    GaussianKernel g;
    const double lambda = 0.5;
    const std::vector<Interval> I{Interval::left_closed(0.5, 1), Interval::left_closed(0, 0.5)};
    const double c = std::exp(lambda * 0.5) * 1.01;
    const auto r = corollary47_bound(g, PerturbingMeasure::lebesgue(lambda), 0, 1, 0, I, c, lambda);
    EXPECT_EQ(r.certificate.status, CertificateStatus::valid) << r.certificate.provenance;
    EXPECT_LE(r.certificate.measured_ratio, r.constant);
    EXPECT_NEAR(r.measured_beta, lambda * (1 - 1e-3 * 0.5), 1e-6);
    for (double mc : r.measured_c) EXPECT_LE(mc, c);
}

TEST(Localization, RequiresChapmanKolmogorov) {
    auto base = std::make_shared<GaussianKernel>(1);
    DiracPerturbedKernel pm(base, 0.5, 0.5);
    EXPECT_THROW(localization_check(pm, PerturbingMeasure::lebesgue(0.1), Interval::closed(0.2, 0.4), 0.1, 1, 0),
                 precondition_error);
}

TEST(Localization, AtomlessLeftSamples) {
    GaussianKernel g;
    const auto rep = localization_report(g, PerturbingMeasure::lebesgue(0.5), Interval::closed(0.4, 0.6), 0.1, 1, 0);
    EXPECT_TRUE(rep.holds);
    EXPECT_NEAR(rep.left_sup, 0.1, 1e-6);
    EXPECT_LE(rep.inside_sup, 0.1 + 1e-6);
    EXPECT_GE(rep.samples, 100u);
}

TEST(Radial, PlanarAngleIntegralClosedForm) {
    CauchyKernel c(2);
    for (auto [s, x, u, r] : std::vector<std::array<double, 4>>{{0, 0.3, 0.5, 0.2}, {0, 1, 0.01, 1}, {0.2, 2, 0.3, 0.5}}) {
        const double xs[2] = {x, 0};
        const Estimate e = quad::integrate_1d(
            [&](double a) {
                const double z[2] = {r * std::cos(a), r * std::sin(a)};
                return c.density(s, xs, u, z);
            },
            0.0, pi);
        EXPECT_NEAR(c.planar_angle_integral(s, x, u, r) / e.value, 1.0, 1e-9);
    }
}

TEST(Radial, CauchyLebesgueOracle) {
    CauchyKernel c(2);
    SeriesOptions o;
    o.quad_tol = 1e-7;
    const std::vector<SeriesTarget> tg{{0, 0}, {0, 0.5}, {0.5, 0.3}, {0.9, 1.0}};
    const auto res = series_batch_radial(c, PerturbingMeasure::lebesgue(0.5), 1, tg, o);
    for (std::size_t i = 0; i < tg.size(); ++i)
        EXPECT_NEAR(res[i].ratio() / std::exp(0.5 * (1 - tg[i].s)), 1.0, 1e-6);
}

TEST(Radial, PowerDensityFirstTermMatchesNestedQuadrature) {
    CauchyKernel c(2);
    const PerturbingMeasure mu(Density::power(0.5), {});
    const double s = 0.5, x = 0.3, t = 1;
    const double xs[2] = {x, 0}, o[2] = {0, 0};
    const double p0 = c.density(s, xs, t, o);
    const auto spec = quad::QuadratureSpec{}.tolerances(1e-8, 1e-12);
    auto in_u = [&](double u) {
        auto in_r = [&](double r) {
            auto in_a = [&](double a) {
                const double z[2] = {r * std::cos(a), r * std::sin(a)};
                return c.density(s, xs, u, z) * c.density(u, z, t, o);
            };
            return 2 * std::sqrt(r) * quad::integrate_1d(in_a, 0.0, pi, spec).value;
        };
        return quad::integrate_1d(in_r, {0.0, x, 2 * x, 1.0, inf}, spec.with(quad::Substitution::sqrt, quad::Endpoint::left)).value;
    };
    const double direct =
        quad::integrate_1d(in_u, s, t, spec.with(quad::Substitution::sqrt, quad::Endpoint::both)).value / p0;
    SeriesOptions opt;
    opt.quad_tol = 1e-8;
    const auto r = series_batch_radial(c, mu, t, {{s, x}}, opt);
    EXPECT_NEAR(r[0].terms[1] / r[0].p / direct, 1.0, 1e-5);
}

TEST(Kato, CauchyPlanarPowerDensityCertificates) {
    CauchyKernel c(2);
    const PerturbingMeasure mu(Density::power(0.5), {});
    const double c5 = five_p_constant(c, 20000, 5);
    EXPECT_GE(c5, 1.0);
    std::vector<SeriesTarget> samples;
    for (double dt : {0.005, 0.01, 0.02, 0.03, 0.05})
        for (double x : {0.0, 0.5}) samples.push_back({1 - dt, x});
    SeriesOptions opt;
    opt.quad_tol = 1e-5;
    opt.grid.u_order = opt.grid.z_order = 4;
    opt.grid.max_z_panels = 8;
    const auto cert = kato_certify(c, mu, 1, 0, 1.0 / 64, c5, samples, opt);
    EXPECT_LT(cert.eta, 1.0);
    std::size_t n = 0;
    for (const auto& bc : cert.certificates) {
        EXPECT_EQ(bc.status, CertificateStatus::valid) << bc.slice;
        n += bc.samples;
    }
    EXPECT_EQ(n, 10u);
}

TEST(Slicing, UniformTimeSlices) {
    const auto I = uniform_time_slices(0, 1, 0.25);
    ASSERT_EQ(I.size(), 4u);
    EXPECT_EQ(I[0].lo, 0.75);
    EXPECT_EQ(I[0].hi, 1.0);
    EXPECT_TRUE(I[0].contains(0.75));
    EXPECT_FALSE(I[0].contains(1.0));
    EXPECT_EQ(I[3].lo, 0.0);
    const auto J = uniform_time_slices(0, 1, 0.4);
    ASSERT_EQ(J.size(), 3u);
    EXPECT_NEAR(J[1].lo, 0.2, 1e-15);
    EXPECT_EQ(J[2].lo, 0.0);
    EXPECT_EQ(J[2].hi, J[1].lo);
    EXPECT_THROW(uniform_time_slices(1, 1, 0.1), input_error);
    EXPECT_THROW(uniform_time_slices(0, 1, 0), input_error);
}

TEST(Slicing, DiagonalLevelSlices) {
    const auto S = diagonal_level_slices(1, 0.5, 0.4);
    ASSERT_EQ(S.size(), 4u);
    EXPECT_EQ(S[0].a_hi, inf);
    EXPECT_NEAR(S[0].a_lo, 1.2, 1e-15);
    EXPECT_NEAR(S[2].a_lo, 0.4, 1e-15);
    EXPECT_EQ(S[3].a_lo, -inf);
    EXPECT_NEAR(S[3].a_hi, 0.4, 1e-15);
    EXPECT_EQ(diagonal_level_slices(0.5, 0.5, 1).size(), 2u);
    EXPECT_THROW(diagonal_level_slices(0, 0, 1), input_error);
}

TEST(KappaLevel, HalfSmallnessCertifies) {
    const double c = 0.04, p = 0.25;
    const double h = solve_h(c, p, 0.5);
    const auto cert = kappa_level_certify(c, p, 1, 0.5, h);
    EXPECT_NEAR(cert.eta, 0.5, 1e-12);
    ASSERT_EQ(cert.certificates.size(), std::size_t(std::floor(1.5 / h)) + 1);
    for (std::size_t j = 0; j < cert.certificates.size(); ++j) {
        const auto& cc = cert.certificates[j];
        EXPECT_EQ(cc.status, CertificateStatus::valid) << cc.provenance;
        EXPECT_NEAR(cc.bound, std::pow(2.0, double(j + 1)), 1e-9);
        EXPECT_GE(cc.measured_ratio, 1.0);
        EXPECT_LE(cert.measured_eta[j], cert.eta);
        EXPECT_LE(cert.measured_beta[j], cert.eta);
    }
}

TEST(KappaLevel, LargeWidthFailsHypothesis) {
    const auto cert = kappa_level_certify(1, 0.25, 1, 0.5, 1);
    EXPECT_GE(cert.eta, 1.0);
    for (const auto& cc : cert.certificates) EXPECT_EQ(cc.status, CertificateStatus::hypothesis_fail);
}
