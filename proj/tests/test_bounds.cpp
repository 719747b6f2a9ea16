#include <gtest/gtest.h>

#include "kp/bounds.hpp"

using namespace kp;

namespace {

// Lower-triangular kernel with 1/2 on and below the diagonal; slice j is
// state j. Every K_j f is at most f/2 everywhere, so eta = beta = 1/2.
RationalKernel half_fixture() {
    const mpq_class h(1, 2);
    return RationalKernel::from_rows({{h, 0, 0}, {h, h, 0}, {h, h, h}});
}

AbsorbingChain singleton_chain(const RationalKernel& k) {
    const std::size_t n = k.size();
    std::vector<StateSet> sets;
    for (std::size_t j = 0; j < n; ++j) {
        StateSet a(n);
        for (std::size_t x = 0; x <= j; ++x) a.insert(x);
        sets.push_back(a);
    }
    return AbsorbingChain(k, sets);
}

}  // namespace

TEST(Gronwall, Examples) {
    for (long j = 1; j < 6; ++j) EXPECT_EQ(gronwall_bound(1, 0, j), 1.0);
    EXPECT_EQ(gronwall_bound(1, 1, 4), 8.0);
    EXPECT_EQ(gronwall_bound(0, 3, 5), 0.0);
    EXPECT_THROW(gronwall_bound(1, 1, 0), input_error);
}

TEST(Gronwall, EqualityRecursionMeetsBound) {
    GronwallSequence seq{1.0, 1.0, {}};
    double partial = 0;
    for (int j = 0; j < 4; ++j) {
        seq.gamma.push_back(seq.alpha + seq.delta * partial);
        partial += seq.gamma.back();
    }
    EXPECT_EQ(seq.gamma.back(), 8.0);
    EXPECT_TRUE(check_gronwall(seq));
}

TEST(Gronwall, HypothesisViolationNamesIndex) {
    GronwallSequence seq{1.0, 0.5, {2.0, 1.0}};
    try {
        check_gronwall(seq);
        FAIL() << "expected precondition_error";
    } catch (const precondition_error& e) {
        EXPECT_EQ(e.index, 1);
    }
}

TEST(Gronwall, RandomHypothesisSatisfyingSequences) {
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CounterRng rng(20, i);
        GronwallSequence seq{rng.uniform(0, 3), rng.uniform(0, 2), {}};
        const long k = rng.integer(1, 12);
        double partial = 0;
        for (long j = 0; j < k; ++j) {
            seq.gamma.push_back(rng.uniform() * (seq.alpha + seq.delta * partial));
            partial += seq.gamma.back();
        }
        EXPECT_TRUE(check_gronwall(seq));
    }
}

TEST(TheoremBound, Examples) {
    for (long j = 1; j < 5; ++j) EXPECT_EQ(theorem_bound(0.0, 0.0, j), 1.0);
    EXPECT_DOUBLE_EQ(theorem_bound(0.5, 0.5, 2), 4.0);
    EXPECT_THROW(theorem_bound(1.0, 0.0, 1), domain_error);
    EXPECT_THROW(theorem_bound(0.5, 0.5, 0), input_error);
    EXPECT_EQ(theorem_bound<mpq_class>(mpq_class(1, 2), mpq_class(1, 2), 3), mpq_class(8));
}

TEST(TheoremBound, EqualConstantsGiveGeometricPower) {
    for (int a = 0; a < 100; ++a) {
        const double eta = 0.99 * a / 99.0;
        for (long j = 1; j <= 10; ++j) {
            const double expected = std::pow(1 - eta, -double(j));
            EXPECT_NEAR(theorem_bound(eta, eta, j) / expected, 1.0, 1e-12);
        }
    }
}

TEST(TheoremBound, MonotoneInEachArgument) {
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CounterRng rng(21, i);
        const double eta = rng.uniform(0.01, 0.9), beta = rng.uniform(0.01, 3);
        const long j = rng.integer(1, 8);
        const double b = theorem_bound(eta, beta, j);
        EXPECT_LT(b, theorem_bound(eta * 1.05, beta, j));
        // beta enters only through the factor raised to j - 1.
        if (j >= 2)
            EXPECT_LT(b, theorem_bound(eta, beta * 1.05, j));
        else
            EXPECT_EQ(b, theorem_bound(eta, beta * 1.05, j));
        EXPECT_LT(b, theorem_bound(eta, beta, j + 1));
    }
}

TEST(CorollaryBound, Examples) {
    EXPECT_DOUBLE_EQ(corollary_eta(2, 2), 0.5);
    EXPECT_THROW(corollary_bound(2, 1, 1, 1), domain_error);
    EXPECT_DOUBLE_EQ(corollary_bound(2, 2, 1, 1), 4.0);
    EXPECT_EQ(smallest_admissible_n(2), 2);
    EXPECT_THROW(corollary_eta(1, 2), input_error);
    for (double c : {1.01, 1.5, 2.0, 3.0, 7.5, 40.0}) {
        const long n = smallest_admissible_n(c);
        EXPECT_LT(corollary_eta(c, n), 1);
        if (n > 1) {
            EXPECT_GE(corollary_eta(c, n - 1), 1);
        }
    }
}

TEST(EstimateConstants, IdentityOnOneSlice) {
    const auto k = to_rational(MatrixKernel::identity(2, 0.375));
    const AbsorbingChain chain(k, {StateSet(2, true)});
    const auto c = estimate_constants(k, std::vector<mpq_class>{1, 1}, chain);
    ASSERT_TRUE(c.eta);
    EXPECT_EQ(*c.per_slice_eta[0], mpq_class(3, 8));
    EXPECT_EQ(c.summary().eta, 0.375);
}

TEST(EstimateConstants, ZeroKernelAndZeroControl) {
    const RationalKernel zero(3);
    const auto chain = singleton_chain(half_fixture());
    const AbsorbingChain zchain(zero, chain.sets());
    const auto c = estimate_constants(zero, std::vector<mpq_class>{1, 2, 3}, zchain);
    EXPECT_EQ(*c.eta, 0);
    EXPECT_EQ(*c.beta, 0);
    // f = 0 where K_j f > 0: off the slice this makes beta infinite, on the
    // slice it makes eta infinite.
    const auto k = half_fixture();
    const std::vector<mpq_class> f{1, 0, 1};
    const auto cb = estimate_constants(k, f, chain);
    EXPECT_TRUE(cb.eta.has_value());
    EXPECT_FALSE(cb.beta.has_value());
    const auto ce = estimate_constants(k, f, AbsorbingChain(k, {StateSet(3, true)}));
    EXPECT_FALSE(ce.eta.has_value());
    EXPECT_TRUE(std::isinf(ce.summary().eta));
}

TEST(Certify, ZeroKernelRatioOne) {
    const RationalKernel zero(3);
    const AbsorbingChain chain(zero, singleton_chain(half_fixture()).sets());
    const std::vector<mpq_class> f{1, 2, 3};
    const auto certs = certify(zero, f, chain, estimate_constants(zero, f, chain));
    ASSERT_EQ(certs.size(), 3u);
    for (const auto& c : certs) {
        EXPECT_EQ(c.status, CertificateStatus::valid);
        EXPECT_EQ(c.measured_ratio, 1.0);
        EXPECT_GE(c.bound, 1.0);
    }
}

TEST(Certify, HalfFixtureAttainsTwoFourEight) {
    const auto k = half_fixture();
    const auto chain = singleton_chain(k);
    const std::vector<mpq_class> f(3, 1);
    const auto consts = estimate_constants(k, f, chain);
    EXPECT_EQ(*consts.eta, mpq_class(1, 2));
    EXPECT_EQ(*consts.beta, mpq_class(1, 2));
    const auto certs = certify(k, f, chain, consts);
    const double expected[] = {2, 4, 8};
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(certs[j].status, CertificateStatus::valid);
        EXPECT_EQ(certs[j].measured_ratio, expected[j]);
        EXPECT_EQ(certs[j].bound, expected[j]);
    }
}

TEST(Certify, UnderstatedEtaIsInvalid) {
    const auto k = to_rational(MatrixKernel::identity(2, 0.75));
    const AbsorbingChain chain(k, {StateSet(2, true)});
    const auto certs = certify(k, std::vector<mpq_class>{1, 1}, chain, mpq_class(1, 2), mpq_class(1, 2));
    EXPECT_EQ(certs[0].status, CertificateStatus::invalid);
    EXPECT_EQ(worst_status(certs), CertificateStatus::invalid);
    EXPECT_THROW(certify(k, std::vector<mpq_class>{1, 1}, chain, mpq_class(1), mpq_class(0)), domain_error);
}

TEST(Certify, DoubleModeAgreesWithExact) {
    const auto k = MatrixKernel::from_rows({{0.5, 0, 0}, {0.5, 0.5, 0}, {0.5, 0.5, 0.5}});
    const auto chain = singleton_chain(half_fixture());
    const auto certs = certify(k, std::vector<double>(3, 1.0), chain, 0.5, 0.5);
    for (const auto& c : certs) EXPECT_EQ(c.status, CertificateStatus::valid);
}

TEST(JudgeSlice, TruncatedSamplesAreInconclusiveUnlessWitnessed) {
    const std::vector<SeriesSample> below{{1.5, SeriesStatus::converged, 4}, {1.7, SeriesStatus::truncated, 50}};
    EXPECT_EQ(judge_slice(1, 2.0, below, 1e-9).status, CertificateStatus::inconclusive);
    const std::vector<SeriesSample> above{{2.5, SeriesStatus::truncated, 50}};
    EXPECT_EQ(judge_slice(1, 2.0, above, 1e-9).status, CertificateStatus::invalid);
    const std::vector<SeriesSample> fine{{1.99, SeriesStatus::converged, 4}};
    EXPECT_EQ(judge_slice(1, 2.0, fine, 1e-9).status, CertificateStatus::valid);
}

TEST(SampledSup, RefinementClimbsToMax) {
    auto f = [](double x) { return -(x - 0.3141) * (x - 0.3141); };
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    auto neighbors = [](double x, double scale) {
        std::vector<double> out;
        for (int k = -4; k <= 4; ++k) out.push_back(x + k * 0.025 * scale);
        return out;
    };
    const auto coarse = sampled_sup(grid, f);
    const auto fine = sampled_sup(grid, f, neighbors, 12);
    EXPECT_NEAR(coarse.arg, 0.3, 1e-15);
    EXPECT_NEAR(fine.arg, 0.3141, 1e-5);
    EXPECT_GT(fine.value, coarse.value);
    EXPECT_EQ(coarse.evaluations, grid.size());
}

TEST(EstimateConstantsSampled, SlicesAndTop) {
    // Two slices on [0,2): ratio_j(x) = 0.1 (j+1) x.
    const std::vector<std::vector<double>> pts{{0.25, 0.5, 0.75}, {1.25, 1.5, 1.75}};
    const auto c = estimate_constants_sampled(pts, [](std::size_t j, double x) { return 0.1 * double(j + 1) * x; });
    EXPECT_NEAR(c.per_slice_eta[0], 0.075, 1e-15);
    EXPECT_NEAR(c.per_slice_eta[1], 0.35, 1e-15);
    EXPECT_NEAR(c.per_slice_beta[0], 0.175, 1e-15);
    EXPECT_NEAR(c.beta, 0.35, 1e-15);
    EXPECT_FALSE(c.exact);
    EXPECT_EQ(c.samples, 6u);
}

TEST(Properties, SoundnessOnRandomChains) {
    int certified = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CounterRng rng(22, i);
        ChainInstanceSpec spec;
        spec.max_numerator = 2;
        const auto inst = random_chain_instance(rng, spec);
        const auto k = to_rational(inst.kernel);
        const auto f = to_rational(std::span<const double>(inst.f));
        const auto consts = estimate_constants(k, f, inst.chain);
        if (!consts.eta || !(*consts.eta < 1)) continue;
        for (const auto& c : certify(k, f, inst.chain, consts)) EXPECT_EQ(c.status, CertificateStatus::valid);
        ++certified;
    }
    EXPECT_GT(certified, 100);
}

TEST(Properties, CorollaryBoundHolds) {
    int checked = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CounterRng rng(23, i);
        ChainInstanceSpec spec;
        spec.max_numerator = 3;
        const auto inst = random_chain_instance(rng, spec);
        const auto k = to_rational(inst.kernel);
        const auto f = to_rational(std::span<const double>(inst.f));
        const auto& chain = inst.chain;
        // c from the local series on each slice, beta from Kf <= beta f on A_k.
        mpq_class c(1);
        bool finite = true;
        for (std::size_t j = 0; j < chain.length() && finite; ++j) {
            const auto kj = restrict(k, chain.slice(j), Side::both);
            std::vector<mpq_class> fj = f;
            for (std::size_t x = 0; x < f.size(); ++x)
                if (!chain.slice(j).contains(x)) fj[x] = 0;
            const auto g = exact_neumann_sum(kj, fj);
            if (!g) {
                finite = false;
                break;
            }
            for (std::size_t x : chain.slice(j).members())
                if ((*g)[x] / f[x] > c) c = (*g)[x] / f[x];
        }
        if (!finite) continue;
        const double cd = std::max(c.get_d() * (1 + 1e-12), 1.0 + 1.0 / 64);
        const auto kf = kp::apply(k, f);
        double beta = 0;
        for (std::size_t x : chain.top().members()) beta = std::max(beta, mpq_class(kf[x] / f[x]).get_d());
        const auto g = exact_neumann_sum(k, f);
        if (!g) continue;
        const long n = smallest_admissible_n(cd);
        for (std::size_t j = 0; j < chain.length(); ++j) {
            const double bound = corollary_bound(cd, n, beta, long(j + 1));
            for (std::size_t x : chain.slice(j).members())
                EXPECT_LE(mpq_class((*g)[x] / f[x]).get_d(), bound * (1 + 1e-9));
        }
        ++checked;
    }
    EXPECT_GT(checked, 300);
}
