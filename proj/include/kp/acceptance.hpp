#pragma once

// Acceptance suite: criteria 1-10, each producing a verdict, a one-line
// detail and a CSV table. Outputs are pure functions of the seed.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kp/bounds.hpp"
#include "kp/config.hpp"
#include "kp/core.hpp"
#include "kp/kernel_core.hpp"
#include "kp/measure.hpp"
#include "kp/perturbation.hpp"
#include "kp/spacetime.hpp"

namespace kp::acceptance {

struct SuiteOptions {
    std::uint64_t seed = 7;
    double tol_scale = 1;  // multiplies every numeric tolerance
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    std::string csv;
};

using config::fmt;
using config::Csv;

namespace detail {

inline ChainInstance corpus_instance(std::uint64_t seed, std::uint64_t i) {
    CounterRng rng(seed, 1000000 + i);
    ChainInstanceSpec spec;
    spec.max_states = 8;
    spec.max_slices = 4;
    spec.max_numerator = 2;
    return random_chain_instance(rng, spec);
}

constexpr std::uint64_t corpus_size = 1000;

inline CriterionResult finish(int id, const char* name, bool pass, std::string detail, const Csv& csv) {
    return {id, name, pass, std::move(detail), csv.text()};
}

inline double rel_err(double a, double b) { return b != 0 ? std::abs(a / b - 1) : std::abs(a); }

}  // namespace detail

/// Power and slice identities on random block-triangular kernels, m <= 4.
inline CriterionResult criterion_identities(const SuiteOptions& o) {
    Csv csv({"instance", "states", "slices", "checks", "failures"});
    std::size_t checks = 0, failures = 0;
    for (std::uint64_t i = 0; i < detail::corpus_size; ++i) {
        const auto inst = detail::corpus_instance(o.seed, i);
        const auto& c = inst.chain;
        std::size_t fi = 0, ci = 0;
        for (unsigned m = 1; m <= 4; ++m) {
            StateSet prev(inst.kernel.size());
            for (std::size_t j = 0; j < c.length(); ++j) {
                ci += 2;
                if (!verify_power_identity(inst.kernel, c.set(j), m)) ++fi;
                if (!verify_slice_identity(inst.kernel, prev, c.set(j), m)) ++fi;
                prev = c.set(j);
            }
        }
        checks += ci;
        failures += fi;
        csv.row(std::size_t(i), inst.kernel.size(), c.length(), ci, fi);
    }
    return detail::finish(1, "identities", failures == 0,
                          std::to_string(detail::corpus_size) + " instances; " + std::to_string(checks) +
                              " exact identity checks; " + std::to_string(failures) + " failures",
                          csv);
}

/// Geometric decay K^n f <= c (1 - 1/c)^n f and sum <= c^2 f.
inline CriterionResult criterion_decay(const SuiteOptions& o) {
    Csv csv({"instance", "c", "holds"});
    std::size_t checked = 0, violations = 0;
    for (std::uint64_t i = 0; i < detail::corpus_size; ++i) {
        const auto inst = detail::corpus_instance(o.seed, i);
        const auto k = to_rational(inst.kernel);
        const auto f = to_rational(std::span<const double>(inst.f));
        const auto g = exact_neumann_sum(k, f);
        if (!g) continue;
        mpq_class c(1);
        for (std::size_t x = 0; x < f.size(); ++x)
            if ((*g)[x] / f[x] > c) c = (*g)[x] / f[x];
        const bool ok = check_geometric_decay(k, f, inst.chain.top(), c, 25);
        ++checked;
        if (!ok) ++violations;
        csv.row(std::size_t(i), c.get_d(), ok ? "1" : "0");
    }
    return detail::finish(2, "decay", violations == 0 && checked > 0,
                          std::to_string(checked) + " instances with convergent series; " + std::to_string(violations) +
                              " violations",
                          csv);
}

/// Soundness of the slice certificates and the bound identity for eta = beta.
inline CriterionResult criterion_soundness(const SuiteOptions& o) {
    Csv csv({"instance", "eta", "beta", "slices", "invalid"});
    std::size_t certified = 0, bad = 0;
    for (std::uint64_t i = 0; i < detail::corpus_size; ++i) {
        const auto inst = detail::corpus_instance(o.seed, i);
        const auto k = to_rational(inst.kernel);
        const auto f = to_rational(std::span<const double>(inst.f));
        const auto consts = estimate_constants(k, f, inst.chain);
        if (!consts.eta || !consts.beta || !(*consts.eta < 1)) continue;
        std::size_t inv = 0;
        for (const auto& c : certify(k, f, inst.chain, consts))
            if (c.status != CertificateStatus::valid) ++inv;
        ++certified;
        bad += inv;
        csv.row(std::size_t(i), consts.eta->get_d(), consts.beta->get_d(), inst.chain.length(), inv);
    }
    double worst = 0;
    for (int a = 0; a < 10; ++a)
        for (long j = 1; j <= 10; ++j) {
            const double eta = 0.095 * a;
            worst = std::max(worst, detail::rel_err(theorem_bound(eta, eta, j), std::pow(1 - eta, -double(j))));
        }
    const bool identity_ok = worst <= 1e-12 * o.tol_scale;
    return detail::finish(3, "soundness", bad == 0 && certified > 0 && identity_ok,
                          std::to_string(certified) + " instances with eta < 1; " + std::to_string(bad) +
                              " non-valid certificates; bound identity max rel err " + fmt(worst) + " on 100 points",
                          csv);
}

/// Gaussian d = 1 with lambda Lebesgue: p^mu = e^lambda p for (s, t) = (0, 1).
inline CriterionResult criterion_atomless(const SuiteOptions& o) {
    Csv csv({"lambda", "s", "x", "ratio", "oracle", "rel_err", "status"});
    const GaussianKernel g;
    double worst = 0;
    bool converged = true;
    std::vector<SeriesTarget> tg;
    for (int i = 0; i < 20; ++i) tg.push_back({0.0, -2 + 4 * double(i) / 19});
    for (double lambda : {0.25, 1.0}) {
        const auto res = series_batch(g, PerturbingMeasure::lebesgue(lambda), 1, 0.0, tg);
        for (std::size_t i = 0; i < tg.size(); ++i) {
            const double e = detail::rel_err(res[i].ratio(), std::exp(lambda));
            worst = std::max(worst, e);
            converged = converged && res[i].status == SeriesStatus::converged;
            csv.row(lambda, tg[i].s, tg[i].x, res[i].ratio(), std::exp(lambda), e, to_string(res[i].status));
        }
    }
    return detail::finish(4, "atomless", converged && worst <= 1e-3 * o.tol_scale,
                          "40 samples; max rel err " + fmt(worst) + " (tolerance 1e-3)", csv);
}

/// Single-atom factor (1 + eta), multi-atom (1 - eta)^{-L(s)} and chain counts.
inline CriterionResult criterion_atoms(const SuiteOptions& o) {
    Csv csv({"case", "s", "x", "measured", "oracle", "rel_err"});
    const GaussianKernel g;
    const double eta = 0.5;
    // Single atom, strict chains.
    const auto dirac = PerturbingMeasure::dirac(0.5, eta);
    const std::vector<SeriesTarget> tg{{0.0, -0.5}, {0.0, 0.0}, {0.0, 0.5}};
    const auto single = series_batch(g, dirac, 1, 0.0, tg);
    const auto terms = pn_terms_batch(g, dirac, 2, 1, 0.0, tg);
    double single_err = 0, p2 = 0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
        const double e = detail::rel_err(single[i].ratio(), 1 + eta);
        single_err = std::max(single_err, e);
        p2 = std::max(p2, terms[i][2] / terms[i][0]);
        csv.row("single", tg[i].s, tg[i].x, single[i].ratio(), 1 + eta, e);
        csv.row("single_p2", tg[i].s, tg[i].x, terms[i][2] / terms[i][0], 0.0, terms[i][2] / terms[i][0]);
    }
    // Three atoms, alternative operator.
    const std::vector<double> times{0.2, 0.5, 0.8};
    const PerturbingMeasure three(Density::none(), {{0.2, eta}, {0.5, eta}, {0.8, eta}});
    SeriesOptions alt;
    alt.semantics = AtomSemantics::alternative;
    std::vector<SeriesTarget> mt;
    for (double s : {0.0, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9})
        for (double x : {-0.5, 0.0, 0.5}) mt.push_back({s, x});
    const auto multi = series_batch(g, three, 1, 0.0, mt, alt);
    double multi_err = 0;
    for (std::size_t i = 0; i < mt.size(); ++i) {
        long L = 0;
        for (double u : times) L += u >= mt[i].s;
        const double want = multi_atom_series_factor(eta, L);
        const double e = detail::rel_err(multi[i].ratio(), want);
        multi_err = std::max(multi_err, e);
        csv.row("multi", mt[i].s, mt[i].x, multi[i].ratio(), want, e);
    }
    // Iterate counts against enumeration.
    std::size_t count_fail = 0;
    for (long L = 0; L <= 5; ++L) {
        std::vector<double> ts;
        for (long i = 0; i < L; ++i) ts.push_back(0.1 * double(i + 1));
        for (long n = 0; n <= 5; ++n) {
            const auto closed = multi_atom_iterate_count(L, n);
            const auto enumerated = count_atom_chains(ts, 0.0, n);
            if (closed != enumerated) ++count_fail;
            csv.row("count_L" + std::to_string(L), 0.0, double(n), double(enumerated), double(closed),
                    double(closed != enumerated));
        }
    }
    const bool ok = single_err <= 1e-8 * o.tol_scale && p2 <= 1e-8 * o.tol_scale && multi_err <= 1e-3 * o.tol_scale &&
                    count_fail == 0;
    return detail::finish(5, "atoms", ok,
                          "single atom rel err " + fmt(single_err) + "; p_2/p " + fmt(p2) + "; multi-atom rel err " +
                              fmt(multi_err) + "; count mismatches " + std::to_string(count_fail),
                          csv);
}

/// Three equal atoms, one per interval: the ratio on I_j reaches 2^j.
inline CriterionResult criterion_sharpness(const SuiteOptions& o) {
    Csv csv({"slice", "bound", "measured_ratio", "rel_err", "status"});
    const GaussianKernel g;
    const std::vector<Interval> I{Interval::left_closed(2.0 / 3, 1), Interval::left_closed(1.0 / 3, 2.0 / 3),
                                  Interval::left_closed(0, 1.0 / 3)};
    const PerturbingMeasure mu(Density::none(), {{0.3, 0.5}, {0.6, 0.5}, {0.95, 0.5}});
    SeriesOptions alt;
    alt.semantics = AtomSemantics::alternative;
    SliceSampler sampler;
    sampler.xs = {-0.5, 0.0, 0.5};
    sampler.s_per_slice = 3;
    const auto certs = theorem46_certify(g, mu, 0, 1, 0, I, 0.5, alt, sampler);
    double worst = 0;
    bool valid = true;
    for (const auto& c : certs) {
        const double e = detail::rel_err(c.measured_ratio, std::pow(2.0, double(c.slice)));
        worst = std::max(worst, e);
        valid = valid && c.status == CertificateStatus::valid;
        csv.row(c.slice, c.bound, c.measured_ratio, e, to_string(c.status));
    }
    return detail::finish(6, "sharpness", valid && worst <= 1e-3 * o.tol_scale,
                          "3 slices; max rel err to 2^j " + fmt(worst), csv);
}

/// Two-subordinator example: 3G ratio range, slice-integral scaling and per-slice eta.
inline CriterionResult criterion_3g(const SuiteOptions& o) {
    Csv csv({"quantity", "parameter", "value", "target"});
    CounterRng rng(o.seed, 7001);
    const double c3 = 2 * std::numbers::sqrt2;
    double lo = inf, hi = 0;
    std::size_t bad = 0, n = 0;
    while (n < 100000) {
        const double s = rng.uniform(-1, 1), t = s + std::exp(rng.uniform(-4, 2));
        const double x = rng.uniform(-1, 1), y = x + std::exp(rng.uniform(-4, 2));
        const double u = s + (t - s) * rng.uniform(1e-6, 1 - 1e-6), z = x + (y - x) * rng.uniform(1e-6, 1 - 1e-6);
        if (!(s < u && u < t && x < z && z < y)) continue;
        const ThreeGResult r = check_3g(s, x, u, z, t, y);
        ++n;
        if (!r.ok()) ++bad;
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    const double mid = check_3g(0, 0, 0.5, 0.5, 1, 1).ratio;
    csv.row("3g_min_ratio", 0.0, lo, 1.0);
    csv.row("3g_max_ratio", 0.0, hi, c3);
    csv.row("3g_midpoint", 0.0, mid, c3);
    const bool range_ok = bad == 0 && lo >= 1 - 1e-12 && hi <= c3 * (1 + 1e-12);
    const bool mid_ok = std::abs(mid - c3) <= 1e-9 * o.tol_scale;

    bool scaling_ok = true;
    std::string scaling;
    for (double p : {0.1, 0.25}) {
        auto I = [p](double h) { return kappa_slice_integral(p, 0, 0, h / 2, h / 2, 0, h).value; };
        const double expo = std::log2(I(1.0) / I(0.5));
        csv.row("slice_exponent", p, expo, 0.5 - p);
        scaling_ok = scaling_ok && std::abs(expo - (0.5 - p)) <= 0.02 * (0.5 - p) * o.tol_scale;
        scaling += (scaling.empty() ? "" : " ") + fmt(expo);
    }

    const double c = 1, p = 0.25, t = 1, y = 1, h = 0.25;
    const auto slices = diagonal_level_slices(t, y, h);
    const double eta = eta_for_kappa(c, p, h);
    CounterRng srng(o.seed, 7002);
    double worst = 0;
    for (std::size_t j = 0; j < slices.size(); ++j) {
        const auto [a_lo, a_hi] = slices[j];
        double sup = 0;
        for (int i = 0; i < 30; ++i) {
            const double level = std::isfinite(a_lo) ? srng.uniform(a_lo, std::min(a_hi, t + y)) : srng.uniform(-0.5, h);
            const double s = srng.uniform(level - y, t), x = level - s;
            if (!(s < t && x < y)) continue;
            sup = std::max(sup, kappa_slice_ratio(c, p, s, x, t, y, a_lo, a_hi).value);
        }
        csv.row("slice_eta", double(j + 1), sup, eta);
        worst = std::max(worst, sup / eta);
    }
    const bool eta_ok = worst <= 1;
    return detail::finish(7, "3g", range_ok && mid_ok && scaling_ok && eta_ok,
                          std::to_string(n) + " tuples in [" + fmt(lo) + ", " + fmt(hi) + "] with " +
                              std::to_string(bad) + " violations; midpoint " + fmt(mid) + "; exponents " + scaling +
                              "; max per-slice eta / bound " + fmt(worst),
                          csv);
}

/// Chapman-Kolmogorov residuals, the Weyl derivative and the left inverse.
inline CriterionResult criterion_residuals(const SuiteOptions& o) {
    Csv csv({"check", "index", "residual", "tolerance"});
    const GaussianKernel g;
    const CauchyKernel cy;
    double gmax = 0, cmax = 0;
    for (int which = 0; which < 2; ++which) {
        CounterRng rng(o.seed, 8001 + std::uint64_t(which));
        const SpaceTimeKernel& k = which == 0 ? static_cast<const SpaceTimeKernel&>(g) : cy;
        for (int i = 0; i < 50; ++i) {
            const double s = rng.uniform(-1, 0), t = s + rng.uniform(0.05, 2), u = s + (t - s) * rng.uniform(0.05, 0.95);
            const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
            const double r = check_chapman_kolmogorov(k, s, x, u, t, y).value;
            double& worst = which == 0 ? gmax : cmax;
            worst = std::max(worst, r);
            csv.row(which == 0 ? "ck_gaussian" : "ck_cauchy", i, r, which == 0 ? 1e-6 : 1e-5);
        }
    }
    double wmax = 0;
    for (int i = 0; i <= 20; ++i) {
        const double x = 0.25 * i;
        const double r = std::abs(weyl_half_derivative([](double v) { return -std::exp(-v); }, x).value + std::exp(-x));
        wmax = std::max(wmax, r);
        csv.row("weyl_exp", i, r, 1e-6);
    }
    const TensorBump phi{{0.2, 0.8}, {0.1, 0.8}};
    const double li = left_inverse_residual(phi, 0, 0).value;
    csv.row("left_inverse", 0, li, 5e-3);
    const double ts = o.tol_scale;
    const bool ok = gmax <= 1e-6 * ts && cmax <= 1e-5 * ts && wmax <= 1e-6 * ts && li <= 5e-3 * ts;
    return detail::finish(8, "residuals", ok,
                          "CK gaussian " + fmt(gmax) + "; CK cauchy " + fmt(cmax) + "; weyl " + fmt(wmax) +
                              "; left inverse " + fmt(li),
                          csv);
}

/// Kato modulus of Lebesgue measure and of |z|^{-1/2} in d = 2 with certificates.
inline CriterionResult criterion_kato(const SuiteOptions& o) {
    Csv csv({"quantity", "h", "value", "target"});
    const CauchyKernel c1(1), c2(2);
    double leb_err = 0;
    for (double h : {0.1, 0.5, 1.0}) {
        const double k = kato_modulus(c1, PerturbingMeasure::lebesgue(), h).value;
        leb_err = std::max(leb_err, std::abs(k - 2 * h));
        csv.row("k_lebesgue", h, k, 2 * h);
    }
    const PerturbingMeasure mu(Density::power(0.5), {});
    bool monotone = true;
    double prev = inf;
    for (double h : {1.0, 0.5, 0.25, 0.125}) {
        const double k = kato_modulus(c2, mu, h).value;
        monotone = monotone && std::isfinite(k) && k < prev;
        prev = k;
        csv.row("k_power", h, k, 0.0);
    }
    const double c5 = five_p_constant(c2, 20000, o.seed);
    std::vector<SeriesTarget> samples;
    for (double dt : {0.005, 0.01, 0.02, 0.03, 0.05})
        for (double x : {0.0, 0.5}) samples.push_back({1 - dt, x});
    SeriesOptions opt;
    opt.quad_tol = 1e-5;
    opt.grid.u_order = opt.grid.z_order = 4;
    opt.grid.max_z_panels = 8;
    const auto cert = kato_certify(c2, mu, 1, 0, 1.0 / 64, c5, samples, opt);
    std::size_t n = 0;
    bool valid = cert.eta < 1;
    for (const auto& bc : cert.certificates) {
        n += bc.samples;
        valid = valid && bc.status == CertificateStatus::valid;
        csv.row("certificate_j" + std::to_string(bc.slice), cert.h, bc.measured_ratio, bc.bound);
    }
    const bool ok = leb_err <= 1e-4 * o.tol_scale && monotone && valid && n == 10;
    return detail::finish(9, "kato", ok,
                          "max |k(h) - 2h| " + fmt(leb_err) + "; power density k(h) " +
                              (monotone ? "decreasing" : "not decreasing") + "; eta " + fmt(cert.eta) + " at h 1/64; " +
                              std::to_string(n) + " samples " + (valid ? "VALID" : "not all VALID"),
                          csv);
}

struct Criterion {
    int id;
    const char* name;
    std::function<CriterionResult(const SuiteOptions&)> run;
};

inline const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "identities", criterion_identities}, {2, "decay", criterion_decay},
        {3, "soundness", criterion_soundness},   {4, "atomless", criterion_atomless},
        {5, "atoms", criterion_atoms},           {6, "sharpness", criterion_sharpness},
        {7, "3g", criterion_3g},                 {8, "residuals", criterion_residuals},
        {9, "kato", criterion_kato},             {10, "determinism", nullptr},
    };
    return all;
}

/// Comma separated names or ids; empty selects everything.
inline std::vector<int> select(const std::string& only) {
    std::vector<int> out;
    if (only.empty()) {
        for (const auto& c : criteria()) out.push_back(c.id);
        return out;
    }
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) {
        bool found = false;
        for (const auto& c : criteria())
            if (item == c.name || item == std::to_string(c.id)) {
                if (std::find(out.begin(), out.end(), c.id) == out.end()) out.push_back(c.id);
                found = true;
            }
        if (!found) throw input_error("unknown criterion '" + item + "'");
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string csv_name(int id, const std::string& name) { return "c" + std::to_string(id) + "_" + name + ".csv"; }

struct SuiteReport {
    std::vector<CriterionResult> results;
    bool all_pass = true;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void emit(const CriterionResult& r, std::ostream& table) {
    table << (r.pass ? "PASS" : "FAIL") << "  " << r.id << " " << r.name << ": " << r.detail << "\n" << std::flush;
}

}  // namespace detail

/// Runs the selected criteria, writes one CSV per criterion plus summary.csv
/// into `out`, prints one line per criterion to `table` and timings to `timing`.
/// The determinism criterion reruns the other selected criteria (all of 1-9
/// when none is selected) into a scratch directory and compares file bytes.
inline SuiteReport run_suite(const SuiteOptions& opt, const std::vector<int>& ids, const std::filesystem::path& out,
                             std::ostream& table, std::ostream& timing) {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    SuiteReport rep;
    auto run_one = [&](const Criterion& c, const fs::path& dir) {
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = c.run(opt);
        } catch (const std::exception& e) {
            r = {c.id, c.name, false, std::string("error: ") + e.what(), ""};
        }
        config::write_text(dir / csv_name(c.id, c.name), r.csv);
        config::write_text(dir / (csv_name(c.id, c.name) + ".detail"), r.detail + "\n");
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timing << "criterion " << c.id << " " << c.name << " took " << secs << " s\n" << std::flush;
        return r;
    };
    std::vector<int> ran;
    for (int id : ids) {
        if (id == 10) continue;
        const Criterion& c = criteria()[std::size_t(id - 1)];
        rep.results.push_back(run_one(c, out));
        ran.push_back(id);
        detail::emit(rep.results.back(), table);
    }
    if (std::find(ids.begin(), ids.end(), 10) != ids.end()) {
        std::vector<int> subject = ran;
        const fs::path scratch = out / ".rerun";
        fs::remove_all(scratch);
        if (subject.empty()) {
            for (int id = 1; id <= 9; ++id) {
                run_one(criteria()[std::size_t(id - 1)], out);
                subject.push_back(id);
            }
        }
        std::size_t mismatches = 0;
        std::string which;
        for (int id : subject) {
            const Criterion& c = criteria()[std::size_t(id - 1)];
            run_one(c, scratch);
            for (const std::string& f : {csv_name(c.id, c.name), csv_name(c.id, c.name) + ".detail"}) {
                if (detail::read_file(out / f) != detail::read_file(scratch / f)) {
                    ++mismatches;
                    which += " " + f;
                }
            }
        }
        fs::remove_all(scratch);
        Csv csv({"criterion", "identical"});
        for (int id : subject) {
            const auto& c = criteria()[std::size_t(id - 1)];
            const bool same = which.find(csv_name(c.id, c.name)) == std::string::npos;
            csv.row(std::string(c.name), same ? "1" : "0");
        }
        CriterionResult r{10, "determinism", mismatches == 0,
                          std::to_string(subject.size()) + " criteria rerun with seed " + std::to_string(opt.seed) +
                              "; " + std::to_string(mismatches) + " differing files" + which,
                          csv.text()};
        config::write_text(out / csv_name(10, "determinism"), r.csv);
        rep.results.push_back(r);
        detail::emit(r, table);
    }
    Csv summary({"id", "name", "status", "detail"});
    for (const auto& r : rep.results) {
        std::string d = r.detail;
        std::replace(d.begin(), d.end(), ',', ';');
        summary.row(r.id, r.name, r.pass ? "PASS" : "FAIL", "\"" + d + "\"");
        rep.all_pass = rep.all_pass && r.pass;
    }
    config::write_text(out / "summary.csv", summary.text());
    return rep;
}

}  // namespace kp::acceptance
