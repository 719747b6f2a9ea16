#pragma once

// Subcommand implementations for the kp front end. Every command writes its
// files under `out`, reports to `log` and returns the process exit code.

#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "kp/acceptance.hpp"
#include "kp/bounds.hpp"
#include "kp/config.hpp"
#include "kp/kernel_core.hpp"
#include "kp/perturbation.hpp"
#include "kp/spacetime.hpp"

namespace kp::cli {

namespace fs = std::filesystem;
using config::Csv;
using config::fmt;
using config::RunConfig;

enum Exit : int { ok = 0, check_failed = 1, bad_config = 2, invalid = 3, inconclusive = 4 };

struct Context {
    fs::path out = "kp_out";
    std::ostream* log = &std::cout;
};

/// 0 when all VALID, 3 when any INVALID, 4 when any INCONCLUSIVE or HYPOTHESIS_FAIL.
inline int exit_for(const std::vector<BoundCertificate>& certs) {
    bool other = false;
    for (const auto& c : certs) {
        if (c.status == CertificateStatus::invalid) return invalid;
        if (c.status != CertificateStatus::valid) other = true;
    }
    return other ? inconclusive : ok;
}

inline void write_certificates(const Context& ctx, const std::vector<BoundCertificate>& certs) {
    config::write_json(ctx.out / "certificates.json", config::certificates_json(certs));
    Csv csv({"slice", "eta", "beta", "bound", "measured_ratio", "margin", "status", "samples", "truncation"});
    for (const auto& c : certs)
        csv.row(c.slice, c.eta, c.beta, c.bound, c.measured_ratio, c.margin, to_string(c.status), c.samples,
                c.truncation);
    csv.write(ctx.out / "certificates.csv");
    for (const auto& c : certs)
        *ctx.log << "slice " << c.slice << ": " << to_string(c.status) << " measured " << fmt(c.measured_ratio)
                 << " bound " << fmt(c.bound) << "\n";
}

inline std::vector<BoundCertificate> failed_hypothesis(std::size_t k, double eta, double beta, const std::string& why) {
    std::vector<BoundCertificate> out;
    for (std::size_t j = 1; j <= k; ++j) {
        BoundCertificate c;
        c.slice = j;
        c.eta = eta;
        c.beta = beta;
        c.bound = inf;
        c.status = CertificateStatus::hypothesis_fail;
        c.truncation = "not run";
        c.provenance = why;
        out.push_back(c);
    }
    return out;
}

inline bool radial_setting(const RunConfig& c) { return c.d == 2; }

inline std::vector<SeriesResult> run_series(const RunConfig& c, const std::vector<SeriesTarget>& targets) {
    const KernelPtr p = c.make_kernel();
    if (radial_setting(c)) {
        if (c.y != 0) throw config_error("d = 2 series need the end point y = 0");
        return series_batch_radial(*p, c.measure, c.t, targets, c.series);
    }
    if (c.d != 1) throw config_error("series support d = 1, and d = 2 with radial symmetry");
    return series_batch(*p, c.measure, c.t, c.y, targets, c.series);
}

/// CSV rows (s, x, p, p^mu, ratio, truncation_index, status).
inline int cmd_series(const RunConfig& c, const Context& ctx) {
    const auto targets = c.targets();
    const auto res = run_series(c, targets);
    Csv csv({"s", "x", "p", "p_mu", "ratio", "truncation_index", "status"});
    double lo = inf, hi = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& r = res[i];
        csv.row(targets[i].s, targets[i].x, r.p, r.value, r.ratio(), r.truncation_index, to_string(r.status));
        lo = std::min(lo, r.ratio());
        hi = std::max(hi, r.ratio());
    }
    csv.write(ctx.out / "series.csv");
    *ctx.log << targets.size() << " rows; ratio range [" << fmt(lo) << ", " << fmt(hi) << "]\n";
    return ok;
}

inline int certify_discrete(const RunConfig& c, const Context& ctx) {
    if (!c.matrix) throw config_error("discrete certification needs a 'matrix' document");
    const auto& doc = *c.matrix;
    if (doc.sets.empty()) throw config_error("matrix document needs 'sets' forming the absorbing chain");
    const RationalKernel k = to_rational(doc.kernel);
    const std::vector<mpq_class> f = to_rational(std::span<const double>(doc.f));
    std::optional<AbsorbingChain> chain;
    try {
        chain.emplace(k, doc.sets);
    } catch (const precondition_error& e) {
        throw config_error(std::string("sets do not form an absorbing chain: ") + e.what());
    }
    std::optional<mpq_class> eta, beta;
    if (c.eta) {
        eta = mpq_class(*c.eta);
        beta = mpq_class(c.beta.value_or(*c.eta));
    } else {
        const auto est = estimate_constants(k, f, *chain);
        eta = est.eta;
        beta = c.beta ? std::optional<mpq_class>(mpq_class(*c.beta)) : est.beta;
        *ctx.log << "estimated eta " << (eta ? fmt(eta->get_d()) : "inf") << ", beta "
                 << (beta ? fmt(beta->get_d()) : "inf") << "\n";
    }
    std::vector<BoundCertificate> certs;
    if (!eta || !beta || !(*eta < 1)) {
        certs = failed_hypothesis(chain->length(), eta ? eta->get_d() : inf, beta ? beta->get_d() : inf,
                                  "local smallness fails: eta >= 1");
    } else {
        certs = certify(k, f, *chain, *eta, *beta);
    }
    write_certificates(ctx, certs);
    return exit_for(certs);
}

inline int certify_continuous(const RunConfig& c, const Context& ctx) {
    if (!c.slicing) throw config_error("certification needs a 'slicing' section");
    const auto& sl = *c.slicing;
    std::vector<BoundCertificate> certs;
    if (sl.mode == config::SlicingMode::diagonal_level) {
        const Density& q = c.measure.density();
        const double h = sl.eta_target ? solve_h(q.c, q.p, *sl.eta_target) : sl.h;
        *ctx.log << "diagonal slices of width " << fmt(h) << "\n";
        const auto res = kappa_level_certify(q.c, q.p, c.t, c.y, h, c.series);
        certs = res.certificates;
    } else {
        if (c.d != 1) throw config_error("time slicings are certified for d = 1 kernels");
        const std::vector<Interval> intervals =
            sl.mode == config::SlicingMode::time_uniform ? uniform_time_slices(sl.r, c.t, sl.h) : sl.intervals;
        SliceSampler sampler;
        sampler.xs = c.x_samples;
        sampler.s_per_slice = c.s_per_slice;
        const KernelPtr p = c.make_kernel();
        double eta;
        if (c.eta) {
            eta = *c.eta;
        } else {
            const auto per = estimate_interval_eta(*p, c.measure, sl.r, c.t, c.y, intervals, c.series, sampler);
            eta = *std::max_element(per.begin(), per.end());
            *ctx.log << "estimated eta " << fmt(eta) << "\n";
        }
        if (!(eta < 1))
            certs = failed_hypothesis(intervals.size(), eta, eta, "local smallness fails: eta >= 1");
        else
            certs = theorem46_certify(*p, c.measure, sl.r, c.t, c.y, intervals, eta, c.series, sampler);
    }
    write_certificates(ctx, certs);
    return exit_for(certs);
}

inline int cmd_certify(const RunConfig& c, const Context& ctx, bool discrete) {
    return discrete || (c.matrix && !c.slicing) ? certify_discrete(c, ctx) : certify_continuous(c, ctx);
}

/// Closed form of p^mu / p for a Chapman-Kolmogorov kernel and a measure of
/// the form (lambda dt + atoms) x Lebesgue.
inline double product_oracle(const RunConfig& c, double s) {
    const PerturbingMeasure& mu = c.measure;
    double f = std::exp((mu.has_density() ? mu.density().lambda : 0.0) * mu.density_time_mass(s, c.t));
    for (const Atom& a : mu.atoms()) {
        if (c.series.semantics == AtomSemantics::strict) {
            if (s < a.u && a.u < c.t) f *= 1 + a.eta;
        } else if (s <= a.u && a.u < c.t) {
            f *= multi_atom_series_factor(a.eta, 1);
        }
    }
    return f;
}

inline int cmd_oracle_check(const RunConfig& c, const Context& ctx) {
    const KernelPtr p = c.make_kernel();
    if (!p->chapman_kolmogorov()) throw config_error("oracle-check needs a Chapman-Kolmogorov kernel");
    const auto kind = c.measure.density().kind;
    if (kind != DensityKind::none && kind != DensityKind::constant)
        throw config_error("oracle-check needs a constant density or none");
    if (c.series.semantics == AtomSemantics::alternative)
        for (const Atom& a : c.measure.atoms())
            if (!(a.eta < 1)) throw config_error("alternative semantics needs atom weights below 1");
    const auto targets = c.targets();
    const auto res = run_series(c, targets);
    Csv csv({"s", "x", "ratio", "oracle", "rel_err", "status"});
    double worst = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double want = product_oracle(c, targets[i].s);
        const double e = std::abs(res[i].ratio() / want - 1);
        worst = std::max(worst, e);
        csv.row(targets[i].s, targets[i].x, res[i].ratio(), want, e, to_string(res[i].status));
    }
    csv.write(ctx.out / "oracle.csv");
    const bool pass = worst <= c.oracle_tol;
    *ctx.log << targets.size() << " samples; max rel err " << fmt(worst) << " (tolerance " << fmt(c.oracle_tol)
             << "): " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? ok : check_failed;
}

inline int cmd_kato(const RunConfig& c, const Context& ctx, std::uint64_t seed) {
    const KernelPtr p = c.make_kernel();
    const std::vector<double> hs = c.kato_h.empty() ? std::vector<double>{1.0, 0.5, 0.25, 0.125} : c.kato_h;
    Csv csv({"h", "k", "forward", "backward", "samples"});
    for (double h : hs) {
        const KatoResult k = kato_modulus(*p, c.measure, h);
        csv.row(h, k.value, k.forward, k.backward, k.samples);
        *ctx.log << "k(" << fmt(h) << ") = " << fmt(k.value) << "\n";
    }
    csv.write(ctx.out / "kato.csv");
    if (!c.kato_certify_h) return ok;
    const double c5 = c.five_p ? *c.five_p : five_p_constant(*p, 20000, seed);
    const auto cert = kato_certify(*p, c.measure, c.t, c.y, *c.kato_certify_h, c5, c.targets(), c.series);
    *ctx.log << "5P constant " << fmt(c5) << ", eta " << fmt(cert.eta) << "\n";
    write_certificates(ctx, cert.certificates);
    return exit_for(cert.certificates);
}

inline int cmd_3g(const Context& ctx, std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed, 7001);
    const double c3 = 2 * std::numbers::sqrt2;
    double lo = inf, hi = 0;
    std::size_t bad = 0, done = 0;
    while (done < n) {
        const double s = rng.uniform(-1, 1), t = s + std::exp(rng.uniform(-4, 2));
        const double x = rng.uniform(-1, 1), y = x + std::exp(rng.uniform(-4, 2));
        const double u = s + (t - s) * rng.uniform(1e-6, 1 - 1e-6), z = x + (y - x) * rng.uniform(1e-6, 1 - 1e-6);
        if (!(s < u && u < t && x < z && z < y)) continue;
        const ThreeGResult r = check_3g(s, x, u, z, t, y);
        ++done;
        if (!r.ok()) ++bad;
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    const double mid = check_3g(0, 0, 0.5, 0.5, 1, 1).ratio;
    Csv csv({"quantity", "value"});
    csv.row("tuples", double(done));
    csv.row("violations", double(bad));
    csv.row("min_ratio", lo);
    csv.row("max_ratio", hi);
    csv.row("midpoint_ratio", mid);
    csv.row("constant", c3);
    csv.write(ctx.out / "3g.csv");
    const bool pass = bad == 0 && lo >= 1 - 1e-12 && hi <= c3 * (1 + 1e-12) && std::abs(mid - c3) <= 1e-9;
    *ctx.log << done << " tuples; ratio range [" << fmt(lo) << ", " << fmt(hi) << "]; midpoint " << fmt(mid) << "; "
             << bad << " violations: " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? ok : check_failed;
}

inline int cmd_weyl(const Context& ctx) {
    Csv csv({"x", "derivative", "expected", "abs_err"});
    double worst = 0;
    for (int i = 0; i <= 20; ++i) {
        const double x = 0.25 * i;
        const double d = weyl_half_derivative([](double v) { return -std::exp(-v); }, x).value;
        const double e = std::abs(d + std::exp(-x));
        worst = std::max(worst, e);
        csv.row(x, d, -std::exp(-x), e);
    }
    csv.write(ctx.out / "weyl.csv");
    const TensorBump phi{{0.2, 0.8}, {0.1, 0.8}};
    const double li = left_inverse_residual(phi, 0, 0).value;
    const bool pass = worst <= 1e-6 && li <= 5e-3;
    *ctx.log << "max |derivative + exp(-x)| " << fmt(worst) << "; left inverse residual " << fmt(li) << ": "
             << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? ok : check_failed;
}

inline int cmd_reproduce(const Context& ctx, std::uint64_t seed, const std::string& only, double tol_scale,
                         std::ostream& timing) {
    acceptance::SuiteOptions opt;
    opt.seed = seed;
    opt.tol_scale = tol_scale;
    const auto ids = acceptance::select(only);
    const auto rep = acceptance::run_suite(opt, ids, ctx.out, *ctx.log, timing);
    *ctx.log << (rep.all_pass ? "ALL PASS" : "FAILURES PRESENT") << "\n";
    return rep.all_pass ? ok : check_failed;
}

}  // namespace kp::cli
