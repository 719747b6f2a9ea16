#pragma once

// Discrete Gronwall recursion, slice constants (local smallness eta, global
// boundedness beta), the exponential slice bound and its certification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kp/core.hpp"
#include "kp/kernel_core.hpp"

namespace kp {

/// alpha (1 + delta)^(j-1).
inline double gronwall_bound(double alpha, double delta, long j) {
    if (j < 1) throw input_error("gronwall_bound: j must be >= 1");
    if (alpha < 0 || delta < 0) throw input_error("gronwall_bound: alpha and delta must be >= 0");
    return alpha * std::pow(1 + delta, double(j - 1));
}

struct GronwallSequence {
    double alpha = 0;
    double delta = 0;
    std::vector<double> gamma;  // gamma_1 .. gamma_k
};

/// Verifies gamma_j <= alpha + delta sum_{i<j} gamma_i for every j (else
/// precondition_error naming the 1-based j), then gamma_j <= gronwall_bound.
/// rel_slack absorbs roundoff in sequences built with equality.
inline bool check_gronwall(const GronwallSequence& seq, double rel_slack = 1e-12) {
    if (seq.alpha < 0 || seq.delta < 0) throw input_error("check_gronwall: alpha and delta must be >= 0");
    double partial = 0;
    for (std::size_t j = 0; j < seq.gamma.size(); ++j) {
        const double rhs = seq.alpha + seq.delta * partial;
        if (seq.gamma[j] > rhs * (1 + rel_slack))
            throw precondition_error("check_gronwall: hypothesis fails", long(j + 1));
        partial += seq.gamma[j];
    }
    for (std::size_t j = 0; j < seq.gamma.size(); ++j)
        if (seq.gamma[j] > gronwall_bound(seq.alpha, seq.delta, long(j + 1)) * (1 + rel_slack)) return false;
    return true;
}

namespace detail {
template <class T>
T int_power(const T& base, long e) {
    if constexpr (scalar_traits<T>::exact) {
        T r(1);
        for (long i = 0; i < e; ++i) r *= base;
        return r;
    } else {
        return std::pow(base, double(e));
    }
}
}  // namespace detail

/// (1/(1-eta)) (1 + beta/(1-eta))^(j-1).
template <class T = double>
T theorem_bound(const T& eta, const T& beta, long j) {
    if (j < 1) throw input_error("theorem_bound: j must be >= 1");
    if (!(eta >= 0) || !(beta >= 0)) throw input_error("theorem_bound: eta and beta must be >= 0");
    if (!(eta < 1)) throw domain_error("local smallness fails: eta >= 1");
    const T one(1);
    const T q = one / (one - eta);
    return q * detail::int_power<T>(one + beta * q, j - 1);
}

/// c (1 - 1/c)^N.
inline double corollary_eta(double c, long n) {
    if (!(c > 1)) throw input_error("corollary_eta: c must be > 1");
    if (n < 1) throw input_error("corollary_eta: N must be >= 1");
    return c * std::pow(1 - 1 / c, double(n));
}

/// Smallest N >= 1 with c (1 - 1/c)^N < 1.
inline long smallest_admissible_n(double c) {
    if (!(c > 1)) throw input_error("smallest_admissible_n: c must be > 1");
    long n = std::max(1L, long(std::floor(std::log(c) / -std::log1p(-1 / c))));
    while (n > 1 && corollary_eta(c, n - 1) < 1) --n;
    while (!(corollary_eta(c, n) < 1)) ++n;
    return n;
}

/// (sum_{n<N} beta^n) (1/(1-eta)) (1 + beta/(1-eta))^(j-1), eta = c(1-1/c)^N.
inline double corollary_bound(double c, long n, double beta, long j) {
    const double eta = corollary_eta(c, n);
    if (!(eta < 1)) throw domain_error("choose larger N: c(1-1/c)^N >= 1");
    if (beta < 0) throw input_error("corollary_bound: beta must be >= 0");
    double geometric = 0, term = 1;
    for (long i = 0; i < n; ++i) {
        geometric += term;
        term *= beta;
    }
    return geometric * theorem_bound(eta, beta, j);
}

// ---------------------------------------------------------------------------

struct SliceConstants {
    double eta = 0;
    double beta = 0;
    std::vector<double> per_slice_eta;
    std::vector<double> per_slice_beta;
    bool exact = false;         // full enumeration vs sampled lower estimate of the sup
    std::size_t samples = 0;    // points at which ratios were evaluated
    std::string provenance;
};

/// Constants held in the kernel's scalar type; nullopt stands for +inf.
template <class T>
struct ExactSliceConstants {
    std::vector<std::optional<T>> per_slice_eta;
    std::vector<std::optional<T>> per_slice_beta;
    std::optional<T> eta;
    std::optional<T> beta;
    std::size_t samples = 0;

    SliceConstants summary() const {
        SliceConstants s;
        auto d = [](const std::optional<T>& v) { return v ? to_double(*v) : inf; };
        for (const auto& v : per_slice_eta) s.per_slice_eta.push_back(d(v));
        for (const auto& v : per_slice_beta) s.per_slice_beta.push_back(d(v));
        s.eta = d(eta);
        s.beta = d(beta);
        s.exact = true;
        s.samples = samples;
        s.provenance = "enumeration";
        return s;
    }
};

namespace detail {
template <class T>
void raise_sup(std::optional<T>& acc, const std::optional<T>& v) {
    if (!acc) return;  // already infinite
    if (!v) {
        acc.reset();
        return;
    }
    if (*v > *acc) acc = *v;
}

/// sup over `where` of num/den, treating 0/0 as 0 and positive/0 as +inf.
template <class T>
std::optional<T> ratio_sup(std::span<const T> num, std::span<const T> den, const StateSet& where) {
    std::optional<T> out = T(0);
    for (std::size_t x = 0; x < num.size(); ++x) {
        if (!where.contains(x)) continue;
        if (den[x] == 0) {
            if (num[x] > 0) return std::nullopt;
            continue;
        }
        raise_sup(out, std::optional<T>(num[x] / den[x]));
    }
    return out;
}
}  // namespace detail

/// Exact per-slice constants for a matrix kernel by enumeration:
/// eta_j = sup_{S_j} K_j f / f, beta_j = sup_{A_k} K_j f / f with K_j = K 1_{S_j}.
template <class T>
ExactSliceConstants<T> estimate_constants(const BasicMatrixKernel<T>& k, std::span<const T> f,
                                          const AbsorbingChain& chain) {
    detail::check_dim(k.size(), f.size(), "estimate_constants");
    ExactSliceConstants<T> out;
    out.eta = T(0);
    out.beta = T(0);
    for (std::size_t j = 0; j < chain.length(); ++j) {
        const auto kjf = kp::apply(restrict(k, chain.slice(j), Side::right), f);
        const std::span<const T> num(kjf);
        const auto e = detail::ratio_sup(num, f, chain.slice(j));
        const auto b = detail::ratio_sup(num, f, chain.top());
        out.per_slice_eta.push_back(e);
        out.per_slice_beta.push_back(b);
        detail::raise_sup(out.eta, e);
        detail::raise_sup(out.beta, b);
    }
    out.samples = chain.top().count();
    return out;
}

template <class T>
ExactSliceConstants<T> estimate_constants(const BasicMatrixKernel<T>& k, const std::vector<T>& f,
                                          const AbsorbingChain& chain) {
    return estimate_constants(k, std::span<const T>(f), chain);
}

// ---------------------------------------------------------------------------
// Sampled suprema on continuous spaces.

template <class Point>
struct SupEstimate {
    double value = -inf;
    Point arg{};
    std::size_t evaluations = 0;
};

/// Max of fn over the candidates (evaluated in parallel, ties broken by the
/// lowest index), followed by `rounds` of local refinement: neighbors(best,
/// scale) proposes points near the running max with scale halving each round.
template <class Point, class Fn, class Neighbors>
SupEstimate<Point> sampled_sup(const std::vector<Point>& candidates, Fn&& fn, Neighbors&& neighbors,
                               int rounds) {
    SupEstimate<Point> best;
    auto scan = [&](const std::vector<Point>& pts) {
        std::vector<double> vals(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) { vals[i] = fn(pts[i]); });
        best.evaluations += pts.size();
        bool improved = false;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (vals[i] > best.value) {
                best.value = vals[i];
                best.arg = pts[i];
                improved = true;
            }
        return improved;
    };
    scan(candidates);
    if (candidates.empty()) return best;
    double scale = 1;
    for (int r = 0; r < rounds; ++r) {
        scan(neighbors(best.arg, scale));
        scale /= 2;
    }
    return best;
}

template <class Point, class Fn>
SupEstimate<Point> sampled_sup(const std::vector<Point>& candidates, Fn&& fn) {
    return sampled_sup(candidates, fn, [](const Point&, double) { return std::vector<Point>{}; }, 0);
}

/// Sampled slice constants. ratio(j, point) returns K_j f / f at the point
/// (+inf when f vanishes but K_j f does not). slice_points[j] samples S_j;
/// the union of all slice points samples A_k.
template <class Point, class RatioFn>
SliceConstants estimate_constants_sampled(const std::vector<std::vector<Point>>& slice_points, RatioFn&& ratio) {
    SliceConstants out;
    std::vector<Point> all;
    for (const auto& s : slice_points) all.insert(all.end(), s.begin(), s.end());
    const std::size_t k = slice_points.size();
    std::vector<std::vector<double>> vals(k, std::vector<double>(all.size()));
    parallel_for(k * all.size(), [&](std::size_t idx) {
        const std::size_t j = idx / all.size(), i = idx % all.size();
        vals[j][i] = ratio(j, all[i]);
    });
    out.eta = 0;
    out.beta = 0;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < k; ++j) {
        double e = 0, b = 0;
        for (std::size_t i = 0; i < all.size(); ++i) {
            b = std::max(b, vals[j][i]);
            if (i >= offset && i < offset + slice_points[j].size()) e = std::max(e, vals[j][i]);
        }
        offset += slice_points[j].size();
        out.per_slice_eta.push_back(e);
        out.per_slice_beta.push_back(b);
        out.eta = std::max(out.eta, e);
        out.beta = std::max(out.beta, b);
    }
    out.exact = false;
    out.samples = all.size();
    out.provenance = "sampled sup over " + std::to_string(all.size()) + " points (lower estimate)";
    return out;
}

// ---------------------------------------------------------------------------

struct BoundCertificate {
    std::size_t slice = 0;  // 1-based j
    double eta = 0;
    double beta = 0;
    double bound = 0;
    double measured_ratio = 0;
    double margin = 0;
    CertificateStatus status = CertificateStatus::valid;
    std::size_t samples = 0;
    std::string truncation;
    std::string provenance;
};

/// Series ratio sum_m K^m f / f observed at one sample point.
struct SeriesSample {
    double ratio = 0;
    SeriesStatus status = SeriesStatus::converged;
    std::size_t terms = 0;
};

/// Verdict for one slice. Partial sums of a nonnegative series are lower
/// bounds, so any sample above the bound witnesses a violation even when its
/// series did not converge; otherwise a non-converged sample is inconclusive.
inline BoundCertificate judge_slice(std::size_t j, double bound, const std::vector<SeriesSample>& samples,
                                    double rel_tol) {
    BoundCertificate c;
    c.slice = j;
    c.bound = bound;
    c.samples = samples.size();
    std::size_t max_terms = 0, unconverged = 0;
    for (const auto& s : samples) {
        c.measured_ratio = std::max(c.measured_ratio, s.ratio);
        max_terms = std::max(max_terms, s.terms);
        if (s.status != SeriesStatus::converged) ++unconverged;
    }
    c.margin = bound - c.measured_ratio;
    if (c.measured_ratio > bound * (1 + rel_tol))
        c.status = CertificateStatus::invalid;
    else if (unconverged > 0)
        c.status = CertificateStatus::inconclusive;
    else
        c.status = CertificateStatus::valid;
    c.truncation = "max_terms=" + std::to_string(max_terms) + " unconverged=" + std::to_string(unconverged);
    return c;
}

/// Continuous-mode certification: per-slice series samples against
/// theorem_bound(eta, beta, j) with tolerance 10 * quad_tol.
inline std::vector<BoundCertificate> certify_sampled(const SliceConstants& c,
                                                     const std::vector<std::vector<SeriesSample>>& per_slice,
                                                     double quad_tol) {
    if (!(c.eta < 1)) throw domain_error("local smallness fails: eta >= 1");
    std::vector<BoundCertificate> out;
    for (std::size_t j = 0; j < per_slice.size(); ++j) {
        auto cert = judge_slice(j + 1, theorem_bound(c.eta, c.beta, long(j + 1)), per_slice[j], 10 * quad_tol);
        cert.eta = c.eta;
        cert.beta = c.beta;
        cert.provenance = c.provenance;
        out.push_back(std::move(cert));
    }
    return out;
}

/// Matrix-mode certification against the exact Neumann sum on A_k.
/// Exact scalars compare exactly; doubles allow bound * (1 + 1e-9).
template <class T>
std::vector<BoundCertificate> certify(const BasicMatrixKernel<T>& k, std::span<const T> f,
                                      const AbsorbingChain& chain, const T& eta, const T& beta) {
    detail::check_dim(k.size(), f.size(), "certify");
    if (!(eta < 1)) throw domain_error("local smallness fails: eta >= 1");
    const StateSet& top = chain.top();
    const auto ka = restrict(k, top, Side::both);
    std::vector<T> fa(f.begin(), f.end());
    for (std::size_t x = 0; x < fa.size(); ++x)
        if (!top.contains(x)) fa[x] = T(0);
    const auto g = exact_neumann_sum(ka, std::span<const T>(fa));
    std::vector<BoundCertificate> out;
    for (std::size_t j = 0; j < chain.length(); ++j) {
        BoundCertificate c;
        c.slice = j + 1;
        c.eta = to_double(eta);
        c.beta = to_double(beta);
        const T bound = theorem_bound<T>(eta, beta, long(j + 1));
        c.bound = to_double(bound);
        c.samples = chain.slice(j).count();
        c.provenance = "enumeration";
        if (!g) {
            c.status = CertificateStatus::inconclusive;
            c.measured_ratio = inf;
            c.margin = -inf;
            c.truncation = "series diverges on A_k";
            out.push_back(std::move(c));
            continue;
        }
        c.truncation = "exact";
        const auto measured = detail::ratio_sup(std::span<const T>(*g), f, chain.slice(j));
        if (!measured) {
            c.measured_ratio = inf;
            c.margin = -inf;
            c.status = CertificateStatus::invalid;
        } else {
            c.measured_ratio = to_double(*measured);
            c.margin = c.bound - c.measured_ratio;
            bool ok;
            if constexpr (scalar_traits<T>::exact)
                ok = *measured <= bound;
            else
                ok = *measured <= bound * (1 + 1e-9);
            c.status = ok ? CertificateStatus::valid : CertificateStatus::invalid;
        }
        out.push_back(std::move(c));
    }
    return out;
}

template <class T>
std::vector<BoundCertificate> certify(const BasicMatrixKernel<T>& k, const std::vector<T>& f,
                                      const AbsorbingChain& chain, const T& eta, const T& beta) {
    return certify(k, std::span<const T>(f), chain, eta, beta);
}

/// Certification with constants estimated by enumeration.
template <class T>
std::vector<BoundCertificate> certify(const BasicMatrixKernel<T>& k, const std::vector<T>& f,
                                      const AbsorbingChain& chain, const ExactSliceConstants<T>& c) {
    if (!c.eta) throw domain_error("local smallness fails: eta is infinite");
    if (!c.beta) throw domain_error("global boundedness fails: beta is infinite");
    return certify(k, std::span<const T>(f), chain, *c.eta, *c.beta);
}

/// Overall verdict for a set of certificates, ordered by severity.
inline CertificateStatus worst_status(const std::vector<BoundCertificate>& certs) {
    bool inconclusive = false;
    for (const auto& c : certs) {
        if (c.status == CertificateStatus::invalid) return CertificateStatus::invalid;
        if (c.status != CertificateStatus::valid) inconclusive = true;
    }
    return inconclusive ? CertificateStatus::inconclusive : CertificateStatus::valid;
}

}  // namespace kp
