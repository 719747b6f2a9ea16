#pragma once

// Adaptive Gauss-Kronrod (7/15) integration with endpoint substitutions and
// maps for unbounded ranges, iterated tensor integration, and seeded Monte
// Carlo. Scalar and vector-valued integrands share one adaptive core.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "kp/core.hpp"

namespace kp::quad {

enum class Substitution { none, sqrt, power };
enum class Endpoint { left, right, both };

struct QuadratureSpec {
    double rel_tol = 1e-10;
    double abs_tol = 1e-13;
    int max_subdivisions = 400;
    Substitution substitution = Substitution::none;
    double power = 2;  // exponent for Substitution::power
    Endpoint endpoint = Endpoint::left;
    double truncation_radius = 0;  // > 0 truncates unbounded ends instead of mapping them
    double map_scale = 1;          // x = a + map_scale * w / (1 - w) on unbounded ends

    QuadratureSpec with(Substitution s, Endpoint e, double gamma = 2) const {
        QuadratureSpec c = *this;
        c.substitution = s;
        c.endpoint = e;
        c.power = gamma;
        return c;
    }

    QuadratureSpec plain() const { return with(Substitution::none, Endpoint::left); }

    QuadratureSpec tolerances(double rel, double abs) const {
        QuadratureSpec c = *this;
        c.rel_tol = rel;
        c.abs_tol = abs;
        return c;
    }

    void validate() const {
        if (!(rel_tol > 0) || !(abs_tol > 0)) throw input_error("quadrature tolerances must be > 0");
        if (max_subdivisions < 1) throw input_error("max_subdivisions must be >= 1");
        if (substitution == Substitution::power && !(power >= 1))
            throw input_error("power substitution exponent must be >= 1");
        if (!(map_scale > 0)) throw input_error("map_scale must be > 0");
    }

    double exponent() const {
        switch (substitution) {
            case Substitution::none: return 1;
            case Substitution::sqrt: return 2;
            case Substitution::power: return power;
        }
        return 1;
    }
};

struct VecEstimate {
    std::vector<double> value;
    std::vector<double> error;
    bool converged = true;

    explicit VecEstimate(std::size_t m = 0) : value(m, 0.0), error(m, 0.0) {}

    void add(const VecEstimate& o) {
        for (std::size_t k = 0; k < value.size(); ++k) {
            value[k] += o.value[k];
            error[k] += o.error[k];
        }
        converged = converged && o.converged;
    }
};

namespace detail {

inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights belonging to xgk[1], xgk[3], xgk[5], xgk[7].
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Internal integrand form: g(x, val[m], inner_err[m]).
using VecFn = std::function<void(double, double*, double*)>;

struct Panel {
    double a, b, err;
    std::size_t slot;
};

// One Gauss-Kronrod panel. Writes kronrod value, |K - G| and the
// kronrod-weighted inner error per component.
inline void gk15(const VecFn& g, double a, double b, std::size_t m, double* val, double* gerr,
                 double* ierr, std::vector<double>& scratch) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    scratch.assign(5 * m, 0.0);
    double* fv = scratch.data();
    double* fe = fv + m;
    double* fv2 = fe + m;
    double* fe2 = fv2 + m;
    double* gsum = fe2 + m;
    std::fill(val, val + m, 0.0);
    std::fill(ierr, ierr + m, 0.0);
    g(c, fv, fe);
    for (std::size_t k = 0; k < m; ++k) {
        val[k] = wgk[7] * fv[k];
        gsum[k] = wg[3] * fv[k];
        ierr[k] = wgk[7] * std::abs(fe[k]);
    }
    for (int i = 0; i < 7; ++i) {
        const double dx = h * xgk[i];
        std::fill(fe, fe + m, 0.0);
        std::fill(fe2, fe2 + m, 0.0);
        g(c - dx, fv, fe);
        g(c + dx, fv2, fe2);
        for (std::size_t k = 0; k < m; ++k) {
            const double pair = fv[k] + fv2[k];
            val[k] += wgk[i] * pair;
            ierr[k] += wgk[i] * (std::abs(fe[k]) + std::abs(fe2[k]));
            if (i % 2 == 1) gsum[k] += wg[i / 2] * pair;
        }
    }
    for (std::size_t k = 0; k < m; ++k) {
        val[k] *= h;
        ierr[k] *= std::abs(h);
        gerr[k] = std::abs(val[k] - h * gsum[k]);
    }
}

// Global adaptive bisection on [a, b] (finite). Bisects the panel with the
// largest discretization error until the summed error meets the tolerance.
inline VecEstimate adaptive(const VecFn& g, double a, double b, std::size_t m,
                            const QuadratureSpec& spec) {
    VecEstimate out(m);
    if (a == b) return out;
    std::vector<double> pool;  // per panel: val[m], gerr[m], ierr[m]
    std::vector<Panel> heap;
    std::vector<double> scratch;
    auto by_err = [](const Panel& x, const Panel& y) { return x.err < y.err; };

    // Running totals of value and |K - G| per component over live panels.
    std::vector<double> tv(m, 0.0), te(m, 0.0);
    auto make = [&](double lo, double hi) {
        const std::size_t slot = pool.size();
        pool.resize(slot + 3 * m);
        gk15(g, lo, hi, m, &pool[slot], &pool[slot + m], &pool[slot + 2 * m], scratch);
        double e = 0;
        for (std::size_t k = 0; k < m; ++k) {
            e = std::max(e, pool[slot + m + k]);
            tv[k] += pool[slot + k];
            te[k] += pool[slot + m + k];
        }
        if (!std::isfinite(e)) e = inf;
        heap.push_back({lo, hi, e, slot});
        std::push_heap(heap.begin(), heap.end(), by_err);
    };

    make(a, b);
    int subdivisions = 0;
    bool converged = false;
    std::vector<Panel> frozen;  // panels too narrow to bisect further
    double frozen_err = 0;
    while (true) {
        double scale = 0, terr = 0;
        for (std::size_t k = 0; k < m; ++k) {
            scale = std::max(scale, std::abs(tv[k]));
            terr = std::max(terr, te[k]);
        }
        const double tol = std::max(spec.abs_tol, spec.rel_tol * scale);
        if (std::isfinite(terr) && terr <= tol) {
            converged = frozen_err <= tol;
            break;
        }
        if (heap.empty() || subdivisions >= spec.max_subdivisions) break;
        std::pop_heap(heap.begin(), heap.end(), by_err);
        Panel worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > std::min(worst.a, worst.b) && mid < std::max(worst.a, worst.b))) {
            // Too narrow to bisect: keep its value, stop refining it.
            frozen.push_back(worst);
            frozen_err += worst.err;
            for (std::size_t k = 0; k < m; ++k) te[k] -= pool[worst.slot + m + k];
            continue;
        }
        for (std::size_t k = 0; k < m; ++k) {
            tv[k] -= pool[worst.slot + k];
            te[k] -= pool[worst.slot + m + k];
        }
        make(worst.a, mid);
        make(mid, worst.b);
        ++subdivisions;
    }
    for (const auto& p : frozen) heap.push_back(p);
    for (const auto& p : heap)
        for (std::size_t k = 0; k < m; ++k) {
            out.value[k] += pool[p.slot + k];
            out.error[k] += pool[p.slot + m + k] + pool[p.slot + 2 * m + k];
        }
    out.converged = converged;
    return out;
}

// Jacobian-scaled wrapper: h(w) = g(x(w)) * dx/dw.
inline VecFn transformed(const VecFn& g, std::size_t m, std::function<double(double)> x_of,
                         std::function<double(double)> jac) {
    return [g, m, x_of, jac](double w, double* val, double* err) {
        const double j = jac(w);
        if (j == 0 || !std::isfinite(j)) {
            std::fill(val, val + m, 0.0);
            return;
        }
        g(x_of(w), val, err);
        for (std::size_t k = 0; k < m; ++k) {
            val[k] *= j;
            err[k] *= std::abs(j);
        }
    };
}

// Integrates over one piece, applying endpoint substitutions and the
// unbounded-range map.
inline VecEstimate piece(const VecFn& g, double a, double b, std::size_t m, bool left_sing,
                         bool right_sing, const QuadratureSpec& spec) {
    const double gamma = spec.exponent();
    const bool subst = gamma > 1;
    left_sing = left_sing && subst;
    right_sing = right_sing && subst;
    const double L = spec.map_scale;
    const bool a_inf = std::isinf(a), b_inf = std::isinf(b);

    if (a_inf && b_inf) {
        VecEstimate r = piece(g, -inf, 0.0, m, false, false, spec);
        r.add(piece(g, 0.0, inf, m, false, false, spec));
        return r;
    }
    if (b_inf) {
        if (left_sing) {
            VecEstimate r = piece(g, a, a + L, m, true, false, spec);
            r.add(piece(g, a + L, inf, m, false, false, spec));
            return r;
        }
        auto h = transformed(
            g, m, [a, L](double w) { return a + L * w / (1 - w); },
            [L](double w) { return L / ((1 - w) * (1 - w)); });
        return adaptive(h, 0.0, 1.0, m, spec);
    }
    if (a_inf) {
        if (right_sing) {
            VecEstimate r = piece(g, -inf, b - L, m, false, false, spec);
            r.add(piece(g, b - L, b, m, false, true, spec));
            return r;
        }
        auto h = transformed(
            g, m, [b, L](double w) { return b - L * w / (1 - w); },
            [L](double w) { return L / ((1 - w) * (1 - w)); });
        return adaptive(h, 0.0, 1.0, m, spec);
    }
    if (left_sing && right_sing) {
        const double mid = 0.5 * (a + b);
        VecEstimate r = piece(g, a, mid, m, true, false, spec);
        r.add(piece(g, mid, b, m, false, true, spec));
        return r;
    }
    const double len = b - a;
    if (left_sing) {
        auto h = transformed(
            g, m, [a, len, gamma](double w) { return a + len * std::pow(w, gamma); },
            [len, gamma](double w) { return len * gamma * std::pow(w, gamma - 1); });
        return adaptive(h, 0.0, 1.0, m, spec);
    }
    if (right_sing) {
        auto h = transformed(
            g, m, [b, len, gamma](double w) { return b - len * std::pow(w, gamma); },
            [len, gamma](double w) { return len * gamma * std::pow(w, gamma - 1); });
        return adaptive(h, 0.0, 1.0, m, spec);
    }
    return adaptive(g, a, b, m, spec);
}

inline VecEstimate integrate_points(const VecFn& g, std::vector<double> points, std::size_t m,
                                    const QuadratureSpec& spec) {
    spec.validate();
    VecEstimate out(m);
    if (points.size() < 2) return out;
    const double a = points.front(), b = points.back();
    if (std::isnan(a) || std::isnan(b)) throw input_error("integration limit is NaN");
    double sign = 1;
    if (a > b) {
        std::reverse(points.begin(), points.end());
        sign = -1;
    }
    double lo = points.front(), hi = points.back();
    if (spec.truncation_radius > 0) {
        const double R = spec.truncation_radius;
        if (std::isinf(lo)) lo = std::isinf(hi) ? -R : hi - R;
        if (std::isinf(hi)) hi = std::isinf(points.front()) ? R : lo + R;
    }
    std::vector<double> cuts{lo};
    for (double p : points)
        if (std::isfinite(p) && p > lo && p < hi) cuts.push_back(p);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const bool sing_left = spec.endpoint != Endpoint::right;
    const bool sing_right = spec.endpoint != Endpoint::left;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i] == cuts[i + 1]) continue;
        out.add(piece(g, cuts[i], cuts[i + 1], m, sing_left && i == 0,
                      sing_right && i + 2 == cuts.size(), spec));
    }
    if (sign < 0)
        for (auto& v : out.value) v = -v;
    return out;
}

template <class F>
VecFn scalar_adapter(F& f) {
    return [&f](double x, double* val, double* err) {
        if constexpr (std::is_same_v<std::invoke_result_t<F&, double>, Estimate>) {
            const Estimate e = f(x);
            val[0] = e.value;
            err[0] = e.error;
        } else {
            val[0] = double(f(x));
            err[0] = 0;
        }
    };
}

template <class F>
VecFn vector_adapter(F& f, std::size_t m) {
    return [&f, m](double x, double* val, double* err) {
        if constexpr (std::is_invocable_v<F&, double, std::span<double>, std::span<double>>) {
            f(x, std::span<double>(val, m), std::span<double>(err, m));
        } else {
            f(x, std::span<double>(val, m));
        }
    };
}

}  // namespace detail

/// Integrates f over [a, b] (either end may be infinite). f returns a double,
/// or an Estimate when it is itself a quadrature; inner errors are integrated
/// into the reported error. Failure to meet the tolerance clears `converged`.
template <class F>
Estimate integrate_1d(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
    auto g = detail::scalar_adapter(f);
    const VecEstimate r = detail::integrate_points(g, {a, b}, 1, spec);
    return {r.value[0], r.error[0], r.converged};
}

/// Like integrate_1d but with interior breakpoints where the integrand has
/// kinks or peaks. `points` must start at a and end at b.
template <class F>
Estimate integrate_1d(F&& f, std::vector<double> points, const QuadratureSpec& spec = {}) {
    auto g = detail::scalar_adapter(f);
    const VecEstimate r = detail::integrate_points(g, std::move(points), 1, spec);
    return {r.value[0], r.error[0], r.converged};
}

/// Vector-valued integrand f(x, out[m]) (optionally f(x, out, inner_err)).
template <class F>
VecEstimate integrate_1d_vec(F&& f, std::vector<double> points, std::size_t m,
                             const QuadratureSpec& spec = {}) {
    auto g = detail::vector_adapter(f, m);
    return detail::integrate_points(g, std::move(points), m, spec);
}

struct Box {
    std::vector<double> lo, hi;
    std::size_t dim() const { return lo.size(); }
};

/// Iterated integration over a box (dimension <= 4; the first axis is the
/// outermost). Per-axis specs override the common one. Inner error estimates
/// are integrated along the outer axes, so the reported error is the sum of
/// the per-axis bounds.
template <class F>
Estimate integrate_nd(F&& f, const Box& box, const QuadratureSpec& spec = {},
                      const std::vector<QuadratureSpec>& axis_specs = {}) {
    const std::size_t d = box.dim();
    if (box.hi.size() != d) throw input_error("box bounds have different dimensions");
    if (d > 4) throw input_error("tensor integration supports dimension <= 4; use mc_integrate");
    for (std::size_t i = 0; i < d; ++i)
        if (box.lo[i] == box.hi[i]) return {0.0, 0.0, true};
    std::vector<double> point(d);
    std::function<Estimate(std::size_t)> level = [&](std::size_t axis) -> Estimate {
        if (axis == d) return {double(f(std::span<const double>(point))), 0.0, true};
        const QuadratureSpec& s = axis < axis_specs.size() ? axis_specs[axis] : spec;
        return integrate_1d(
            [&, axis](double x) {
                point[axis] = x;
                return level(axis + 1);
            },
            box.lo[axis], box.hi[axis], s);
    };
    return level(0);
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MCSpec {
    std::size_t sample_count = 100000;
    std::uint64_t seed = 0;
};

struct MCEstimate {
    double value = 0;
    double std_error = 0;
    std::size_t samples = 0;
};

/// Isotropic normal proposal N(center, sigma^2 I).
struct GaussianSampler {
    std::vector<double> center;
    double sigma = 1;

    std::size_t dim() const { return center.size(); }
    void draw(CounterRng& rng, std::span<double> out) const {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + sigma * rng.normal();
    }
    double density(std::span<const double> x) const {
        double r2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center[i]) * (x[i] - center[i]);
        const double d = double(x.size());
        return std::pow(2 * pi * sigma * sigma, -d / 2) * std::exp(-r2 / (2 * sigma * sigma));
    }
};

struct UniformBoxSampler {
    Box box;

    std::size_t dim() const { return box.dim(); }
    void draw(CounterRng& rng, std::span<double> out) const {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.uniform(box.lo[i], box.hi[i]);
    }
    double density(std::span<const double> x) const {
        double vol = 1;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < box.lo[i] || x[i] > box.hi[i]) return 0;
            vol *= box.hi[i] - box.lo[i];
        }
        return 1 / vol;
    }
};

/// Importance-sampled mean of f/density. Sample i draws from its own counter
/// stream and chunk sums are reduced in index order, so the result is
/// bit-identical for a given seed regardless of thread count.
template <class F, class Sampler>
MCEstimate mc_integrate(F&& f, const Sampler& sampler, const MCSpec& spec) {
    if (spec.sample_count < 2) throw input_error("mc_integrate needs at least 2 samples");
    constexpr std::size_t chunk = 4096;
    const std::size_t n = spec.sample_count;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<double> sum(chunks, 0.0), sum2(chunks, 0.0);
    std::vector<std::size_t> usable(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> x(sampler.dim());
        for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            CounterRng rng(spec.seed, i);
            sampler.draw(rng, x);
            const double q = sampler.density(x);
            if (!(q > 0) || !std::isfinite(q)) continue;
            const double w = double(f(std::span<const double>(x))) / q;
            sum[c] += w;
            sum2[c] += w * w;
            ++usable[c];
        }
    });
    double s = 0, s2 = 0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        s += sum[c];
        s2 += sum2[c];
        used += usable[c];
    }
    if (used == 0) throw convergence_error("mc_integrate: every sample fell where the proposal density underflows");
    const double mean = s / double(n);
    const double var = std::max(0.0, s2 / double(n) - mean * mean);
    return {mean, std::sqrt(var / double(n - 1)), n};
}

}  // namespace kp::quad
