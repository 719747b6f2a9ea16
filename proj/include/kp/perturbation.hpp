#pragma once

// Schroedinger perturbation of a space-time density by a measure:
// p_0 = p, p_n(s,x,t,y) = int p_{n-1}(s,x,u,z) p(u,z,t,y) dmu(u,z), p^mu = sum p_n.
//
// The series engine works with the ratio g_n = p_n(., ., t, y) / p(., ., t, y)
// stored at tensor Gauss-Legendre nodes in (u, z). One step is
// g_n(s,x) = int w(s,x;u,z) g_{n-1}(u,z) dmu(u,z),
// w = p(s,x,u,z) p(u,z,t,y) / p(s,x,t,y),
// and every row of the step is assembled by product integration: w is
// integrated adaptively against the piecewise polynomial interpolant of g, so
// the singular and sharply peaked parts of w never meet a fixed rule.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kp/bounds.hpp"
#include "kp/core.hpp"
#include "kp/measure.hpp"
#include "kp/quadrature.hpp"
#include "kp/spacetime.hpp"

namespace kp {

/// strict: atoms enter through strictly increasing time chains (p^mu).
/// alternative: the operator with the extra branch rho({s}) g(s, x), which
/// counts nondecreasing chains.
enum class AtomSemantics { strict, alternative };

inline const char* to_string(AtomSemantics a) { return a == AtomSemantics::strict ? "strict" : "alternative"; }

struct GridSpec {
    int u_order = 6;         // interpolation nodes per time panel
    int z_order = 6;         // interpolation nodes per space panel
    int u_panels = 4;        // time panels across [min s, t], before splitting at atoms
    double z_panel = 0;      // space panel width; 0 picks it from the kernel scale
    int max_z_panels = 40;
    double z_margin = 3;     // grid reaches this many kernel scales beyond the targets
    int u_quad_order = 8;    // Gauss-Legendre nodes per time piece in row assembly
    int z_grading = 4;       // extra panel levels towards spatial singularities of q
    int u_grading = 3;       // extra panel levels towards the end time t
};

struct SeriesOptions {
    double quad_tol = 1e-8;
    double quad_abs_tol = 0;  // terms below this absolute size also stop the series
    std::size_t max_terms = 120;
    AtomSemantics semantics = AtomSemantics::strict;
    GridSpec grid;
};

struct SeriesResult {
    double value = 0;
    std::vector<double> terms;
    std::size_t truncation_index = 0;
    double tail_estimate = 0;
    double quad_error_estimate = 0;
    SeriesStatus status = SeriesStatus::converged;
    double p = 0;  // unperturbed p(s, x, t, y)

    /// p^mu / p, or 1 when p vanishes.
    double ratio() const { return p > 0 ? value / p : 1.0; }
};

struct SeriesTarget {
    double s = 0;
    double x = 0;
};

namespace detail {

struct GaussLegendre {
    std::vector<double> x, w, bary;  // nodes and weights on [-1, 1], barycentric weights

    explicit GaussLegendre(int n) : x(std::size_t(n)), w(std::size_t(n)), bary(std::size_t(n)) {
        for (int i = 0; i < n; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                if (n == 1) {
                    p1 = z;
                    p0 = 1;
                }
                dp = n * (z * p1 - p0) / (z * z - 1);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = z;
            dp = n * (z * p1 - p0) / (z * z - 1);
            x[std::size_t(i)] = -z;
            w[std::size_t(i)] = 2 / ((1 - z * z) * dp * dp);
        }
        if (n == 1) {
            x[0] = 0;
            w[0] = 2;
        }
        for (std::size_t j = 0; j < x.size(); ++j) {
            double prod = 1;
            for (std::size_t k = 0; k < x.size(); ++k)
                if (k != j) prod *= x[j] - x[k];
            bary[j] = 1 / prod;
        }
    }

    /// Lagrange basis values at reference point r in [-1, 1].
    void basis(double r, double* out) const {
        const std::size_t n = x.size();
        for (std::size_t j = 0; j < n; ++j)
            if (r == x[j]) {
                std::fill(out, out + n, 0.0);
                out[j] = 1;
                return;
            }
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = bary[j] / (r - x[j]);
            sum += out[j];
        }
        for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
    }
};

/// Piecewise polynomial interpolation on panels [b_k, b_{k+1}] with GL nodes.
struct PanelGrid {
    std::vector<double> bounds;
    const GaussLegendre* rule = nullptr;

    std::size_t panels() const { return bounds.size() - 1; }
    std::size_t order() const { return rule->x.size(); }
    std::size_t size() const { return panels() * order(); }
    double lo() const { return bounds.front(); }
    double hi() const { return bounds.back(); }

    double node(std::size_t i) const {
        const std::size_t k = i / order(), j = i % order();
        const double a = bounds[k], b = bounds[k + 1];
        return 0.5 * (a + b) + 0.5 * (b - a) * rule->x[j];
    }

    /// Panel containing v; right-continuous at interior boundaries.
    std::size_t panel_of(double v) const {
        auto it = std::upper_bound(bounds.begin(), bounds.end(), v);
        std::size_t k = it == bounds.begin() ? 0 : std::size_t(it - bounds.begin()) - 1;
        return std::min(k, panels() - 1);
    }

    /// Basis values for v clamped to [lo, hi]; returns the first node index.
    std::size_t basis(double v, double* out) const {
        v = std::clamp(v, lo(), hi());
        const std::size_t k = panel_of(v);
        const double a = bounds[k], b = bounds[k + 1];
        rule->basis((2 * v - a - b) / (b - a), out);
        return k * order();
    }
};

inline std::vector<double> subdivide(std::vector<double> cuts, double max_width) {
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<double> out{cuts.front()};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const int n = std::max(1, int(std::ceil((b - a) / max_width - 1e-9)));
        for (int k = 1; k <= n; ++k) out.push_back(k == n ? b : a + (b - a) * k / n);
    }
    return out;
}

// Smoothstep map (0,1) -> (0,1) with vanishing derivative at both ends; turns
// (u - s)^{-1/2} and (t - u)^{-1/2} behaviour into bounded integrands.
inline double smooth_map(double w) { return w * w * (3 - 2 * w); }
inline double smooth_jac(double w) { return 6 * w * (1 - w); }
inline double smooth_inverse(double v) {
    double lo = 0, hi = 1;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (smooth_map(mid) < v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Row {
    std::size_t start = 0;
    std::vector<double> values;
    double error = 0;

    double dot(const std::vector<double>& g) const {
        double r = 0;
        for (std::size_t i = 0; i < values.size(); ++i) r += values[i] * g[start + i];
        return r;
    }
};

/// Product-integration Nystrom engine in d = 1.
class NystromEngine {
public:
    struct Setup {
        const SpaceTimeKernel* p = nullptr;
        const PerturbingMeasure* mu = nullptr;
        bool ratio = true;  // ratio mode towards (t, y); otherwise direct mode on a box
        bool radial = false;  // d = 2, y = 0, radial density: space variable is |z|
        double t = 0, y = 0;
        double u_lo = 0, u_hi = 0, z_lo = 0, z_hi = 0;
        AtomSemantics semantics = AtomSemantics::strict;
        GridSpec grid;
        double tol = 1e-8;
    };

    explicit NystromEngine(const Setup& st)
        : st_(st), urule_(st.grid.u_order), zrule_(st.grid.z_order), qrule_(st.grid.u_quad_order) {
        if (st.radial) {
            if (st.p->dim() != 2 || !st.ratio || st.y != 0 || st.p->forward_cone())
                throw input_error("radial series needs a d = 2 kernel and the end point y = 0");
            const DensityKind k = st.mu->density().kind;
            if (st.mu->has_density() && k != DensityKind::constant && k != DensityKind::power)
                throw input_error("radial series needs a radial density");
        } else if (st.p->dim() != 1) {
            throw input_error("series engine supports d = 1 kernels");
        }
        const PerturbingMeasure& mu = *st.mu;
        const double span = st.u_hi - st.u_lo;
        std::vector<double> ucuts{st.u_lo, st.u_hi};
        for (const Atom& a : mu.atoms())
            if (a.u > st.u_lo && a.u < st.u_hi) ucuts.push_back(a.u);
        for (double b : {mu.support().lo, mu.support().hi})
            if (b > st.u_lo && b < st.u_hi) ucuts.push_back(b);
        if (mu.has_density())
            for (double b : mu.density().u_breaks())
                if (b > st.u_lo && b < st.u_hi) ucuts.push_back(b);
        for (int k = 1; k <= st.grid.u_grading; ++k) {
            const double v = st.u_hi - span * std::ldexp(1.0 / std::max(1, st.grid.u_panels), -k);
            if (v > st.u_lo) ucuts.push_back(v);
        }
        ugrid_.rule = &urule_;
        ugrid_.bounds = subdivide(ucuts, span / std::max(1, st.grid.u_panels));

        std::vector<double> zcuts{st.z_lo, st.z_hi};
        if (mu.has_density())
            for (double b : mu.density().z_breaks(0.0))
                if (b > st.z_lo && b < st.z_hi) zcuts.push_back(b);
        double zw = st.grid.z_panel;
        if (!(zw > 0)) {
            zw = st.p->forward_cone() ? (st.z_hi - st.z_lo) / 8 : st.p->spatial_scale(0.5 * span);
            if (!(zw > 0)) zw = (st.z_hi - st.z_lo) / 8;
        }
        zw = std::max(zw, (st.z_hi - st.z_lo) / std::max(1, st.grid.max_z_panels));
        // Geometric refinement towards points where q is singular.
        if (mu.has_density())
            for (double b : mu.density().z_breaks(0.0))
                for (int k = 1; k <= st.grid.z_grading; ++k)
                    for (double v : {b - zw * std::ldexp(1.0, -k), b + zw * std::ldexp(1.0, -k)})
                        if (v > st.z_lo && v < st.z_hi) zcuts.push_back(v);
        zgrid_.rule = &zrule_;
        zgrid_.bounds = subdivide(zcuts, zw);

        for (const Atom& a : mu.atoms())
            if (a.u >= st.u_lo && a.u < st.u_hi) atoms_.push_back(a);
        nz_ = zgrid_.size();
        npanel_ = ugrid_.size() * nz_;
        n_ = npanel_ + atoms_.size() * nz_;
    }

    std::size_t size() const { return n_; }
    std::size_t z_nodes() const { return nz_; }
    std::size_t u_nodes() const { return ugrid_.size(); }

    /// (s, x) of node i.
    std::pair<double, double> node(std::size_t i) const {
        if (i < npanel_) return {ugrid_.node(i / nz_), zgrid_.node(i % nz_)};
        const std::size_t a = (i - npanel_) / nz_;
        return {atoms_[a].u, zgrid_.node((i - npanel_) % nz_)};
    }

    /// One step of the operator at (s, x) as a linear functional of node values.
    Row row(double s, double x) const {
        std::vector<double> dense(n_, 0.0);
        double err = 0;
        const PerturbingMeasure& mu = *st_.mu;
        const double u_end = st_.ratio ? st_.t : st_.u_hi;
        const double lp0 = st_.ratio ? log_p(s, x, st_.t, st_.y) : 0.0;
        if (st_.ratio && lp0 == -inf) return {};
        std::vector<double> Z(nz_), Ze(nz_), L(ugrid_.order());

        if (mu.has_density()) {
            const double a = std::max(s, mu.support().lo), b = std::min(u_end, mu.support().hi);
            if (b > a) {
                std::vector<double> cuts{0.0, 1.0}, singular;
                for (double v : ugrid_.bounds)
                    if (v > a && v < b) cuts.push_back(smooth_inverse((v - a) / (b - a)));
                for (double v : mu.density().u_breaks())
                    if (v > a && v < b) singular.push_back(smooth_inverse((v - a) / (b - a)));
                cuts.insert(cuts.end(), singular.begin(), singular.end());
                std::sort(cuts.begin(), cuts.end());
                auto is_singular = [&](double w) {
                    return std::find(singular.begin(), singular.end(), w) != singular.end();
                };
                // Pieces next to a time where q is singular are refined geometrically towards it.
                std::vector<std::pair<double, double>> pieces;
                for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                    const double w0 = cuts[c], w1 = cuts[c + 1];
                    if (!(w1 > w0)) continue;
                    const bool left = is_singular(w0), right = is_singular(w1);
                    if (!left && !right) {
                        pieces.emplace_back(w0, w1);
                        continue;
                    }
                    const double mid = left && right ? 0.5 * (w0 + w1) : (left ? w1 : w0);
                    auto grade = [&](double from, double to) {
                        double d = std::abs(to - from);
                        double hi = to;
                        for (int level = 0; level < 7; ++level) {
                            d *= 0.5;
                            const double lo = from + (to > from ? d : -d);
                            pieces.emplace_back(std::min(lo, hi), std::max(lo, hi));
                            hi = lo;
                        }
                        pieces.emplace_back(std::min(from, hi), std::max(from, hi));
                    };
                    if (left) grade(w0, mid);
                    if (right) grade(w1, mid);
                }
                for (const auto& [w0, w1] : pieces) {
                    for (std::size_t q = 0; q < qrule_.x.size(); ++q) {
                        const double w = 0.5 * (w0 + w1) + 0.5 * (w1 - w0) * qrule_.x[q];
                        const double u = a + (b - a) * smooth_map(w);
                        const double om = (b - a) * smooth_jac(w) * 0.5 * (w1 - w0) * qrule_.w[q];
                        if (!(u > s) || !(u < u_end) || om == 0) continue;
                        space_integral(s, x, u, lp0, true, Z, Ze);
                        const std::size_t base = ugrid_.basis(u, L.data());
                        for (std::size_t j = 0; j < L.size(); ++j) {
                            const double c2 = om * L[j];
                            if (c2 == 0) continue;
                            double* r = &dense[(base + j) * nz_];
                            for (std::size_t k = 0; k < nz_; ++k) r[k] += c2 * Z[k];
                            for (std::size_t k = 0; k < nz_; ++k) err += std::abs(c2) * Ze[k];
                        }
                    }
                }
            }
        }
        for (std::size_t ai = 0; ai < atoms_.size(); ++ai) {
            const Atom& at = atoms_[ai];
            double* r = &dense[npanel_ + ai * nz_];
            if (at.u > s && at.u < u_end) {
                space_integral(s, x, at.u, lp0, false, Z, Ze);
                for (std::size_t k = 0; k < nz_; ++k) {
                    r[k] += at.eta * Z[k];
                    err += at.eta * Ze[k];
                }
            } else if (at.u == s && st_.semantics == AtomSemantics::alternative) {
                std::vector<double> M(zgrid_.order());
                const std::size_t base = zgrid_.basis(x, M.data());
                if (st_.ratio || x <= st_.z_hi)
                    for (std::size_t j = 0; j < M.size(); ++j) r[base + j] += at.eta * M[j];
            }
        }
        Row out;
        out.error = err;
        std::size_t first = 0;
        while (first < n_ && dense[first] == 0) ++first;
        out.start = first;
        out.values.assign(dense.begin() + std::ptrdiff_t(first), dense.end());
        return out;
    }

private:
    double log_p(double s, double x, double t, double y) const {
        if (!st_.radial) return st_.p->log_at(s, x, t, y);
        const double a[2] = {x, 0.0}, b[2] = {y, 0.0};
        return st_.p->log_density(s, a, t, b);
    }

    // Z[k] = int w(s,x;u,z) [q(u,z)] M_k(z) dz over the z-basis (with clamping).
    void space_integral(double s, double x, double u, double lp0, bool with_q, std::vector<double>& Z,
                        std::vector<double>& Ze) const {
        std::fill(Z.begin(), Z.end(), 0.0);
        std::fill(Ze.begin(), Ze.end(), 0.0);
        if (st_.radial) {
            radial_space_integral(s, x, u, lp0, with_q, Z, Ze);
            return;
        }
        const SpaceTimeKernel& p = *st_.p;
        const PerturbingMeasure& mu = *st_.mu;
        const bool cone = p.forward_cone();
        auto weight = [&](double z) {
            double lw = p.log_at(s, x, u, z);
            if (lw == -inf) return 0.0;
            if (st_.ratio) {
                const double l2 = p.log_at(u, z, st_.t, st_.y);
                if (l2 == -inf) return 0.0;
                lw += l2 - lp0;
            }
            double v = std::exp(lw);
            if (with_q) v *= mu.q(u, z);
            return v;
        };
        double zl = cone ? x : -inf;
        double zh = st_.ratio ? (cone ? st_.y : inf) : st_.z_hi;
        if (!(zh > zl)) return;
        std::vector<double> br;
        const double a = p.spatial_scale(u - s);
        for (double k : {0.0, 1.0, -1.0, 6.0, -6.0}) br.push_back(x + k * a);
        if (st_.ratio) {
            const double b = p.spatial_scale(st_.t - u);
            for (double k : {0.0, 1.0, -1.0, 6.0, -6.0}) br.push_back(st_.y + k * b);
            br.push_back(x + (u - s) / (st_.t - s) * (st_.y - x));
        }
        if (with_q)
            for (double v : mu.density().z_breaks(u)) br.push_back(v);
        const quad::QuadratureSpec spec = quad::QuadratureSpec{}.tolerances(st_.tol, st_.tol * 1e-3);
        const std::size_t m = zgrid_.order();
        std::vector<double> M(m);

        auto tail = [&](double lo, double hi, double at) {
            if (!(hi > lo)) return;
            const Estimate e = quad::integrate_1d(weight, sorted_points(lo, hi, br), spec);
            const std::size_t base = zgrid_.basis(at, M.data());
            for (std::size_t j = 0; j < m; ++j) {
                Z[base + j] += e.value * M[j];
                Ze[base + j] += e.error * std::abs(M[j]);
            }
        };
        tail(zl, std::min(zh, zgrid_.lo()), zgrid_.lo());
        if (st_.ratio) tail(std::max(zl, zgrid_.hi()), zh, zgrid_.hi());

        for (std::size_t k = 0; k < zgrid_.panels(); ++k) {
            const double lo = std::max(zgrid_.bounds[k], zl), hi = std::min(zgrid_.bounds[k + 1], zh);
            if (!(hi > lo)) continue;
            const double pa = zgrid_.bounds[k], pb = zgrid_.bounds[k + 1];
            auto f = [&](double z, std::span<double> out) {
                const double v = weight(z);
                if (v == 0) {
                    std::fill(out.begin(), out.end(), 0.0);
                    return;
                }
                zrule_.basis((2 * z - pa - pb) / (pb - pa), out.data());
                for (double& o : out) o *= v;
            };
            const quad::VecEstimate e = quad::integrate_1d_vec(f, sorted_points(lo, hi, br), m, spec);
            for (std::size_t j = 0; j < m; ++j) {
                Z[k * m + j] += e.value[j];
                Ze[k * m + j] += e.error[j];
            }
        }
    }

    // Polar version: x = (x, 0), z = r (cos a, sin a), y = 0. The angle is
    // integrated out and r carries the basis.
    void radial_space_integral(double s, double x, double u, double lp0, bool with_q, std::vector<double>& Z,
                               std::vector<double>& Ze) const {
        const SpaceTimeKernel& p = *st_.p;
        const PerturbingMeasure& mu = *st_.mu;
        const quad::QuadratureSpec spec = quad::QuadratureSpec{}.tolerances(st_.tol, st_.tol * 1e-3);
        const double origin[2] = {0.0, 0.0};
        auto weight = [&](double r) {
            if (!(r > 0)) return 0.0;
            const double zr[2] = {r, 0.0};
            const double l2 = p.log_density(u, zr, st_.t, origin);
            if (l2 == -inf) return 0.0;
            double qv = 1;
            if (with_q) {
                qv = mu.q(u, std::span<const double>(zr, 2));
                if (qv == 0) return 0.0;
            }
            return 2 * r * qv * p.planar_angle_integral(s, x, u, r, 0.1 * st_.tol) * std::exp(l2 - lp0);
        };
        std::vector<double> br;
        const double a = p.spatial_scale(u - s), b = p.spatial_scale(st_.t - u);
        for (double k : {0.0, 1.0, -1.0, 6.0, -6.0}) br.push_back(x + k * a);
        for (double k : {1.0, 6.0}) br.push_back(k * b);
        const std::size_t m = zgrid_.order();
        std::vector<double> M(m);
        const quad::QuadratureSpec first = spec.with(quad::Substitution::sqrt, quad::Endpoint::left);
        {
            const Estimate e = quad::integrate_1d(weight, sorted_points(zgrid_.hi(), inf, br), spec);
            const std::size_t base = zgrid_.basis(zgrid_.hi(), M.data());
            for (std::size_t j = 0; j < m; ++j) {
                Z[base + j] += e.value * M[j];
                Ze[base + j] += e.error * std::abs(M[j]);
            }
        }
        for (std::size_t k = 0; k < zgrid_.panels(); ++k) {
            const double pa = zgrid_.bounds[k], pb = zgrid_.bounds[k + 1];
            auto f = [&](double r, std::span<double> out) {
                const double v = weight(r);
                if (v == 0) {
                    std::fill(out.begin(), out.end(), 0.0);
                    return;
                }
                zrule_.basis((2 * r - pa - pb) / (pb - pa), out.data());
                for (double& o : out) o *= v;
            };
            const quad::VecEstimate e =
                quad::integrate_1d_vec(f, sorted_points(pa, pb, br), m, pa == 0 ? first : spec);
            for (std::size_t j = 0; j < m; ++j) {
                Z[k * m + j] += e.value[j];
                Ze[k * m + j] += e.error[j];
            }
        }
    }

    Setup st_;
    GaussLegendre urule_, zrule_, qrule_;
    PanelGrid ugrid_, zgrid_;
    std::vector<Atom> atoms_;
    std::size_t nz_ = 0, npanel_ = 0, n_ = 0;
};

/// Runs the iteration g_n = W g_{n-1} for all targets at once.
inline std::vector<SeriesResult> iterate_series(const NystromEngine& eng, const std::vector<Row>& target_rows,
                                                const std::vector<double>& g0_targets, std::vector<double> g,
                                                const std::vector<double>& scale, const SeriesOptions& opt,
                                                bool run_all = false) {
    const std::size_t N = eng.size();
    std::vector<Row> rows(N);
    parallel_for(N, [&](std::size_t i) {
        const auto [s, x] = eng.node(i);
        rows[i] = eng.row(s, x);
    });
    double max_row_err = 0;
    for (const Row& r : rows) max_row_err = std::max(max_row_err, r.error);

    const std::size_t T = target_rows.size();
    std::vector<SeriesResult> out(T);
    std::vector<double> partial(T), last(T);
    std::vector<int> rising(T, 0);
    std::vector<bool> done(T, false);
    for (std::size_t i = 0; i < T; ++i) {
        out[i].terms.push_back(scale[i] * g0_targets[i]);
        partial[i] = g0_targets[i];
        last[i] = std::abs(g0_targets[i]);
        out[i].status = SeriesStatus::truncated;
    }
    std::vector<double> next(N);
    for (std::size_t n = 1; n <= opt.max_terms; ++n) {
        double gnorm = 0;
        for (double v : g) gnorm = std::max(gnorm, std::abs(v));
        bool all_done = true;
        for (std::size_t i = 0; i < T; ++i) {
            if (done[i]) continue;
            const double term = target_rows[i].dot(g);
            out[i].terms.push_back(scale[i] * term);
            out[i].quad_error_estimate +=
                scale[i] * (target_rows[i].error + double(n - 1) * max_row_err) * gnorm;
            partial[i] += term;
            out[i].truncation_index = n;
            const double a = std::abs(term);
            rising[i] = a > last[i] ? rising[i] + 1 : 0;
            if (run_all) {
                out[i].tail_estimate = scale[i] * a;
            } else if (a == 0 || a < opt.quad_tol * std::abs(partial[i]) || scale[i] * a < opt.quad_abs_tol) {
                out[i].status = SeriesStatus::converged;
                const double r = last[i] > 0 ? a / last[i] : 0.0;
                out[i].tail_estimate = scale[i] * (r < 1 ? a * r / (1 - r) : a);
                done[i] = true;
            } else if (rising[i] >= 10) {
                out[i].status = SeriesStatus::diverging;
                out[i].tail_estimate = inf;
                done[i] = true;
            } else {
                out[i].tail_estimate = scale[i] * a;
            }
            last[i] = a;
            all_done = all_done && done[i];
        }
        if (all_done || n == opt.max_terms) break;
        parallel_for(N, [&](std::size_t i) { next[i] = rows[i].dot(g); });
        std::swap(g, next);
    }
    for (std::size_t i = 0; i < T; ++i) out[i].value = scale[i] * partial[i];
    return out;
}

inline std::vector<SeriesResult> series_impl(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double t,
                                             double y, const std::vector<SeriesTarget>& targets,
                                             const SeriesOptions& opt, bool run_all, bool radial = false) {
    if (!(opt.quad_tol > 0)) throw input_error("quad_tol must be > 0");
    std::vector<SeriesResult> out(targets.size());
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& tg = targets[i];
        if (radial) {
            const double a[2] = {tg.x, 0.0}, b[2] = {y, 0.0};
            out[i].p = tg.s < t ? p.density(tg.s, a, t, b) : 0.0;
        } else {
            out[i].p = tg.s < t ? p(tg.s, tg.x, t, y) : 0.0;
        }
        out[i].terms = {out[i].p};
        out[i].value = out[i].p;
        if (out[i].p > 0) live.push_back(i);
    }
    if (live.empty() || mu.is_zero() || opt.max_terms == 0) return out;

    NystromEngine::Setup st;
    st.p = &p;
    st.mu = &mu;
    st.radial = radial;
    st.t = t;
    st.y = y;
    st.semantics = opt.semantics;
    st.grid = opt.grid;
    st.tol = opt.quad_tol;
    st.u_lo = inf;
    double xmin = y, xmax = y;
    for (std::size_t i : live) {
        st.u_lo = std::min(st.u_lo, targets[i].s);
        xmin = std::min(xmin, targets[i].x);
        xmax = std::max(xmax, targets[i].x);
    }
    st.u_hi = t;
    if (p.forward_cone()) {
        st.z_lo = xmin;
        st.z_hi = y;
    } else {
        const double m = opt.grid.z_margin * p.spatial_scale(0.5 * (t - st.u_lo));
        st.z_lo = radial ? 0.0 : xmin - m;
        st.z_hi = xmax + m;
    }
    const NystromEngine eng(st);
    std::vector<Row> trows(live.size());
    parallel_for(live.size(), [&](std::size_t k) { trows[k] = eng.row(targets[live[k]].s, targets[live[k]].x); });
    std::vector<double> scale(live.size()), g0t(live.size(), 1.0);
    for (std::size_t k = 0; k < live.size(); ++k) scale[k] = out[live[k]].p;
    auto res = iterate_series(eng, trows, g0t, std::vector<double>(eng.size(), 1.0), scale, opt, run_all);
    for (std::size_t k = 0; k < live.size(); ++k) {
        const double p0 = out[live[k]].p;
        out[live[k]] = std::move(res[k]);
        out[live[k]].p = p0;
    }
    return out;
}

}  // namespace detail

/// Series p^mu at many (s, x) for one end point (t, y); the targets share one grid.
inline std::vector<SeriesResult> series_batch(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double t,
                                              double y, const std::vector<SeriesTarget>& targets,
                                              const SeriesOptions& opt = {}) {
    return detail::series_impl(p, mu, t, y, targets, opt, false);
}

/// d = 2 variant for a rotation invariant setting: end point (t, 0), a density
/// depending on |z| only, and start points (s, (r, 0)) given as targets {s, r}.
inline std::vector<SeriesResult> series_batch_radial(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double t,
                                                     const std::vector<SeriesTarget>& targets,
                                                     const SeriesOptions& opt = {}) {
    for (const auto& tg : targets)
        if (!(tg.x >= 0)) throw input_error("radial targets need x = |x| >= 0");
    if (p.dim() != 2) throw input_error("radial series needs a d = 2 kernel");
    return detail::series_impl(p, mu, t, 0.0, targets, opt, false, true);
}

inline SeriesResult series(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double s, double x, double t,
                           double y, const SeriesOptions& opt = {}) {
    return series_batch(p, mu, t, y, {{s, x}}, opt).front();
}

/// Terms p_0 .. p_n at each target, with no early stop.
inline std::vector<std::vector<double>> pn_terms_batch(const SpaceTimeKernel& p, const PerturbingMeasure& mu,
                                                       std::size_t n, double t, double y,
                                                       const std::vector<SeriesTarget>& targets,
                                                       SeriesOptions opt = {}) {
    opt.max_terms = n;
    auto res = detail::series_impl(p, mu, t, y, targets, opt, true);
    std::vector<std::vector<double>> out;
    for (auto& r : res) {
        r.terms.resize(n + 1, 0.0);
        out.push_back(std::move(r.terms));
    }
    return out;
}

/// p_n(s, x, t, y).
inline double pn_term(const SpaceTimeKernel& p, const PerturbingMeasure& mu, std::size_t n, double s, double x,
                      double t, double y, const SeriesOptions& opt = {}) {
    return pn_terms_batch(p, mu, n, t, y, {{s, x}}, opt).front()[n];
}

// ---------------------------------------------------------------------------
// The alternative atom operator and its closed forms.

/// K g(s, x) for the single-atom operator: 0 for s > u0, g(s, x) for s = u0,
/// int p(s, x, u0, z) g(u0, z) dz for s < u0 (d = 1).
inline double alt_atom_kernel_apply(const std::function<double(double, double)>& g, double s, double x, double u0,
                                    const SpaceTimeKernel& p, const std::vector<double>& breaks = {},
                                    const quad::QuadratureSpec& spec = quad::QuadratureSpec{}.tolerances(1e-10, 1e-13)) {
    if (s > u0) return 0;
    if (s == u0) return g(s, x);
    if (p.dim() != 1) throw input_error("alt_atom_kernel_apply supports d = 1 kernels");
    std::vector<double> br = breaks;
    const double a = p.spatial_scale(u0 - s);
    for (double k : {-6.0, -1.0, 0.0, 1.0, 6.0}) br.push_back(x + k * a);
    const double lo = p.forward_cone() ? x : -inf;
    auto f = [&](double z) {
        const double w = p(s, x, u0, z);
        return w == 0 ? 0.0 : w * g(u0, z);
    };
    return quad::integrate_1d(f, detail::sorted_points(lo, inf, br), spec).value;
}

/// Number of nondecreasing index chains of length n drawn from L atoms: C(L+n-1, n).
inline std::uint64_t multi_atom_iterate_count(long L, long n) {
    if (L < 0 || n < 0) throw input_error("multi_atom_iterate_count: L and n must be >= 0");
    if (n == 0) return 1;
    if (L == 0) return 0;
    std::uint64_t r = 1;
    const long top = L + n - 1, k = std::min(n, L - 1);
    for (long i = 1; i <= k; ++i) r = r * std::uint64_t(top - k + i) / std::uint64_t(i);
    return r;
}

/// Direct enumeration of #{(i_1, ..., i_n): s <= u_{i_1} <= ... <= u_{i_n}}.
inline std::uint64_t count_atom_chains(const std::vector<double>& times, double s, long n) {
    if (n < 0) throw input_error("count_atom_chains: n must be >= 0");
    std::uint64_t count = 0;
    std::vector<std::size_t> idx(std::size_t(n), 0);
    const std::size_t k = times.size();
    if (n == 0) return 1;
    if (k == 0) return 0;
    for (;;) {
        bool ok = times[idx[0]] >= s;
        for (std::size_t i = 1; ok && i < idx.size(); ++i) ok = times[idx[i - 1]] <= times[idx[i]];
        if (ok) ++count;
        std::size_t pos = idx.size();
        while (pos > 0 && idx[pos - 1] + 1 == k) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t i = pos; i < idx.size(); ++i) idx[i] = 0;
    }
    return count;
}

/// (1 - eta)^{-L}.
inline double multi_atom_series_factor(double eta, long L) {
    if (L < 0) throw input_error("multi_atom_series_factor: L must be >= 0");
    if (!(eta >= 0)) throw input_error("multi_atom_series_factor: eta must be >= 0");
    if (!(eta < 1)) throw domain_error("eta >= 1: the series explodes");
    return std::pow(1 - eta, -double(L));
}

// ---------------------------------------------------------------------------
// Slice certification for perturbed densities.

struct SliceSampler {
    std::vector<double> xs{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::size_t s_per_slice = 4;  // evenly spread over each interval
};

namespace detail {

inline void check_partition(const std::vector<Interval>& I, double r, double t) {
    if (I.empty()) throw input_error("at least one interval is required");
    if (!(r < t)) throw input_error("r must be < t");
    if (I.front().hi != t || I.back().lo != r) throw input_error("intervals must cover [r, t)");
    for (std::size_t j = 0; j < I.size(); ++j) {
        if (!(I[j].lo < I[j].hi)) throw input_error("intervals must be nondegenerate");
        if (j + 1 < I.size() && I[j + 1].hi != I[j].lo)
            throw input_error("intervals must be contiguous and ordered I_1 (rightmost) first");
    }
}

/// Sample times inside the interval, avoiding an open left end.
inline std::vector<double> slice_times(const Interval& I, std::size_t n) {
    std::vector<double> out;
    const double w = I.hi - I.lo;
    for (std::size_t i = 0; i < n; ++i) {
        double s = I.lo + w * double(i) / double(n);
        if (i == 0 && !I.lo_closed) s = I.lo + 1e-3 * w;
        out.push_back(s);
    }
    return out;
}

inline std::vector<SeriesTarget> targets_for(const std::vector<double>& ss, const std::vector<double>& xs) {
    std::vector<SeriesTarget> out;
    for (double s : ss)
        for (double x : xs) out.push_back({s, x});
    return out;
}

/// sup over targets of K^{mu} f / f with f = p(., ., t, y).
inline double first_term_ratio(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double t, double y,
                               const std::vector<SeriesTarget>& targets, const SeriesOptions& opt) {
    const auto terms = pn_terms_batch(p, mu, 1, t, y, targets, opt);
    double sup = 0;
    for (const auto& tm : terms)
        if (tm[0] > 0) sup = std::max(sup, tm[1] / tm[0]);
    return sup;
}

}  // namespace detail

/// Certificates for sum p_n <= (1 - eta)^{-j} p on each I_j, after checking
/// the per-interval smallness hypothesis at sampled points. intervals[0] is I_1,
/// the rightmost one.
inline std::vector<BoundCertificate> theorem46_certify(const SpaceTimeKernel& p, const PerturbingMeasure& mu,
                                                       double r, double t, double y,
                                                       const std::vector<Interval>& intervals, double eta,
                                                       const SeriesOptions& opt = {},
                                                       const SliceSampler& sampler = {}) {
    detail::check_partition(intervals, r, t);
    if (!(eta >= 0)) throw input_error("eta must be >= 0");
    if (!(eta < 1)) throw domain_error("local smallness fails: eta >= 1");
    const std::size_t k = intervals.size();
    std::vector<std::vector<SeriesTarget>> slice_targets(k);
    std::vector<SeriesTarget> all;
    for (std::size_t j = 0; j < k; ++j) {
        slice_targets[j] = detail::targets_for(detail::slice_times(intervals[j], sampler.s_per_slice), sampler.xs);
        all.insert(all.end(), slice_targets[j].begin(), slice_targets[j].end());
    }
    const double tol = 10 * opt.quad_tol;
    std::vector<double> hyp(k);
    for (std::size_t j = 0; j < k; ++j)
        hyp[j] = detail::first_term_ratio(p, restrict_measure(mu, intervals[j]), t, y, all, opt);

    const auto results = series_batch(p, mu, t, y, all, opt);
    std::vector<BoundCertificate> out;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<SeriesSample> samples;
        for (std::size_t i = 0; i < slice_targets[j].size(); ++i) {
            const SeriesResult& res = results[offset + i];
            samples.push_back({res.ratio(), res.status, res.terms.size()});
        }
        offset += slice_targets[j].size();
        BoundCertificate c = judge_slice(j + 1, theorem_bound(eta, eta, long(j + 1)), samples, tol);
        c.eta = eta;
        c.beta = eta;
        c.provenance = "interval " + intervals[j].to_string() + ", measured smallness " + std::to_string(hyp[j]);
        if (hyp[j] > eta * (1 + tol) + tol) c.status = CertificateStatus::hypothesis_fail;
        out.push_back(std::move(c));
    }
    return out;
}

/// Sampled per-interval smallness: sup over all sample targets of
/// K^{mu_{I_j}} f / f, for each I_j.
inline std::vector<double> estimate_interval_eta(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double r,
                                                 double t, double y, const std::vector<Interval>& intervals,
                                                 const SeriesOptions& opt = {}, const SliceSampler& sampler = {}) {
    detail::check_partition(intervals, r, t);
    std::vector<SeriesTarget> all;
    for (const Interval& I : intervals) {
        const auto tg = detail::targets_for(detail::slice_times(I, sampler.s_per_slice), sampler.xs);
        all.insert(all.end(), tg.begin(), tg.end());
    }
    std::vector<double> out;
    for (const Interval& I : intervals)
        out.push_back(detail::first_term_ratio(p, restrict_measure(mu, I), t, y, all, opt));
    return out;
}

/// C = (sum_{n<N} beta^n) (1 + beta/(1-eta))^{k-1} / (1-eta) with eta = c(1-1/c)^N
/// and N the smallest admissible choice; c = 1 gives 1.
inline double corollary47_constant(double c, double beta, long k) {
    if (!(c >= 1)) throw domain_error("corollary constant requires c >= 1");
    if (k < 1) throw input_error("corollary constant requires k >= 1");
    if (c == 1) return 1;
    return corollary_bound(c, smallest_admissible_n(c), beta, k);
}

struct Corollary47Result {
    double constant = 0;
    long N = 0;
    double eta = 0;
    double measured_beta = 0;            // sup p_1 / p over samples with s > r
    std::vector<double> measured_c;      // per interval sup of the restricted series ratio
    BoundCertificate certificate;        // sum p_n <= C p over all samples
};

/// Corollary bound with its two hypotheses checked at samples.
inline Corollary47Result corollary47_bound(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double r,
                                           double t, double y, const std::vector<Interval>& intervals, double c,
                                           double beta, const SeriesOptions& opt = {},
                                           const SliceSampler& sampler = {}) {
    detail::check_partition(intervals, r, t);
    Corollary47Result out;
    out.constant = corollary47_constant(c, beta, long(intervals.size()));
    if (c > 1) {
        out.N = smallest_admissible_n(c);
        out.eta = corollary_eta(c, out.N);
    }
    const double tol = 10 * opt.quad_tol;
    std::vector<SeriesTarget> all;
    std::vector<std::vector<SeriesTarget>> slice_targets;
    for (const Interval& I : intervals) {
        std::vector<double> ss = detail::slice_times(I, sampler.s_per_slice);
        if (I.lo == r) ss.front() = r + 1e-3 * (I.hi - I.lo);
        slice_targets.push_back(detail::targets_for(ss, sampler.xs));
        all.insert(all.end(), slice_targets.back().begin(), slice_targets.back().end());
    }
    out.measured_beta = detail::first_term_ratio(p, mu, t, y, all, opt);
    bool hyp_ok = out.measured_beta <= beta * (1 + tol) + tol;
    for (std::size_t j = 0; j < intervals.size(); ++j) {
        const auto res = series_batch(p, restrict_measure(mu, intervals[j]), t, y, slice_targets[j], opt);
        double sup = 0;
        for (const auto& rr : res) sup = std::max(sup, rr.ratio());
        out.measured_c.push_back(sup);
        hyp_ok = hyp_ok && sup <= c * (1 + tol);
    }
    const auto res = series_batch(p, mu, t, y, all, opt);
    std::vector<SeriesSample> samples;
    for (const auto& rr : res) samples.push_back({rr.ratio(), rr.status, rr.terms.size()});
    out.certificate = judge_slice(0, out.constant, samples, tol);
    out.certificate.eta = out.eta;
    out.certificate.beta = beta;
    out.certificate.provenance = "N=" + std::to_string(out.N) + " measured beta " + std::to_string(out.measured_beta);
    if (!hyp_ok) out.certificate.status = CertificateStatus::hypothesis_fail;
    return out;
}

struct LocalizationReport {
    bool holds = true;
    double inside_sup = 0;  // sup of K^{mu_I} f / f with s in I
    double left_sup = 0;    // the same with s left of I
    std::size_t samples = 0;
};

/// Checks that smallness of the restricted measure on I x X propagates to
/// starting times left of I. Requires a Chapman-Kolmogorov kernel.
inline LocalizationReport localization_report(const SpaceTimeKernel& p, const PerturbingMeasure& mu,
                                              const Interval& I, double eta, double t, double y,
                                              const SeriesOptions& opt = {}, const SliceSampler& sampler = {},
                                              std::size_t left_times = 20) {
    if (!p.chapman_kolmogorov()) throw precondition_error("localization requires a Chapman-Kolmogorov kernel");
    if (!(I.lo < I.hi) || !std::isfinite(I.lo) || !(I.hi <= t)) throw input_error("I must be a bounded interval left of t");
    const PerturbingMeasure muI = restrict_measure(mu, I);
    const double tol = 10 * opt.quad_tol;
    LocalizationReport out;
    const auto inside = detail::targets_for(detail::slice_times(I, sampler.s_per_slice), sampler.xs);
    out.inside_sup = detail::first_term_ratio(p, muI, t, y, inside, opt);
    if (out.inside_sup > eta * (1 + tol) + tol)
        throw precondition_error("smallness on I fails: measured " + std::to_string(out.inside_sup));
    const double w = I.hi - I.lo;
    std::vector<double> ss;
    for (std::size_t i = 0; i < left_times; ++i) ss.push_back(I.lo - 2 * w * double(i + 1) / double(left_times));
    const auto left = detail::targets_for(ss, sampler.xs);
    out.left_sup = detail::first_term_ratio(p, muI, t, y, left, opt);
    out.samples = inside.size() + left.size();
    out.holds = out.left_sup <= eta * (1 + tol) + tol;
    return out;
}

inline bool localization_check(const SpaceTimeKernel& p, const PerturbingMeasure& mu, const Interval& I, double eta,
                               double t, double y, const SeriesOptions& opt = {}, const SliceSampler& sampler = {}) {
    return localization_report(p, mu, I, eta, t, y, opt, sampler).holds;
}

// ---------------------------------------------------------------------------
// Kato-class certification: eta = c k(h) and p^mu <= (1 - eta)^{-j} p when
// s + (j - 1) h < t <= s + j h.

struct KatoCertification {
    double h = 0;
    double k = 0;    // measured Kato modulus
    double c = 0;    // 5P constant used
    double eta = 0;  // c * k
    std::vector<BoundCertificate> certificates;  // one per occurring j
};

/// For d = 1 the samples are (s, x) with end point (t, y); for d = 2 the
/// setting must be rotation invariant (y = 0, radial density) and x = |x|.
inline KatoCertification kato_certify(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double t, double y,
                                      double h, double c, const std::vector<SeriesTarget>& samples,
                                      const SeriesOptions& opt = {}) {
    if (!(c > 0)) throw input_error("kato_certify: c must be > 0");
    KatoCertification out;
    out.h = h;
    out.c = c;
    out.k = kato_modulus(p, mu, h).value;
    out.eta = c * out.k;
    for (const auto& sm : samples)
        if (!(sm.s < t)) throw input_error("kato_certify: samples need s < t");
    const std::vector<SeriesResult> res =
        p.dim() == 2 ? series_batch_radial(p, mu, t, samples, opt) : series_batch(p, mu, t, y, samples, opt);
    std::map<long, std::vector<SeriesSample>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const long j = std::max(1L, long(std::ceil((t - samples[i].s) / h - 1e-12)));
        groups[j].push_back({res[i].ratio(), res[i].status, res[i].terms.size()});
    }
    for (const auto& [j, group] : groups) {
        BoundCertificate cert;
        if (out.eta < 1) {
            cert = judge_slice(std::size_t(j), std::pow(1 - out.eta, -double(j)), group, 10 * opt.quad_tol);
        } else {
            cert.slice = std::size_t(j);
            cert.bound = inf;
            cert.samples = group.size();
            cert.status = CertificateStatus::hypothesis_fail;
        }
        cert.eta = out.eta;
        cert.beta = out.eta;
        cert.provenance = "k(" + std::to_string(h) + ")=" + std::to_string(out.k) + " c=" + std::to_string(c);
        out.certificates.push_back(std::move(cert));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Slicings.

/// Left-closed slices of width h covering [r, t), I_1 = [t - h, t) first; the
/// last (leftmost) slice is shorter when h does not divide t - r.
inline std::vector<Interval> uniform_time_slices(double r, double t, double h) {
    if (!(r < t)) throw input_error("uniform_time_slices: r must be < t");
    if (!(h > 0) || !std::isfinite(h)) throw input_error("uniform_time_slices: h must be > 0");
    const auto k = std::size_t(std::ceil((t - r) / h - 1e-12));
    std::vector<Interval> out;
    double hi = t;
    for (std::size_t j = 1; j <= k; ++j) {
        const double lo = j == k ? r : t - double(j) * h;
        out.push_back(Interval::left_closed(lo, hi));
        hi = lo;
    }
    return out;
}

/// S_j = {a_lo <= u + z < a_hi}; the first slice has a_hi = inf, the last a_lo = -inf.
struct LevelSlice {
    double a_lo = -inf;
    double a_hi = inf;
};

/// Diagonal slices a_j = (k - j) h with (k - 1) h <= t + y < k h, S_1 on top.
inline std::vector<LevelSlice> diagonal_level_slices(double t, double y, double h) {
    if (!(h > 0) || !std::isfinite(h)) throw input_error("diagonal_level_slices: h must be > 0");
    if (!(t + y > 0)) throw input_error("diagonal_level_slices: needs t + y > 0");
    const long k = long(std::floor((t + y) / h)) + 1;
    std::vector<LevelSlice> out;
    for (long j = 1; j <= k; ++j)
        out.push_back({j == k ? -inf : double(k - j) * h, j == 1 ? inf : double(k - j + 1) * h});
    return out;
}

struct KappaLevelCertification {
    double h = 0;
    double eta = 0;                        // eta_for_kappa(c, p, h), also used as beta
    std::vector<double> measured_eta;      // per slice sup of K_j f / f on S_j
    std::vector<double> measured_beta;     // per slice sup of K_j f / f over all samples
    std::vector<BoundCertificate> certificates;
};

/// kappa perturbed by q0 = c (u + z)^{-p} on diagonal slices of width h:
/// per-slice constants from the one-dimensional slice ratio, and the series
/// ratio on S_j judged against (1 - eta)^{-j}. Each slice is sampled on
/// `levels` level lines with `per_level` points each.
inline KappaLevelCertification kappa_level_certify(double c, double p, double t, double y, double h,
                                                   const SeriesOptions& opt = {}, std::size_t levels = 3,
                                                   std::size_t per_level = 3) {
    if (levels == 0 || per_level == 0) throw input_error("kappa_level_certify: empty sample grid");
    KappaLevelCertification out;
    out.h = h;
    out.eta = eta_for_kappa(c, p, h);
    const auto slices = diagonal_level_slices(t, y, h);
    const std::size_t k = slices.size();
    const double omega = t + y;
    std::vector<std::vector<SeriesTarget>> per(k);
    std::vector<SeriesTarget> all;
    for (std::size_t j = 0; j < k; ++j) {
        const double hi = std::min(slices[j].a_hi, omega);
        const double lo = std::isfinite(slices[j].a_lo) ? slices[j].a_lo : hi - h;
        for (std::size_t i = 0; i < levels; ++i) {
            const double alpha = lo + (hi - lo) * (double(i) + 0.5) / double(levels);
            const double D = omega - alpha;
            for (std::size_t m = 0; m < per_level; ++m) {
                const double d = D * (double(m) + 0.5) / double(per_level);
                const double x = y - d;
                per[j].push_back({alpha - x, x});
            }
        }
        all.insert(all.end(), per[j].begin(), per[j].end());
    }
    const quad::QuadratureSpec spec = quad::QuadratureSpec{}.tolerances(std::min(1e-8, opt.quad_tol), 1e-14);
    const double tol = 10 * opt.quad_tol;
    out.measured_eta.assign(k, 0.0);
    out.measured_beta.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < all.size(); ++i) {
            const double r =
                kappa_slice_ratio(c, p, all[i].s, all[i].x, t, y, slices[j].a_lo, slices[j].a_hi, spec).value;
            out.measured_beta[j] = std::max(out.measured_beta[j], r);
        }
        for (const auto& tg : per[j])
            out.measured_eta[j] = std::max(
                out.measured_eta[j], kappa_slice_ratio(c, p, tg.s, tg.x, t, y, slices[j].a_lo, slices[j].a_hi, spec).value);
    }
    const bool small = out.eta < 1;
    std::vector<SeriesResult> res;
    if (small) {
        const KappaKernel kap;
        const PerturbingMeasure mu(Density::q0(c, p), {});
        res = series_batch(kap, mu, t, y, all, opt);
    }
    std::size_t offset = 0;
    for (std::size_t j = 0; j < k; ++j) {
        BoundCertificate cert;
        if (small) {
            std::vector<SeriesSample> samples;
            for (std::size_t i = 0; i < per[j].size(); ++i) {
                const SeriesResult& r = res[offset + i];
                samples.push_back({r.ratio(), r.status, r.terms.size()});
            }
            cert = judge_slice(j + 1, theorem_bound(out.eta, out.eta, long(j + 1)), samples, tol);
        } else {
            cert.slice = j + 1;
            cert.bound = inf;
            cert.samples = per[j].size();
        }
        offset += per[j].size();
        cert.eta = out.eta;
        cert.beta = out.eta;
        cert.provenance = "level slice [" + std::to_string(slices[j].a_lo) + ", " + std::to_string(slices[j].a_hi) +
                          "), measured eta " + std::to_string(out.measured_eta[j]) + ", measured beta " +
                          std::to_string(out.measured_beta[j]);
        if (!small || out.measured_eta[j] > out.eta * (1 + tol) || out.measured_beta[j] > out.eta * (1 + tol))
            cert.status = CertificateStatus::hypothesis_fail;
        out.certificates.push_back(std::move(cert));
    }
    return out;
}

}  // namespace kp
