#pragma once

// Perturbing measures on space-time: a density part q(u, z) du dm(z) plus
// time atoms eta_i * eps_{u_i} (x) m, optionally restricted to a time interval.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kp/core.hpp"

namespace kp {

/// Real interval with independently open or closed ends; infinite ends are
/// always open. An interval with lo > hi (or lo == hi and an open end) is empty.
struct Interval {
    double lo = -inf;
    double hi = inf;
    bool lo_closed = false;
    bool hi_closed = false;

    static Interval all() { return {}; }
    static Interval empty_set() { return {1.0, 0.0, false, false}; }
    static Interval closed(double a, double b) { return {a, b, true, true}; }
    static Interval open(double a, double b) { return {a, b, false, false}; }
    static Interval left_closed(double a, double b) { return {a, b, true, false}; }

    bool empty() const {
        if (lo > hi) return true;
        if (lo == hi) return !(lo_closed && hi_closed) || std::isinf(lo);
        return false;
    }

    bool contains(double u) const {
        if (std::isnan(u)) return false;
        const bool above = lo_closed && std::isfinite(lo) ? u >= lo : u > lo;
        const bool below = hi_closed && std::isfinite(hi) ? u <= hi : u < hi;
        return above && below;
    }

    Interval intersect(const Interval& o) const {
        Interval r;
        if (lo > o.lo) {
            r.lo = lo;
            r.lo_closed = lo_closed;
        } else if (o.lo > lo) {
            r.lo = o.lo;
            r.lo_closed = o.lo_closed;
        } else {
            r.lo = lo;
            r.lo_closed = lo_closed && o.lo_closed;
        }
        if (hi < o.hi) {
            r.hi = hi;
            r.hi_closed = hi_closed;
        } else if (o.hi < hi) {
            r.hi = o.hi;
            r.hi_closed = o.hi_closed;
        } else {
            r.hi = hi;
            r.hi_closed = hi_closed && o.hi_closed;
        }
        if (r.empty()) return empty_set();
        return r;
    }

    bool operator==(const Interval&) const = default;

    std::string to_string() const {
        if (empty()) return "{}";
        auto num = [](double v) {
            if (std::isinf(v)) return std::string(v < 0 ? "-inf" : "inf");
            std::string s = std::to_string(v);
            return s;
        };
        return std::string(lo_closed ? "[" : "(") + num(lo) + ", " + num(hi) + (hi_closed ? "]" : ")");
    }
};

enum class DensityKind { none, constant, q0, power };

/// Density of the absolutely continuous part.
///   constant: q = lambda
///   q0:       q = c (u + z)^{-p} for u, z > 0 (d = 1), else 0
///   power:    q = scale * |z|^{-1 + eps}
struct Density {
    DensityKind kind = DensityKind::none;
    double lambda = 0;
    double c = 0;
    double p = 0;
    double eps = 1;
    double scale = 1;

    static Density none() { return {}; }
    static Density constant(double lambda) {
        Density d;
        d.kind = DensityKind::constant;
        d.lambda = lambda;
        return d;
    }
    static Density q0(double c, double p) {
        Density d;
        d.kind = DensityKind::q0;
        d.c = c;
        d.p = p;
        return d;
    }
    static Density power(double eps, double scale = 1) {
        Density d;
        d.kind = DensityKind::power;
        d.eps = eps;
        d.scale = scale;
        return d;
    }

    bool zero() const {
        switch (kind) {
            case DensityKind::none: return true;
            case DensityKind::constant: return lambda == 0;
            case DensityKind::q0: return c == 0;
            case DensityKind::power: return scale == 0;
        }
        return true;
    }

    void validate() const {
        switch (kind) {
            case DensityKind::none: break;
            case DensityKind::constant:
                if (!(lambda >= 0) || !std::isfinite(lambda)) throw input_error("density lambda must be >= 0");
                break;
            case DensityKind::q0:
                if (!(c >= 0) || !std::isfinite(c)) throw input_error("q0 constant c must be >= 0");
                if (!(p > 0 && p < 0.5)) throw input_error("q0 exponent p must lie in (0, 1/2)");
                break;
            case DensityKind::power:
                if (!(eps > 0 && eps <= 1)) throw input_error("power density eps must lie in (0, 1]");
                if (!(scale >= 0) || !std::isfinite(scale)) throw input_error("power density scale must be >= 0");
                break;
        }
    }

    /// True when q does not depend on u.
    bool time_homogeneous() const { return kind != DensityKind::q0; }

    double operator()(double u, std::span<const double> z) const {
        switch (kind) {
            case DensityKind::none: return 0;
            case DensityKind::constant: return lambda;
            case DensityKind::q0: {
                if (z.size() != 1) throw input_error("q0 density requires d = 1");
                if (!(u > 0) || !(z[0] > 0)) return 0;
                return c * std::pow(u + z[0], -p);
            }
            case DensityKind::power: {
                double r2 = 0;
                for (double v : z) r2 += v * v;
                if (r2 == 0) return eps == 1 ? scale : inf;
                return scale * std::pow(r2, 0.5 * (eps - 1));
            }
        }
        return 0;
    }

    double operator()(double u, double z) const { return (*this)(u, std::span<const double>(&z, 1)); }

    /// Spatial points (d = 1) where q is singular or discontinuous at time u.
    std::vector<double> z_breaks(double u) const {
        switch (kind) {
            case DensityKind::q0: return {0.0, -u};
            case DensityKind::power: return eps == 1 ? std::vector<double>{} : std::vector<double>{0.0};
            default: return {};
        }
    }

    /// Times where q is discontinuous in u.
    std::vector<double> u_breaks() const {
        if (kind == DensityKind::q0) return {0.0};
        return {};
    }
};

struct Atom {
    double u;
    double eta;
    bool operator==(const Atom&) const = default;
};

class PerturbingMeasure {
public:
    PerturbingMeasure() = default;
    PerturbingMeasure(Density density, std::vector<Atom> atoms, Interval support = Interval::all())
        : density_(density), atoms_(std::move(atoms)), support_(support) {
        density_.validate();
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (!std::isfinite(atoms_[i].u)) throw input_error("atom time must be finite");
            if (!(atoms_[i].eta > 0) || !std::isfinite(atoms_[i].eta))
                throw input_error("atom weight must be > 0");
            if (i > 0 && !(atoms_[i].u > atoms_[i - 1].u))
                throw input_error("atom times must be strictly increasing");
        }
        std::erase_if(atoms_, [this](const Atom& a) { return !support_.contains(a.u); });
        if (support_.empty()) {
            support_ = Interval::empty_set();
            density_ = Density::none();
        }
    }

    static PerturbingMeasure zero() { return {}; }
    static PerturbingMeasure lebesgue(double lambda = 1) { return {Density::constant(lambda), {}}; }
    static PerturbingMeasure dirac(double u0, double eta) { return {Density::none(), {{u0, eta}}}; }

    const Density& density() const { return density_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const Interval& support() const { return support_; }

    bool has_density() const { return !density_.zero() && !support_.empty(); }
    bool is_zero() const { return !has_density() && atoms_.empty(); }

    /// Density at (u, z), zero outside the time support.
    double q(double u, std::span<const double> z) const {
        if (!has_density() || !support_.contains(u)) return 0;
        return density_(u, z);
    }
    double q(double u, double z) const { return q(u, std::span<const double>(&z, 1)); }

    /// Lebesgue measure of the density's time support inside (a, b).
    double density_time_mass(double a, double b) const {
        if (!has_density()) return 0;
        const double lo = std::max(a, support_.lo), hi = std::min(b, support_.hi);
        return hi > lo ? hi - lo : 0.0;
    }

    /// Atoms with a < u < b.
    std::vector<Atom> atoms_between(double a, double b) const {
        std::vector<Atom> out;
        for (const Atom& at : atoms_)
            if (at.u > a && at.u < b) out.push_back(at);
        return out;
    }

    /// Total atom weight at time u (0 when u is not an atom).
    double atom_weight(double u) const {
        for (const Atom& at : atoms_)
            if (at.u == u) return at.eta;
        return 0;
    }

    bool operator==(const PerturbingMeasure& o) const {
        const bool dz = !has_density(), odz = !o.has_density();
        if (dz != odz) return false;
        if (!dz) {
            const Density &a = density_, &b = o.density_;
            if (a.kind != b.kind || a.lambda != b.lambda || a.c != b.c || a.p != b.p || a.eps != b.eps ||
                a.scale != b.scale || !(support_ == o.support_))
                return false;
        }
        return atoms_ == o.atoms_;
    }

private:
    Density density_;
    std::vector<Atom> atoms_;
    Interval support_;
};

/// mu_I(A) = mu(A cap (I x X)).
inline PerturbingMeasure restrict_measure(const PerturbingMeasure& mu, const Interval& I) {
    return PerturbingMeasure(mu.density(), mu.atoms(), mu.support().intersect(I));
}

}  // namespace kp
