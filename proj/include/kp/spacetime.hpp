#pragma once

// Space-time transition densities p(s, x, t, y) and the analysis checks built
// on them: Chapman-Kolmogorov residuals, 3G/3P ratios, the Weyl half
// derivative, left-inverse residuals and the Kato modulus.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kp/core.hpp"
#include "kp/measure.hpp"
#include "kp/quadrature.hpp"

namespace kp {

struct SpaceTimePoint {
    double s = 0;
    std::vector<double> x;
};

/// A transition density on R x R^d. Implementations return 0 for s >= t.
class SpaceTimeKernel {
public:
    virtual ~SpaceTimeKernel() = default;

    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
    virtual bool chapman_kolmogorov() const = 0;
    virtual double density(double s, std::span<const double> x, double t, std::span<const double> y) const = 0;

    virtual double log_density(double s, std::span<const double> x, double t,
                               std::span<const double> y) const {
        const double v = density(s, x, t, y);
        return v > 0 ? std::log(v) : -inf;
    }

    /// Typical spatial spread of p(s, x, s + dt, .) around x.
    virtual double spatial_scale(double dt) const = 0;

    /// True when p(s, x, t, y) = 0 unless y > x (d = 1).
    virtual bool forward_cone() const { return false; }

    /// d = 2: int_0^pi p(s, (x, 0), u, (r cos a, r sin a)) da.
    virtual double planar_angle_integral(double s, double x, double u, double r, double rel_tol = 1e-10) const;

    double operator()(double s, double x, double t, double y) const {
        return density(s, std::span<const double>(&x, 1), t, std::span<const double>(&y, 1));
    }
    double log_at(double s, double x, double t, double y) const {
        return log_density(s, std::span<const double>(&x, 1), t, std::span<const double>(&y, 1));
    }

protected:
    void check_dims(std::span<const double> x, std::span<const double> y) const {
        if (x.size() != dim() || y.size() != dim())
            throw input_error(name() + ": point dimension does not match kernel dimension " +
                              std::to_string(dim()));
    }
};

using KernelPtr = std::shared_ptr<const SpaceTimeKernel>;

inline double SpaceTimeKernel::planar_angle_integral(double s, double x, double u, double r, double rel_tol) const {
    if (dim() != 2) throw input_error("planar_angle_integral needs d = 2");
    const double xs[2] = {x, 0.0};
    auto f = [&](double a) {
        const double z[2] = {r * std::cos(a), r * std::sin(a)};
        return density(s, xs, u, z);
    };
    return quad::integrate_1d(f, 0.0, pi, quad::QuadratureSpec{}.tolerances(rel_tol, 1e-300)).value;
}

namespace detail {
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double r = 0;
    for (std::size_t i = 0; i < a.size(); ++i) r += (a[i] - b[i]) * (a[i] - b[i]);
    return r;
}
}  // namespace detail

/// Brownian density [4 pi (t - s)]^{-d/2} exp(-|x - y|^2 / (4 (t - s))).
class GaussianKernel final : public SpaceTimeKernel {
public:
    explicit GaussianKernel(std::size_t d = 1) : d_(d) {
        if (d == 0) throw input_error("gaussian kernel needs d >= 1");
    }
    std::size_t dim() const override { return d_; }
    std::string name() const override { return "gaussian"; }
    bool chapman_kolmogorov() const override { return true; }
    double spatial_scale(double dt) const override { return std::sqrt(2 * std::max(dt, 0.0)); }

    double log_density(double s, std::span<const double> x, double t,
                       std::span<const double> y) const override {
        check_dims(x, y);
        if (!(s < t)) return -inf;
        const double tau = t - s;
        return -0.5 * double(d_) * std::log(4 * pi * tau) - detail::sq_dist(x, y) / (4 * tau);
    }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        const double l = log_density(s, x, t, y);
        return l == -inf ? 0.0 : std::exp(l);
    }

private:
    std::size_t d_;
};

/// Cauchy density c_d (t - s) [(t - s)^2 + |y - x|^2]^{-(d+1)/2}.
class CauchyKernel final : public SpaceTimeKernel {
public:
    explicit CauchyKernel(std::size_t d = 1) : d_(d), log_cd_(std::log(normalizing_constant(d))) {}

    /// c_d from the radial normalization integral.
    static double normalizing_constant(std::size_t d) {
        if (d == 0) throw input_error("cauchy kernel needs d >= 1");
        const double a = 0.5 * double(d);
        const double sphere = 2 * std::pow(pi, a) / std::tgamma(a);
        const Estimate radial = quad::integrate_1d(
            [d](double r) { return std::pow(r, double(d) - 1) * std::pow(1 + r * r, -0.5 * double(d + 1)); },
            0.0, inf, quad::QuadratureSpec{}.tolerances(1e-13, 1e-15));
        return 1 / (sphere * radial.value);
    }

    std::size_t dim() const override { return d_; }
    std::string name() const override { return "cauchy"; }
    bool chapman_kolmogorov() const override { return true; }
    double spatial_scale(double dt) const override { return std::max(dt, 0.0); }

    double log_density(double s, std::span<const double> x, double t,
                       std::span<const double> y) const override {
        check_dims(x, y);
        if (!(s < t)) return -inf;
        const double tau = t - s;
        return log_cd_ + std::log(tau) - 0.5 * double(d_ + 1) * std::log(tau * tau + detail::sq_dist(x, y));
    }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        const double l = log_density(s, x, t, y);
        return l == -inf ? 0.0 : std::exp(l);
    }

    double planar_angle_integral(double s, double x, double u, double r, double rel_tol = 1e-10) const override {
        if (d_ != 2) return SpaceTimeKernel::planar_angle_integral(s, x, u, r, rel_tol);
        if (!(s < u)) return 0;
        const double tau = u - s;
        const double a = tau * tau + x * x + r * r, b = 2 * std::abs(x) * r;
        const double k = std::sqrt(std::min(1.0, 2 * b / (a + b)));
        return std::exp(log_cd_) * tau * 2 * std::comp_ellint_2(k) / ((tau * tau + (std::abs(x) - r) * (std::abs(x) - r)) * std::sqrt(a + b));
    }

private:
    std::size_t d_;
    double log_cd_;
};

inline const double kappa_c0 = 1 / std::sqrt(4 * pi);

/// kappa(s, x, u, z) = (4 pi)^{-1/2} (u - s + z - x)^{-3/2} for u > s, z > x.
inline double kappa(double s, double x, double u, double z) {
    if (!(u > s) || !(z > x)) return 0;
    return kappa_c0 * std::pow((u - s) + (z - x), -1.5);
}

/// Potential kernel of two independent 1/2-stable subordinators in (time, space).
class KappaKernel final : public SpaceTimeKernel {
public:
    std::size_t dim() const override { return 1; }
    std::string name() const override { return "kappa"; }
    bool chapman_kolmogorov() const override { return false; }
    bool forward_cone() const override { return true; }
    double spatial_scale(double dt) const override { return std::max(dt, 0.0); }

    double log_density(double s, std::span<const double> x, double t,
                       std::span<const double> y) const override {
        check_dims(x, y);
        if (!(t > s) || !(y[0] > x[0])) return -inf;
        return std::log(kappa_c0) - 1.5 * std::log((t - s) + (y[0] - x[0]));
    }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        check_dims(x, y);
        return kappa(s, x[0], t, y[0]);
    }
};

/// f_t(x) = (4 pi)^{-1/2} t x^{-3/2} exp(-t^2 / (4x)) for x > 0.
inline double stable_subordinator_density(double t, double x) {
    if (!(t > 0)) throw input_error("stable_subordinator_density: t must be > 0");
    if (!(x > 0)) return 0;
    return kappa_c0 * t * std::pow(x, -1.5) * std::exp(-t * t / (4 * x));
}

/// Gamma(alpha/2)^{-1} (y - x)_+^{alpha/2 - 1}.
inline double stable_potential_kernel(double alpha, double x, double y) {
    if (!(alpha > 0 && alpha < 2)) throw input_error("stable potential kernel: alpha must lie in (0, 2)");
    if (!(y > x)) return 0;
    return std::pow(y - x, 0.5 * alpha - 1) / std::tgamma(0.5 * alpha);
}

/// The stable potential kernel on the time axis alone (d = 0).
class StablePotentialKernel final : public SpaceTimeKernel {
public:
    explicit StablePotentialKernel(double alpha) : alpha_(alpha) { stable_potential_kernel(alpha, 0, 1); }
    std::size_t dim() const override { return 0; }
    std::string name() const override { return "stable-potential:" + std::to_string(alpha_); }
    bool chapman_kolmogorov() const override { return false; }
    double spatial_scale(double) const override { return 0; }
    double alpha() const { return alpha_; }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        check_dims(x, y);
        return stable_potential_kernel(alpha_, s, t);
    }

private:
    double alpha_;
};

/// p^mu for a single atom eta eps_{u0} (x) m under Chapman-Kolmogorov:
/// (1 + eta) p when s < u0 < t, p otherwise.
class DiracPerturbedKernel final : public SpaceTimeKernel {
public:
    DiracPerturbedKernel(KernelPtr base, double u0, double eta) : base_(std::move(base)), u0_(u0), eta_(eta) {
        if (!base_) throw input_error("null base kernel");
        if (!(eta > 0)) throw input_error("atom weight must be > 0");
    }
    std::size_t dim() const override { return base_->dim(); }
    std::string name() const override { return base_->name() + "+dirac"; }
    bool chapman_kolmogorov() const override { return false; }
    double spatial_scale(double dt) const override { return base_->spatial_scale(dt); }
    bool forward_cone() const override { return base_->forward_cone(); }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        const double v = base_->density(s, x, t, y);
        return s < u0_ && u0_ < t ? (1 + eta_) * v : v;
    }

private:
    KernelPtr base_;
    double u0_, eta_;
};

/// (1 - eta)^{-1} p when s <= u0 < t, p otherwise; the series of the
/// alternative single-atom operator.
class AltAtomKernel final : public SpaceTimeKernel {
public:
    AltAtomKernel(KernelPtr base, double u0, double eta) : base_(std::move(base)), u0_(u0), eta_(eta) {
        if (!base_) throw input_error("null base kernel");
        if (!(eta > 0)) throw input_error("atom weight must be > 0");
        if (!(eta < 1)) throw domain_error("eta >= 1 leads to explosion");
    }
    std::size_t dim() const override { return base_->dim(); }
    std::string name() const override { return base_->name() + "+alt-atom"; }
    bool chapman_kolmogorov() const override { return base_->chapman_kolmogorov(); }
    double spatial_scale(double dt) const override { return base_->spatial_scale(dt); }
    bool forward_cone() const override { return base_->forward_cone(); }
    double density(double s, std::span<const double> x, double t, std::span<const double> y) const override {
        const double v = base_->density(s, x, t, y);
        return s <= u0_ && u0_ < t ? v / (1 - eta_) : v;
    }

private:
    KernelPtr base_;
    double u0_, eta_;
};

/// Registry: "gaussian", "cauchy", "kappa", "stable-potential:<alpha>".
inline KernelPtr make_kernel(std::string_view name, std::size_t d = 1) {
    if (name == "gaussian") return std::make_shared<GaussianKernel>(d);
    if (name == "cauchy") return std::make_shared<CauchyKernel>(d);
    if (name == "kappa") {
        if (d != 1) throw input_error("kappa kernel is defined for d = 1 only");
        return std::make_shared<KappaKernel>();
    }
    constexpr std::string_view sp = "stable-potential:";
    if (name.starts_with(sp)) {
        const std::string arg(name.substr(sp.size()));
        std::size_t used = 0;
        double alpha = 0;
        try {
            alpha = std::stod(arg, &used);
        } catch (const std::exception&) {
            throw input_error("bad stable-potential parameter '" + arg + "'");
        }
        if (used != arg.size()) throw input_error("bad stable-potential parameter '" + arg + "'");
        return std::make_shared<StablePotentialKernel>(alpha);
    }
    throw input_error("unknown kernel '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Chapman-Kolmogorov

namespace detail {

/// Breakpoints for a z-integral of p(s,x,u,z) p(u,z,t,y) (d = 1).
inline std::vector<double> bridge_points(const SpaceTimeKernel& p, double s, double x, double u, double t,
                                         double y) {
    std::vector<double> pts;
    const double a = p.spatial_scale(u - s), b = p.spatial_scale(t - u);
    for (double k : {0.0, 1.0, -1.0, 4.0, -4.0}) {
        pts.push_back(x + k * a);
        pts.push_back(y + k * b);
    }
    const double w = (t - s) > 0 ? (u - s) / (t - s) : 0.5;
    pts.push_back(x + w * (y - x));
    return pts;
}

inline std::vector<double> sorted_points(double a, double b, std::vector<double> inner) {
    std::vector<double> pts{a};
    for (double v : inner)
        if (std::isfinite(v) && v > a && v < b) pts.push_back(v);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace detail

/// |int p(s,x,u,z) p(u,z,t,y) dz - p(s,x,t,y)| with the quadrature error.
inline Estimate check_chapman_kolmogorov(const SpaceTimeKernel& p, double s, std::span<const double> x,
                                         double u, double t, std::span<const double> y,
                                         const quad::QuadratureSpec& spec = {}) {
    if (!(s < u && u < t)) throw input_error("check_chapman_kolmogorov requires s < u < t");
    const std::size_t d = p.dim();
    if (x.size() != d || y.size() != d) throw input_error("point dimension does not match kernel");
    const double direct = p.density(s, x, t, y);
    Estimate integral;
    if (d == 1) {
        auto f = [&](double z) {
            const double zz[1] = {z};
            return p.density(s, x, u, zz) * p.density(u, zz, t, y);
        };
        if (p.forward_cone()) {
            if (!(y[0] > x[0])) {
                integral = {0, 0, true};
            } else {
                const auto pts = detail::sorted_points(x[0], y[0], detail::bridge_points(p, s, x[0], u, t, y[0]));
                integral = quad::integrate_1d(f, pts, spec.with(quad::Substitution::sqrt, quad::Endpoint::both));
            }
        } else {
            integral = quad::integrate_1d(f, detail::sorted_points(-inf, inf, detail::bridge_points(p, s, x[0], u, t, y[0])),
                                          spec);
        }
    } else {
        quad::Box box{std::vector<double>(d, -inf), std::vector<double>(d, inf)};
        std::vector<double> zbuf(d);
        integral = quad::integrate_nd(
            [&](std::span<const double> z) { return p.density(s, x, u, z) * p.density(u, z, t, y); }, box, spec);
    }
    return {std::abs(integral.value - direct), integral.error, integral.converged};
}

inline Estimate check_chapman_kolmogorov(const SpaceTimeKernel& p, double s, double x, double u, double t,
                                         double y, const quad::QuadratureSpec& spec = {}) {
    return check_chapman_kolmogorov(p, s, std::span<const double>(&x, 1), u, t, std::span<const double>(&y, 1),
                                    spec);
}

// ---------------------------------------------------------------------------
// 3G / 3P

struct ThreeGResult {
    bool lower_ok = false;
    bool upper_ok = false;
    bool product_upper_ok = false;
    bool product_lower_ok = false;
    double ratio = 0;

    bool ok() const { return lower_ok && upper_ok && product_upper_ok && product_lower_ok; }
};

/// kappa(s,x,t,y) <= kappa(s,x,u,z) ^ kappa(u,z,t,y) <= 2 sqrt 2 kappa(s,x,t,y),
/// and the product forms kk <= 2 sqrt 2 k [k v k], kk >= k [k + k] / 2.
inline ThreeGResult check_3g(double s, double x, double u, double z, double t, double y) {
    if (!(s < u && u < t) || !(x < z && z < y)) throw input_error("check_3g requires s < u < t and x < z < y");
    const double direct = kappa(s, x, t, y);
    const double a = kappa(s, x, u, z), b = kappa(u, z, t, y);
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double c = 2 * std::numbers::sqrt2;
    const double slack = 1 + 1e-12;
    ThreeGResult r;
    r.ratio = lo / direct;
    r.lower_ok = direct <= lo * slack;
    r.upper_ok = lo <= c * direct * slack;
    r.product_upper_ok = a * b <= c * direct * hi * slack;
    r.product_lower_ok = a * b * slack >= direct * (a + b) / 2;
    return r;
}

/// (p(s,x,u,z) ^ p(u,z,t,y)) / p(s,x,t,y); 0 when all three vanish and +inf
/// when only the denominator does.
inline double three_p_ratio(const SpaceTimeKernel& p, double s, std::span<const double> x, double u,
                            std::span<const double> z, double t, std::span<const double> y) {
    const double num = std::min(p.density(s, x, u, z), p.density(u, z, t, y));
    const double den = p.density(s, x, t, y);
    if (den > 0) return num / den;
    return num > 0 ? inf : 0.0;
}

/// p(s,x,u,z) p(u,z,t,y) / (p(s,x,t,y) [p(s,x,u,z) + p(u,z,t,y)]).
inline double five_p_ratio(const SpaceTimeKernel& p, double s, std::span<const double> x, double u,
                           std::span<const double> z, double t, std::span<const double> y) {
    const double a = p.density(s, x, u, z), b = p.density(u, z, t, y);
    const double den = p.density(s, x, t, y) * (a + b);
    if (den > 0) return a * b / den;
    return a * b > 0 ? inf : 0.0;
}

inline double check_3p_cauchy(double s, std::span<const double> x, double u, std::span<const double> z, double t,
                              std::span<const double> y, std::size_t d) {
    const CauchyKernel p(d);
    return three_p_ratio(p, s, x, u, z, t, y);
}

inline double check_3p_cauchy(double s, double x, double u, double z, double t, double y) {
    const CauchyKernel p(1);
    return three_p_ratio(p, s, {&x, 1}, u, {&z, 1}, t, {&y, 1});
}

/// Sampled sup of five_p_ratio over ordered times in [-1, 1] and Gaussian
/// points of spread 2. A lower estimate of the constant in the 5P inequality.
inline double five_p_constant(const SpaceTimeKernel& p, std::size_t samples, std::uint64_t seed) {
    CounterRng rng(seed);
    const std::size_t d = p.dim();
    std::vector<double> x(d), z(d), y(d);
    double best = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        double a[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::sort(a, a + 3);
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = 2 * rng.normal();
            z[k] = 2 * rng.normal();
            y[k] = 2 * rng.normal();
        }
        const double r = five_p_ratio(p, a[0], x, a[1], z, a[2], y);
        if (std::isfinite(r)) best = std::max(best, r);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Weyl half derivative

namespace detail {

// Splits [0, inf) at R; the tail uses z = R / w^2 so algebraic decay stays bounded.
template <class Head, class Tail>
Estimate half_line(Head&& head, Tail&& tail, double R, std::vector<double> head_points,
                   const quad::QuadratureSpec& spec, const char* what) {
    const auto pts = sorted_points(0.0, R, std::move(head_points));
    const Estimate h = quad::integrate_1d(head, pts, spec.with(quad::Substitution::sqrt, quad::Endpoint::left));
    const Estimate t = quad::integrate_1d(tail, 0.0, 1.0, spec.plain());
    const Estimate r{h.value + t.value, h.error + t.error, h.converged && t.converged};
    if (!std::isfinite(r.value) || !t.converged)
        throw convergence_error(std::string(what) + ": tail integral did not converge");
    return r;
}

inline double tail_start(double x, const std::vector<double>& breaks) {
    double R = 1;
    for (double b : breaks)
        if (b - x > R) R = b - x;
    return R;
}

}  // namespace detail

/// pi^{-1/2} int_0^inf z^{-1/2} phi'(x + z) dz. `breaks` lists points where
/// phi' has kinks or support ends.
inline Estimate weyl_half_derivative(const std::function<double(double)>& dphi, double x,
                                     const quad::QuadratureSpec& spec = {}, const std::vector<double>& breaks = {}) {
    const double R = detail::tail_start(x, breaks);
    std::vector<double> pts;
    for (double b : breaks) pts.push_back(b - x);
    auto head = [&](double z) { return z > 0 ? dphi(x + z) / std::sqrt(z) : 0.0; };
    auto tail = [&](double w) {
        if (!(w > 0)) return 0.0;
        const double z = R / (w * w);
        if (!std::isfinite(z)) return 0.0;
        return 2 * std::sqrt(R) / (w * w) * dphi(x + z);
    };
    Estimate e = detail::half_line(head, tail, R, pts, spec, "weyl_half_derivative");
    const double c = 1 / std::sqrt(pi);
    return {c * e.value, c * e.error, e.converged};
}

/// (4 pi)^{-1/2} int_0^inf z^{-3/2} (phi(x + z) - phi(x)) dz.
inline Estimate weyl_half_derivative_difference(const std::function<double(double)>& phi, double x,
                                                const quad::QuadratureSpec& spec = {},
                                                const std::vector<double>& breaks = {}) {
    const double R = detail::tail_start(x, breaks);
    const double base = phi(x);
    std::vector<double> pts;
    for (double b : breaks) pts.push_back(b - x);
    auto head = [&](double z) { return z > 0 ? (phi(x + z) - base) * std::pow(z, -1.5) : 0.0; };
    auto tail = [&](double w) {
        if (!(w > 0)) return 0.0;
        const double z = R / (w * w);
        const double v = std::isfinite(z) ? phi(x + z) : 0.0;
        return 2 / std::sqrt(R) * (v - base);
    };
    Estimate e = detail::half_line(head, tail, R, pts, spec, "weyl_half_derivative_difference");
    return {kappa_c0 * e.value, kappa_c0 * e.error, e.converged};
}

/// (1 - r^2)^4 on |r| < 1, rescaled to center c and radius a.
struct Bump {
    double center = 0;
    double radius = 1;

    double operator()(double v) const {
        const double r = (v - center) / radius;
        if (!(std::abs(r) < 1)) return 0;
        const double w = 1 - r * r;
        return w * w * w * w;
    }
    double derivative(double v) const {
        const double r = (v - center) / radius;
        if (!(std::abs(r) < 1)) return 0;
        const double w = 1 - r * r;
        return -8 * r * w * w * w / radius;
    }
    std::vector<double> breaks() const { return {center - radius, center, center + radius}; }
    double lo() const { return center - radius; }
    double hi() const { return center + radius; }
};

struct TensorBump {
    Bump u, z;
    double operator()(double uu, double zz) const { return u(uu) * z(zz); }
};

namespace detail {

inline double bump_half_derivative(const Bump& b, double v, const quad::QuadratureSpec& spec) {
    if (v >= b.hi()) return 0;
    return weyl_half_derivative([&b](double w) { return b.derivative(w); }, v, spec, b.breaks()).value;
}

}  // namespace detail

/// Residual |int int kappa(s,x,u,z) (d_u^{1/2} + d_z^{1/2}) phi(u,z) du dz + phi(s,x)|,
/// integrated in cone coordinates u = s + v xi, z = x + (1 - v) xi.
inline Estimate left_inverse_residual(const TensorBump& phi, double s, double x,
                                      const quad::QuadratureSpec& spec = quad::QuadratureSpec{}.tolerances(1e-7, 1e-11)) {
    const double xi_max = (phi.u.hi() - s) + (phi.z.hi() - x);
    const double target = phi(s, x);
    if (!(xi_max > 0)) return {std::abs(target), 0, true};
    const quad::QuadratureSpec inner = spec.tolerances(spec.rel_tol * 0.1, spec.abs_tol * 0.1);
    const quad::QuadratureSpec weyl = spec.tolerances(1e-10, 1e-13);
    const std::vector<double> ue = phi.u.breaks(), ze = phi.z.breaks();

    auto psi = [&](double u, double z) {
        double r = 0;
        const double bz = phi.z(z), bu = phi.u(u);
        if (bz != 0) r += detail::bump_half_derivative(phi.u, u, weyl) * bz;
        if (bu != 0) r += bu * detail::bump_half_derivative(phi.z, z, weyl);
        return r;
    };
    auto line = [&](double xi) -> Estimate {
        std::vector<double> vs;
        for (double a : ue) vs.push_back((a - s) / xi);
        for (double b : ze) vs.push_back(1 - (b - x) / xi);
        const auto pts = detail::sorted_points(0.0, 1.0, vs);
        const Estimate e = quad::integrate_1d([&](double v) { return psi(s + v * xi, x + (1 - v) * xi); }, pts,
                                              inner.plain());
        const double w = 1 / std::sqrt(xi);
        return {w * e.value, w * e.error, e.converged};
    };
    std::vector<double> xs;
    for (double a : ue) xs.push_back(a - s);
    for (double b : ze) xs.push_back(b - x);
    for (double a : ue)
        for (double b : ze) xs.push_back((a - s) + (b - x));
    const auto pts = detail::sorted_points(0.0, xi_max, xs);
    const Estimate I = quad::integrate_1d(line, pts, spec.with(quad::Substitution::sqrt, quad::Endpoint::left));
    return {std::abs(kappa_c0 * I.value + target), kappa_c0 * I.error, I.converged};
}

// ---------------------------------------------------------------------------
// Slice constants of the two-subordinator example

inline double euler_beta(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

namespace detail {
inline void check_kappa_params(double c, double p) {
    if (!(p > 0 && p < 0.5)) throw input_error("p must lie in (0, 1/2)");
    if (!(c > 0)) throw input_error("c must be > 0");
}
inline double kappa_eta_factor(double c, double p) {
    return 2 * std::numbers::sqrt2 * c * (euler_beta(0.5 - p, 1) + euler_beta(0.5, 1 - p));
}
}  // namespace detail

/// 2 sqrt 2 c [B(1/2 - p, 1) + B(1/2, 1 - p)] h^{1/2 - p}.
inline double eta_for_kappa(double c, double p, double h) {
    detail::check_kappa_params(c, p);
    if (!(h > 0)) throw input_error("h must be > 0");
    return detail::kappa_eta_factor(c, p) * std::pow(h, 0.5 - p);
}

/// The h with eta_for_kappa(c, p, h) = eta_target.
inline double solve_h(double c, double p, double eta_target) {
    detail::check_kappa_params(c, p);
    if (!(eta_target > 0)) throw input_error("eta target must be > 0");
    return std::pow(eta_target / detail::kappa_eta_factor(c, p), 1 / (0.5 - p));
}

namespace detail {

/// Integrates over consecutive pieces of `pts` with power substitutions of
/// order gl at the left end and gr at the right end (1 = none).
template <class Piece>
Estimate integrate_graded(Piece&& piece, const std::vector<double>& pts, double gl, double gr,
                          const quad::QuadratureSpec& spec) {
    Estimate total{0, 0, true};
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = pts[i], b = pts[i + 1];
        std::vector<std::pair<double, double>> parts;
        const bool first = i == 0 && gl > 1, last = i + 2 == n && gr > 1;
        if (first && last) {
            const double m = 0.5 * (a + b);
            parts = {{a, m}, {m, b}};
        } else {
            parts = {{a, b}};
        }
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto [lo, hi] = parts[k];
            quad::QuadratureSpec sp = spec.plain();
            if (first && k == 0)
                sp = spec.with(quad::Substitution::power, quad::Endpoint::left, gl);
            else if (last && k + 1 == parts.size())
                sp = spec.with(quad::Substitution::power, quad::Endpoint::right, gr);
            const Estimate e = piece(lo, hi, sp);
            total.value += e.value;
            total.error += e.error;
            total.converged = total.converged && e.converged;
        }
    }
    return total;
}

}  // namespace detail

/// int int over {(u,z): s<u<t, x<z<y, a_lo <= u+z < a_hi} of
/// [(u+z-alpha)^{-3/2} + (omega-u-z)^{-3/2}] (u+z)^{-p} du dz with alpha = s + x,
/// omega = t + y, by tensor quadrature in (u + z, position along the level line).
inline Estimate kappa_slice_integral(double p, double s, double x, double t, double y, double a_lo, double a_hi,
                                     const quad::QuadratureSpec& spec = {}) {
    if (!(p >= 0 && p < 0.5)) throw input_error("p must lie in [0, 1/2)");
    const double alpha = s + x, omega = t + y;
    const double lo = std::max({a_lo, alpha, 0.0}), hi = std::min(a_hi, omega);
    if (!(hi > lo)) return {0, 0, true};
    auto f = [&](std::span<const double> v) {
        const double xi = v[0];
        const double a = std::max(s, xi - y), b = std::min(t, xi - x);
        if (!(b > a)) return 0.0;
        const double w = std::pow(xi - alpha, -1.5) + std::pow(omega - xi, -1.5);
        return w * std::pow(xi, -p) * (b - a);
    };
    const auto cuts = detail::sorted_points(lo, hi, {alpha + (t - s), alpha + (y - x)});
    const double gl = lo == 0 ? 2 / (1 - 2 * p) : 2, gr = 2;
    return detail::integrate_graded(
        [&](double a, double b, const quad::QuadratureSpec& sp) {
            return quad::integrate_nd(f, quad::Box{{a, 0.0}, {b, 1.0}}, spec, {sp, spec.plain()});
        },
        cuts, lo == alpha || lo == 0 ? gl : 1, hi == omega ? gr : 1, spec);
}

/// Exact K_j f / f at (s, x) for kappa perturbed by q0 = c (u+z)^{-p} restricted
/// to the diagonal slice {a_lo <= u + z < a_hi}, with f = kappa(., ., t, y).
/// Reduced to a one-dimensional integral along xi = u - s + z - x.
inline Estimate kappa_slice_ratio(double c, double p, double s, double x, double t, double y, double a_lo,
                                  double a_hi, const quad::QuadratureSpec& spec = {}) {
    detail::check_kappa_params(c, p);
    const double D = (t - s) + (y - x);
    if (!(t > s) || !(y > x)) return {0, 0, true};
    const double alpha = s + x;
    const double lo = std::max(0.0, a_lo - alpha), hi = std::min(D, a_hi - alpha);
    if (!(hi > lo)) return {0, 0, true};
    auto len = [=](double xi) {
        const double vhi = std::min({1.0, (t - s) / xi, 1 + x / xi});
        const double vlo = std::max({0.0, 1 - (y - x) / xi, -s / xi});
        return std::max(0.0, vhi - vlo);
    };
    auto f = [&](double xi) {
        if (!(xi > 0) || !(xi < D)) return 0.0;
        const double l = len(xi);
        if (l == 0) return 0.0;
        const double w = std::pow(D / (D - xi), 1.5) / std::sqrt(xi);
        return kappa_c0 * w * c * std::pow(alpha + xi, -p) * l;
    };
    const auto pts = detail::sorted_points(lo, hi, {t - s, y - x, -s, -x, -alpha});
    const double gl = lo == 0 ? (alpha == 0 ? 2 / (1 - 2 * p) : 2) : (alpha + lo == 0 ? 1 / (1 - p) : 1);
    return detail::integrate_graded(
        [&](double a, double b, const quad::QuadratureSpec& sp) { return quad::integrate_1d(f, a, b, sp); }, pts,
        gl, hi == D ? 2 : 1, spec);
}

// ---------------------------------------------------------------------------
// Kato modulus

struct KatoResult {
    double value = 0;  // k(h)
    double forward = 0;
    double backward = 0;
    double arg_x = 0;
    double arg_y = 0;
    std::size_t samples = 0;
    std::string provenance;
};

namespace detail {

// int p(0, x, u, z) q(z) dz (forward) or int p(0, z, u, x) q(z) dz (backward).
inline Estimate kato_space_integral(const SpaceTimeKernel& p, const Density& q, double u,
                                    std::span<const double> x, bool forward, const quad::QuadratureSpec& spec) {
    const std::size_t d = p.dim();
    const double sc = p.spatial_scale(u);
    auto dens = [&](std::span<const double> z) {
        return forward ? p.density(0, x, u, z) : p.density(0, z, u, x);
    };
    if (d == 1) {
        auto f = [&](double z) {
            const double zz[1] = {z};
            return dens(zz) * q(0, std::span<const double>(zz, 1));
        };
        std::vector<double> br{x[0]};
        for (double k : {1.0, -1.0, 8.0, -8.0}) br.push_back(x[0] + k * sc);
        if (q.kind == DensityKind::power && q.eps < 1) {
            const auto neg = sorted_points(-inf, 0.0, br), pos = sorted_points(0.0, inf, br);
            const Estimate a = quad::integrate_1d(f, neg, spec.with(quad::Substitution::sqrt, quad::Endpoint::right));
            const Estimate b = quad::integrate_1d(f, pos, spec.with(quad::Substitution::sqrt, quad::Endpoint::left));
            return {a.value + b.value, a.error + b.error, a.converged && b.converged};
        }
        return quad::integrate_1d(f, sorted_points(-inf, inf, br), spec);
    }
    if (d == 2) {
        // Polar coordinates about the origin, where a power density is singular.
        const double rx = std::hypot(x[0], x[1]);
        const double th0 = rx > 0 ? std::atan2(x[1], x[0]) : 0.0;
        auto radial = [&](double r) -> Estimate {
            const double weight = q(0, std::vector<double>{r, 0.0}) * r;
            if (weight == 0) return {0, 0, true};
            if (rx == 0) {
                const double z[2] = {r, 0.0};
                return {weight * 2 * pi * dens(z), 0, true};
            }
            auto ang = [&](double th) {
                const double z[2] = {r * std::cos(th0 + th), r * std::sin(th0 + th)};
                return dens(z);
            };
            std::vector<double> tb{0.0};
            if (rx > 0 && r > 0) {
                const double w = std::min(pi, sc / r);
                tb.insert(tb.end(), {-w, w, -4 * w, 4 * w});
            }
            const Estimate e = quad::integrate_1d(ang, sorted_points(-pi, pi, tb),
                                                  spec.plain().tolerances(std::max(spec.rel_tol, 1e-8), spec.abs_tol));
            return {weight * e.value, weight * e.error, e.converged};
        };
        std::vector<double> rb{rx};
        for (double k : {1.0, -1.0, 8.0, -8.0}) rb.push_back(rx + k * sc);
        return quad::integrate_1d(radial, sorted_points(0.0, inf, rb),
                                  spec.with(quad::Substitution::sqrt, quad::Endpoint::left));
    }
    throw input_error("kato_modulus supports d = 1 and d = 2");
}

}  // namespace detail

/// k(h) = sup over x, y and s < t <= s + h of int int_{(s,t)} [p(s,x,u,z) + p(u,z,t,y)] dmu(u,z).
/// For a translation-invariant kernel and a time-homogeneous atomless measure
/// both parts grow with t - s and separate in x and y, so s = 0, t = h and the
/// sup is taken over sampled x (forward part) and y (backward part).
inline KatoResult kato_modulus(const SpaceTimeKernel& p, const PerturbingMeasure& mu, double h,
                               const std::vector<std::vector<double>>& samples = {},
                               const quad::QuadratureSpec& spec = quad::QuadratureSpec{}.tolerances(1e-9, 1e-12)) {
    if (!(h > 0)) throw input_error("kato_modulus: h must be > 0");
    if (!mu.atoms().empty()) throw input_error("kato_modulus supports atomless measures only");
    if (!mu.density().time_homogeneous()) throw input_error("kato_modulus needs a time-homogeneous density");
    const Interval& sup = mu.support();
    if (mu.has_density() && !(sup.lo == -inf && sup.hi == inf))
        throw input_error("kato_modulus needs a measure supported on all times");
    KatoResult r;
    r.provenance = "s = 0, t = h; sup over sampled spatial points";
    if (!mu.has_density()) return r;
    const std::size_t d = p.dim();
    std::vector<std::vector<double>> pts = samples;
    if (pts.empty()) {
        // In d = 2 only |x| matters for the radial densities supported here.
        const std::vector<double> grid = d == 1 ? std::vector<double>{0.0, 0.05, -0.05, 0.2, -0.2, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0}
                                                : std::vector<double>{0.0, 0.25, 1.0};
        for (double v : grid) {
            std::vector<double> pt(d, 0.0);
            pt[0] = v;
            pts.push_back(pt);
        }
    }
    for (const auto& pt : pts)
        if (pt.size() != d) throw input_error("kato sample dimension does not match kernel");
    const Density& q = mu.density();
    auto part = [&](const std::vector<double>& x, bool forward) {
        auto g = [&](double u) {
            const double tau = forward ? u : h - u;
            if (!(tau > 0)) return Estimate{0, 0, true};
            return detail::kato_space_integral(p, q, tau, x, forward, spec);
        };
        const Estimate e = quad::integrate_1d(
            g, 0.0, h, spec.with(quad::Substitution::sqrt, forward ? quad::Endpoint::left : quad::Endpoint::right));
        if (!e.converged || !std::isfinite(e.value)) {
            std::string where;
            for (double v : x) where += (where.empty() ? "" : ",") + std::to_string(v);
            throw convergence_error("kato_modulus: inner quadrature failed at x = (" + where + ")");
        }
        return e.value;
    };
    std::vector<double> fw(pts.size()), bw(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        fw[i] = part(pts[i], true);
        bw[i] = part(pts[i], false);
    });
    const auto fi = std::size_t(std::max_element(fw.begin(), fw.end()) - fw.begin());
    const auto bi = std::size_t(std::max_element(bw.begin(), bw.end()) - bw.begin());
    r.forward = fw[fi];
    r.backward = bw[bi];
    r.arg_x = pts[fi][0];
    r.arg_y = pts[bi][0];
    r.value = r.forward + r.backward;
    r.samples = 2 * pts.size();
    return r;
}

}  // namespace kp
