#pragma once

// Finite-state kernels: K(x,{y}) stored as a nonnegative n x n matrix. This
// is the exact oracle for the absorbing-set identities and the geometric
// decay of Neumann series. Everything is templated on the scalar so the same
// code runs on dyadic doubles (exact for the identity checks) and on GMP
// rationals (exact through division).

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kp/core.hpp"

namespace kp {

template <class T>
struct scalar_traits {
    static constexpr bool exact = false;
    static bool is_inf(const T& x) { return std::isinf(x); }
    static double to_double(const T& x) { return double(x); }
};

template <>
struct scalar_traits<mpq_class> {
    static constexpr bool exact = true;
    static bool is_inf(const mpq_class&) { return false; }
    static double to_double(const mpq_class& x) { return x.get_d(); }
};

/// Product with the measure-theoretic convention 0 * inf = 0.
template <class T>
T mul0(const T& a, const T& b) {
    if (a == 0 || b == 0) return T(0);
    return a * b;
}

template <class T>
double to_double(const T& x) {
    return scalar_traits<T>::to_double(x);
}

// ---------------------------------------------------------------------------

/// Subset of the state space {0..n-1}.
class StateSet {
public:
    StateSet() = default;
    explicit StateSet(std::size_t n, bool all = false) : mask_(n, all) {}

    static StateSet of(std::size_t n, const std::vector<std::size_t>& members) {
        StateSet s(n);
        for (auto i : members) {
            if (i >= n) throw input_error("state index " + std::to_string(i) + " out of range");
            s.mask_[i] = true;
        }
        return s;
    }

    std::size_t size() const { return mask_.size(); }
    bool contains(std::size_t i) const { return mask_[i]; }
    void insert(std::size_t i) { mask_.at(i) = true; }

    std::size_t count() const { return std::size_t(std::count(mask_.begin(), mask_.end(), true)); }
    bool empty() const { return count() == 0; }

    std::vector<std::size_t> members() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < mask_.size(); ++i)
            if (mask_[i]) out.push_back(i);
        return out;
    }

    bool subset_of(const StateSet& o) const {
        check_same(o);
        for (std::size_t i = 0; i < mask_.size(); ++i)
            if (mask_[i] && !o.mask_[i]) return false;
        return true;
    }

    StateSet operator|(const StateSet& o) const { return combine(o, [](bool a, bool b) { return a || b; }); }
    StateSet operator&(const StateSet& o) const { return combine(o, [](bool a, bool b) { return a && b; }); }
    StateSet operator-(const StateSet& o) const { return combine(o, [](bool a, bool b) { return a && !b; }); }
    StateSet complement() const {
        StateSet s(size());
        for (std::size_t i = 0; i < size(); ++i) s.mask_[i] = !mask_[i];
        return s;
    }

    bool operator==(const StateSet&) const = default;

private:
    void check_same(const StateSet& o) const {
        if (o.size() != size()) throw input_error("state sets have different sizes");
    }
    template <class Op>
    StateSet combine(const StateSet& o, Op op) const {
        check_same(o);
        StateSet s(size());
        for (std::size_t i = 0; i < size(); ++i) s.mask_[i] = op(mask_[i], o.mask_[i]);
        return s;
    }

    std::vector<bool> mask_;
};

// ---------------------------------------------------------------------------

template <class T>
class BasicMatrixKernel {
public:
    using value_type = T;

    BasicMatrixKernel() = default;

    /// Zero kernel on n states.
    explicit BasicMatrixKernel(std::size_t n) : n_(n), a_(n * n, T(0)) {}

    /// Row-major entries; every entry must be >= 0 and finite.
    BasicMatrixKernel(std::size_t n, std::vector<T> entries) : n_(n), a_(std::move(entries)) {
        if (n == 0) throw input_error("kernel needs at least one state");
        if (a_.size() != n * n) throw input_error("entry count does not match n*n");
        for (const auto& v : a_) {
            if (!(v >= 0)) throw input_error("kernel entries must be nonnegative");
            if (scalar_traits<T>::is_inf(v)) throw input_error("kernel entries must be finite");
        }
    }

    static BasicMatrixKernel from_rows(const std::vector<std::vector<T>>& rows) {
        const std::size_t n = rows.size();
        std::vector<T> e;
        e.reserve(n * n);
        for (const auto& r : rows) {
            if (r.size() != n) throw input_error("kernel rows must form a square matrix");
            e.insert(e.end(), r.begin(), r.end());
        }
        return BasicMatrixKernel(n, std::move(e));
    }

    static BasicMatrixKernel identity(std::size_t n, const T& scale = T(1)) {
        std::vector<T> e(n * n, T(0));
        for (std::size_t i = 0; i < n; ++i) e[i * n + i] = scale;
        return BasicMatrixKernel(n, std::move(e));
    }

    std::size_t size() const { return n_; }
    const T& operator()(std::size_t x, std::size_t y) const { return a_[x * n_ + y]; }
    std::span<const T> row(std::size_t x) const { return {a_.data() + x * n_, n_}; }
    const std::vector<T>& entries() const { return a_; }

    bool operator==(const BasicMatrixKernel&) const = default;

    /// Entrywise L <= K.
    bool dominated_by(const BasicMatrixKernel& k) const {
        if (k.n_ != n_) throw input_error("kernel dimension mismatch");
        for (std::size_t i = 0; i < a_.size(); ++i)
            if (a_[i] > k.a_[i]) return false;
        return true;
    }

    BasicMatrixKernel scaled(const T& c) const {
        std::vector<T> e = a_;
        for (auto& v : e) v *= c;
        return BasicMatrixKernel(n_, std::move(e));
    }

private:
    std::size_t n_ = 0;
    std::vector<T> a_;
};

using MatrixKernel = BasicMatrixKernel<double>;
using RationalKernel = BasicMatrixKernel<mpq_class>;

/// Exact conversion double -> rational (every double is a dyadic rational).
inline RationalKernel to_rational(const MatrixKernel& k) {
    std::vector<mpq_class> e;
    e.reserve(k.entries().size());
    for (double v : k.entries()) e.emplace_back(v);
    return RationalKernel(k.size(), std::move(e));
}

inline std::vector<mpq_class> to_rational(std::span<const double> v) {
    return {v.begin(), v.end()};
}

enum class Side { left, right, both };

namespace detail {
inline void check_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw input_error(std::string(what) + ": dimension mismatch");
}
}  // namespace detail

/// Kf(x) = sum_y K(x,{y}) f(y). Entries of f may be +inf (0 * inf = 0).
template <class T>
std::vector<T> apply(const BasicMatrixKernel<T>& k, std::span<const T> f) {
    detail::check_dim(k.size(), f.size(), "apply");
    std::vector<T> out(k.size(), T(0));
    for (std::size_t x = 0; x < k.size(); ++x) {
        T acc(0);
        for (std::size_t y = 0; y < k.size(); ++y) {
            if (!(f[y] >= 0)) throw input_error("apply: f must be nonnegative");
            acc += mul0(k(x, y), f[y]);
        }
        out[x] = acc;
    }
    return out;
}

template <class T>
std::vector<T> apply(const BasicMatrixKernel<T>& k, const std::vector<T>& f) {
    return kp::apply(k, std::span<const T>(f));
}

/// (KL)(x,{y}) = sum_z K(x,{z}) L(z,{y}).
template <class T>
BasicMatrixKernel<T> compose(const BasicMatrixKernel<T>& k, const BasicMatrixKernel<T>& l) {
    detail::check_dim(k.size(), l.size(), "compose");
    const std::size_t n = k.size();
    std::vector<T> e(n * n, T(0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < n; ++m) {
            if (k(i, m) == 0) continue;
            for (std::size_t j = 0; j < n; ++j) e[i * n + j] += k(i, m) * l(m, j);
        }
    return BasicMatrixKernel<T>(n, std::move(e));
}

template <class T>
BasicMatrixKernel<T> power(const BasicMatrixKernel<T>& k, unsigned m) {
    auto r = BasicMatrixKernel<T>::identity(k.size());
    for (unsigned i = 0; i < m; ++i) r = compose(r, k);
    return r;
}

/// Multiplication by the indicator 1_A: left zeroes rows outside A (1_A K),
/// right zeroes columns outside A (K 1_A), both does both (1_A K 1_A).
template <class T>
BasicMatrixKernel<T> restrict(const BasicMatrixKernel<T>& k, const StateSet& a, Side side) {
    detail::check_dim(k.size(), a.size(), "restrict");
    const std::size_t n = k.size();
    std::vector<T> e = k.entries();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const bool keep_row = side == Side::right || a.contains(i);
            const bool keep_col = side == Side::left || a.contains(j);
            if (!(keep_row && keep_col)) e[i * n + j] = T(0);
        }
    return BasicMatrixKernel<T>(n, std::move(e));
}

/// K(x, A^c) = 0 for every x in A.
template <class T>
bool is_absorbing(const BasicMatrixKernel<T>& k, const StateSet& a) {
    detail::check_dim(k.size(), a.size(), "is_absorbing");
    for (std::size_t x = 0; x < k.size(); ++x) {
        if (!a.contains(x)) continue;
        for (std::size_t y = 0; y < k.size(); ++y)
            if (!a.contains(y) && k(x, y) != 0) return false;
    }
    return true;
}

/// 1_A K^m = (1_A K)^m = 1_A K^m 1_A for absorbing A. When (f, c) with
/// Kf <= c f on A is supplied, also checks K^m f <= c^m f on A.
template <class T>
bool verify_power_identity(const BasicMatrixKernel<T>& k, const StateSet& a, unsigned m,
                           const std::vector<T>* f, const T* c) {
    if (m < 1) throw input_error("verify_power_identity: m must be >= 1");
    if (!is_absorbing(k, a)) throw precondition_error("verify_power_identity: set is not absorbing");
    const auto km = power(k, m);
    const auto lhs = restrict(km, a, Side::left);
    const auto mid = power(restrict(k, a, Side::left), m);
    const auto rhs = restrict(km, a, Side::both);
    if (!(lhs == mid && mid == rhs)) return false;
    if (f && c) {
        const auto kf = kp::apply(k, *f);
        for (std::size_t x = 0; x < k.size(); ++x)
            if (a.contains(x) && kf[x] > mul0(*c, (*f)[x]))
                throw precondition_error("verify_power_identity: Kf <= cf fails on A", long(x));
        std::vector<T> g = *f;
        for (unsigned i = 0; i < m; ++i) g = kp::apply(k, g);
        T cm(1);
        for (unsigned i = 0; i < m; ++i) cm *= *c;
        for (std::size_t x = 0; x < k.size(); ++x)
            if (a.contains(x) && g[x] > mul0(cm, (*f)[x])) return false;
    }
    return true;
}

template <class T>
bool verify_power_identity(const BasicMatrixKernel<T>& k, const StateSet& a, unsigned m) {
    return verify_power_identity<T>(k, a, m, nullptr, nullptr);
}

template <class T>
bool verify_power_identity(const BasicMatrixKernel<T>& k, const StateSet& a, unsigned m,
                           const std::vector<T>& f, const T& c) {
    return verify_power_identity<T>(k, a, m, &f, &c);
}

/// 1_B K^m 1_{B\A} = 1_B (K 1_{B\A})^m = 1_{B\A} (K 1_{B\A})^m for nested
/// absorbing A subset B.
template <class T>
bool verify_slice_identity(const BasicMatrixKernel<T>& k, const StateSet& a, const StateSet& b,
                           unsigned m) {
    if (m < 1) throw input_error("verify_slice_identity: m must be >= 1");
    if (!a.subset_of(b)) throw precondition_error("verify_slice_identity: A is not a subset of B");
    if (!is_absorbing(k, a) || !is_absorbing(k, b))
        throw precondition_error("verify_slice_identity: A and B must be absorbing");
    const StateSet diff = b - a;
    const auto k_diff = restrict(k, diff, Side::right);
    const auto lhs = restrict(restrict(power(k, m), b, Side::left), diff, Side::right);
    const auto mid = restrict(power(k_diff, m), b, Side::left);
    const auto rhs = restrict(power(k_diff, m), diff, Side::left);
    return lhs == mid && mid == rhs;
}

// ---------------------------------------------------------------------------

/// Nested absorbing sets A_1 <= ... <= A_k with slices S_j = A_j \ A_{j-1}.
/// Indices are 0-based: set(0) is A_1, slice(0) is S_1.
class AbsorbingChain {
public:
    AbsorbingChain() = default;

    template <class T>
    AbsorbingChain(const BasicMatrixKernel<T>& k, std::vector<StateSet> sets) : sets_(std::move(sets)) {
        if (sets_.empty()) throw input_error("absorbing chain needs at least one set");
        StateSet prev(k.size());
        for (std::size_t j = 0; j < sets_.size(); ++j) {
            detail::check_dim(sets_[j].size(), k.size(), "AbsorbingChain");
            if (!prev.subset_of(sets_[j]))
                throw precondition_error("absorbing chain is not nested", long(j));
            if (!is_absorbing(k, sets_[j]))
                throw precondition_error("chain set is not absorbing", long(j));
            slices_.push_back(sets_[j] - prev);
            prev = sets_[j];
        }
    }

    std::size_t length() const { return sets_.size(); }
    const StateSet& set(std::size_t j) const { return sets_.at(j); }
    const StateSet& slice(std::size_t j) const { return slices_.at(j); }
    const StateSet& top() const { return sets_.back(); }
    const std::vector<StateSet>& sets() const { return sets_; }

    /// Slice index of state x, or -1 outside A_k.
    long slice_of(std::size_t x) const {
        for (std::size_t j = 0; j < slices_.size(); ++j)
            if (slices_[j].contains(x)) return long(j);
        return -1;
    }

private:
    std::vector<StateSet> sets_;
    std::vector<StateSet> slices_;
};

// ---------------------------------------------------------------------------

template <class T>
struct VectorSeries {
    std::vector<T> value;
    std::size_t terms = 0;  // number of terms summed (M + 1)
    SeriesStatus status = SeriesStatus::truncated;
    double tail_estimate = inf;
};

namespace detail {
template <class T>
double sup_norm(const std::vector<T>& v) {
    double m = 0;
    for (const auto& x : v) m = std::max(m, to_double(x));
    return m;
}
}  // namespace detail

/// Partial sums of sum_m K^m f. Converged when the newest term's sup norm is
/// below tail_tol times the partial sum's; diverging when the term norm fails
/// to decrease over 10 consecutive terms (power-iteration growth witness).
template <class T>
VectorSeries<T> neumann_series(const BasicMatrixKernel<T>& k, std::span<const T> f,
                               std::size_t max_terms = 10000, double tail_tol = 1e-14) {
    detail::check_dim(k.size(), f.size(), "neumann_series");
    VectorSeries<T> out;
    out.value.assign(f.begin(), f.end());
    std::vector<T> term(f.begin(), f.end());
    for (const auto& v : term)
        if (!(v >= 0)) throw input_error("neumann_series: f must be nonnegative");
    out.terms = 1;
    double prev_norm = detail::sup_norm(term);
    if (prev_norm == 0) {
        out.status = SeriesStatus::converged;
        out.tail_estimate = 0;
        return out;
    }
    int growth_run = 0;
    double ratio = 1;
    while (out.terms < max_terms) {
        term = kp::apply(k, term);
        for (std::size_t i = 0; i < term.size(); ++i) out.value[i] += term[i];
        ++out.terms;
        const double norm = detail::sup_norm(term);
        if (norm == 0) {
            out.status = SeriesStatus::converged;
            out.tail_estimate = 0;
            return out;
        }
        if (std::isinf(norm)) {
            out.status = SeriesStatus::diverging;
            return out;
        }
        ratio = norm / prev_norm;
        growth_run = ratio >= 1 ? growth_run + 1 : 0;
        prev_norm = norm;
        if (growth_run >= 10) {
            out.status = SeriesStatus::diverging;
            return out;
        }
        if (norm < tail_tol * detail::sup_norm(out.value)) {
            out.status = SeriesStatus::converged;
            out.tail_estimate = ratio < 1 ? norm * ratio / (1 - ratio) : inf;
            return out;
        }
    }
    out.status = SeriesStatus::truncated;
    out.tail_estimate = ratio < 1 ? prev_norm * ratio / (1 - ratio) : inf;
    return out;
}

template <class T>
VectorSeries<T> neumann_series(const BasicMatrixKernel<T>& k, const std::vector<T>& f,
                               std::size_t max_terms = 10000, double tail_tol = 1e-14) {
    return neumann_series(k, std::span<const T>(f), max_terms, tail_tol);
}

/// sum_m K^m f in closed form by solving (I - K) g = f. Returns nullopt when
/// the series diverges. For nonnegative K the solve is accepted only if the
/// solution of (I - K) u = 1 is strictly positive, which holds exactly when
/// the spectral radius is below 1.
template <class T>
std::optional<std::vector<T>> exact_neumann_sum(const BasicMatrixKernel<T>& k, std::span<const T> f) {
    detail::check_dim(k.size(), f.size(), "exact_neumann_sum");
    const std::size_t n = k.size();
    // Augmented system [I - K | f | 1].
    std::vector<std::vector<T>> m(n, std::vector<T>(n + 2, T(0)));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m[i][j] = (i == j ? T(1) : T(0)) - k(i, j);
        m[i][n] = f[i];
        m[i][n + 1] = T(1);
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = -1;
        for (std::size_t r = col; r < n; ++r) {
            const double mag = std::abs(to_double(m[r][col]));
            if (m[r][col] != 0 && mag > best) {
                best = mag;
                piv = r;
            }
        }
        if (m[piv][col] == 0) return std::nullopt;  // singular: spectral radius 1
        std::swap(m[piv], m[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || m[r][col] == 0) continue;
            const T factor = m[r][col] / m[col][col];
            for (std::size_t c = col; c < n + 2; ++c) m[r][c] -= factor * m[col][c];
        }
    }
    std::vector<T> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T u = m[i][n + 1] / m[i][i];
        if (!(u > 0)) return std::nullopt;
        g[i] = m[i][n] / m[i][i];
        if (g[i] < 0) g[i] = T(0);  // roundoff guard; exact scalars never hit it
    }
    return g;
}

template <class T>
std::optional<std::vector<T>> exact_neumann_sum(const BasicMatrixKernel<T>& k, const std::vector<T>& f) {
    return exact_neumann_sum(k, std::span<const T>(f));
}

/// K^n f <= c (1 - 1/c)^n f on A for 0 <= n <= n_max, plus the converse
/// bound sum_n K^n f <= c^2 f on A. The hypothesis sum_m K^m f <= c f on A
/// is verified first and reported with the violating state when it fails.
template <class T>
bool check_geometric_decay(const BasicMatrixKernel<T>& k, std::span<const T> f, const StateSet& a,
                           const T& c, unsigned n_max) {
    detail::check_dim(k.size(), f.size(), "check_geometric_decay");
    if (!(c >= 1)) throw input_error("check_geometric_decay: c must be >= 1");
    if (!is_absorbing(k, a)) throw precondition_error("check_geometric_decay: set is not absorbing");
    constexpr bool exact = scalar_traits<T>::exact;
    const T slack = exact ? T(1) : T(1 + 1e-12);

    std::vector<T> g;
    if constexpr (exact) {
        auto sum = exact_neumann_sum(k, f);
        if (!sum) {
            // Divergence off A is irrelevant; sum on A only sees the A-block.
            const auto ka = restrict(k, a, Side::both);
            std::vector<T> fa(f.begin(), f.end());
            for (std::size_t x = 0; x < fa.size(); ++x)
                if (!a.contains(x)) fa[x] = T(0);
            sum = exact_neumann_sum(ka, fa);
            if (!sum) throw precondition_error("check_geometric_decay: series diverges on A");
        }
        g = *sum;
    } else {
        const auto ka = restrict(k, a, Side::both);
        std::vector<T> fa(f.begin(), f.end());
        for (std::size_t x = 0; x < fa.size(); ++x)
            if (!a.contains(x)) fa[x] = T(0);
        const auto s = neumann_series(ka, fa, 100000, 1e-16);
        if (s.status == SeriesStatus::diverging)
            throw precondition_error("check_geometric_decay: series diverges on A");
        g = s.value;
    }
    for (std::size_t x = 0; x < k.size(); ++x)
        if (a.contains(x) && g[x] > mul0(c, f[x]) * slack)
            throw precondition_error("check_geometric_decay: sum K^m f <= c f fails", long(x));

    const T q = T(1) - T(1) / c;
    std::vector<T> term(f.begin(), f.end());
    T bound = c;
    for (unsigned n = 0; n <= n_max; ++n) {
        for (std::size_t x = 0; x < k.size(); ++x)
            if (a.contains(x) && term[x] > mul0(bound, f[x]) * slack) return false;
        term = kp::apply(k, term);
        bound *= q;
    }
    const T c2 = c * c;
    for (std::size_t x = 0; x < k.size(); ++x)
        if (a.contains(x) && g[x] > mul0(c2, f[x]) * slack) return false;
    return true;
}

template <class T>
bool check_geometric_decay(const BasicMatrixKernel<T>& k, const std::vector<T>& f, const StateSet& a,
                           const T& c, unsigned n_max) {
    return check_geometric_decay(k, std::span<const T>(f), a, c, n_max);
}

// ---------------------------------------------------------------------------

/// Random kernel that is block-lower-triangular with respect to a random
/// absorbing chain: a state in slice j only charges A_j. Entries are dyadic
/// (multiples of 2^-denominator_bits) so products stay exact in doubles.
struct ChainInstance {
    MatrixKernel kernel;
    AbsorbingChain chain;
    std::vector<double> f;  // strictly positive dyadic control vector
};

struct ChainInstanceSpec {
    std::size_t max_states = 8;
    std::size_t max_slices = 4;
    int denominator_bits = 4;      // entries are k / 2^bits
    long max_numerator = 4;        // k in [0, max_numerator]
    double fill = 0.6;             // probability an admissible entry is nonzero
};

inline ChainInstance random_chain_instance(CounterRng& rng, const ChainInstanceSpec& spec = {}) {
    const std::size_t n = std::size_t(rng.integer(2, long(spec.max_states)));
    const std::size_t k = std::size_t(rng.integer(1, long(std::min(n, spec.max_slices))));
    // Random assignment of states to slices, every slice nonempty.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[std::size_t(rng.integer(0, long(i - 1)))]);
    std::vector<std::size_t> slice_of(n);
    for (std::size_t i = 0; i < n; ++i)
        slice_of[order[i]] = i < k ? i : std::size_t(rng.integer(0, long(k - 1)));
    const double unit = std::ldexp(1.0, -spec.denominator_bits);
    std::vector<double> e(n * n, 0.0);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            if (slice_of[y] <= slice_of[x] && rng.uniform() < spec.fill)
                e[x * n + y] = unit * double(rng.integer(0, spec.max_numerator));
    MatrixKernel kernel(n, std::move(e));
    std::vector<StateSet> sets;
    for (std::size_t j = 0; j < k; ++j) {
        StateSet a(n);
        for (std::size_t x = 0; x < n; ++x)
            if (slice_of[x] <= j) a.insert(x);
        sets.push_back(a);
    }
    std::vector<double> f(n);
    for (auto& v : f) v = 0.25 * double(rng.integer(1, 8));
    AbsorbingChain chain(kernel, std::move(sets));
    return {std::move(kernel), std::move(chain), std::move(f)};
}

}  // namespace kp
