#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alphatron/error.hpp"

namespace alphatron {

using Vector = std::vector<double>;
using Bag = std::vector<Vector>;

// Largest explicit feature vector we are willing to materialize.
inline constexpr double feature_capacity = 1e7;

enum class KernelKind { multinomial, explicit_monomial, mean_map };

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::multinomial: return "multinomial";
        case KernelKind::explicit_monomial: return "explicit_monomial";
        case KernelKind::mean_map: return "mean_map";
    }
    return "unknown";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "multinomial") return KernelKind::multinomial;
    if (s == "explicit_monomial") return KernelKind::explicit_monomial;
    if (s == "mean_map") return KernelKind::mean_map;
    throw input_error("unknown kernel kind '" + s + "'");
}

inline std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Description of a kernel, self-contained enough to serialize with a model.
///
/// For `mean_map` the degree/normalization fields describe the base kernel
/// and `base_kind` names it; the base can never itself be a mean map.
/// `normalization_constant` is the divisor applied when `normalized` is set:
/// sum_{j<=d} X^j for the multinomial kernel with input-norm bound X, and the
/// number of monomials of degree <= d for the hypercube monomial kernel.
struct KernelSpec {
    KernelKind kind = KernelKind::multinomial;
    int degree = 1;
    bool normalized = true;
    double declared_norm_bound = 1.0;
    int dimension = 0;
    KernelKind base_kind = KernelKind::multinomial;
    double normalization_constant = 2.0;

    static KernelSpec multinomial(int d, bool normalized = true, double norm_bound = 1.0) {
        KernelSpec s;
        s.kind = KernelKind::multinomial;
        s.degree = d;
        s.normalized = normalized;
        s.declared_norm_bound = norm_bound;
        s.base_kind = KernelKind::multinomial;
        s.normalization_constant = compute_constant(s);
        s.validate();
        return s;
    }

    static KernelSpec explicit_monomial(int d, int n, bool normalized = true) {
        KernelSpec s;
        s.kind = KernelKind::explicit_monomial;
        s.degree = d;
        s.normalized = normalized;
        s.dimension = n;
        s.base_kind = KernelKind::explicit_monomial;
        s.normalization_constant = compute_constant(s);
        s.validate();
        return s;
    }

    static KernelSpec mean_map(const KernelSpec& base) {
        if (base.kind == KernelKind::mean_map) throw input_error("mean map base cannot be a mean map");
        KernelSpec s = base;
        s.kind = KernelKind::mean_map;
        s.base_kind = base.kind;
        s.validate();
        return s;
    }

    KernelSpec base() const {
        if (kind != KernelKind::mean_map) return *this;
        KernelSpec b = *this;
        b.kind = base_kind;
        return b;
    }

    static double compute_constant(const KernelSpec& s) {
        const KernelKind k = s.kind == KernelKind::mean_map ? s.base_kind : s.kind;
        if (k == KernelKind::explicit_monomial) {
            double c = 0.0;
            for (int j = 0; j <= s.degree; ++j) c += static_cast<double>(binomial(s.dimension, j));
            return c;
        }
        double c = 0.0, p = 1.0;
        for (int j = 0; j <= s.degree; ++j) {
            c += p;
            p *= s.declared_norm_bound;
        }
        return c;
    }

    void validate() const {
        if (degree < 0) throw input_error("kernel degree must be >= 0");
        if (base_kind == KernelKind::mean_map) throw input_error("mean map base cannot be a mean map");
        if (kind != KernelKind::mean_map && base_kind != kind) throw input_error("base_kind must equal kind");
        if (!(declared_norm_bound > 0.0) || !std::isfinite(declared_norm_bound))
            throw input_error("declared_norm_bound must be positive");
        const KernelKind k = kind == KernelKind::mean_map ? base_kind : kind;
        if (k == KernelKind::explicit_monomial && dimension < 1)
            throw input_error("explicit monomial kernel needs dimension >= 1");
        if (!(normalization_constant > 0.0)) throw input_error("normalization constant must be positive");
        const double expected = compute_constant(*this);
        if (std::abs(normalization_constant - expected) > 1e-9 * expected)
            throw input_error("normalization constant does not match the declared bound");
    }

    bool operator==(const KernelSpec&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw input_error("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace detail {

// sum_{j=0}^{d} s^j with 0^0 = 1. Horner for small d; for d > 16 the powers
// are accumulated with Neumaier compensation.
inline double geometric_sum(double s, int d) {
    if (d <= 16) {
        double r = 1.0;
        for (int j = 0; j < d; ++j) r = r * s + 1.0;
        return r;
    }
    double sum = 0.0, comp = 0.0, p = 1.0;
    for (int j = 0; j <= d; ++j) {
        const double t = sum + p;
        if (std::abs(sum) >= std::abs(p))
            comp += (sum - t) + p;
        else
            comp += (p - t) + sum;
        sum = t;
        p *= s;
    }
    return sum + comp;
}

inline void require_boolean(std::span<const double> x) {
    for (double v : x)
        if (v != 1.0 && v != -1.0) throw input_error("point is not in {-1,1}^n");
}

}  // namespace detail

/// MK_d(x, x2) = sum_{j=0}^d (x . x2)^j, divided by sum_{j<=d} X^j when normalized.
inline double multinomial_kernel(std::span<const double> x, std::span<const double> x2, int d, bool normalized,
                                 double norm_bound = 1.0) {
    if (d < 0) throw input_error("kernel degree must be >= 0");
    const double k = detail::geometric_sum(dot(x, x2), d);
    if (!normalized) return k;
    return k / detail::geometric_sum(norm_bound, d);
}

/// sum_{|S|<=d} chi_S(x) chi_S(x2) over the hypercube. Computed from the
/// elementary symmetric polynomials of z_i = x_i x2_i.
inline double monomial_kernel(std::span<const double> x, std::span<const double> x2, int d) {
    if (x.size() != x2.size()) throw input_error("dimension mismatch");
    detail::require_boolean(x);
    detail::require_boolean(x2);
    const int top = std::min<int>(d, static_cast<int>(x.size()));
    std::vector<double> e(static_cast<std::size_t>(top) + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = x[i] * x2[i];
        for (int j = top; j >= 1; --j) e[j] += z * e[j - 1];
    }
    double s = 0.0;
    for (double v : e) s += v;
    return s;
}

/// Tuple-indexed multinomial feature map psi_d, unnormalized. Entries are
/// ordered by tuple length, then lexicographically by (k_1, ..., k_j).
inline Vector explicit_feature_map(std::span<const double> x, int d) {
    if (d < 0) throw input_error("kernel degree must be >= 0");
    const double n = static_cast<double>(x.size());
    if (std::pow(n, d) > feature_capacity) throw capacity_error("explicit feature map exceeds n^d <= 1e7 budget");
    Vector out{1.0};
    Vector level{1.0};
    for (int j = 1; j <= d; ++j) {
        Vector next;
        next.reserve(level.size() * x.size());
        for (double prev : level)
            for (double xi : x) next.push_back(prev * xi);
        out.insert(out.end(), next.begin(), next.end());
        level = std::move(next);
    }
    return out;
}

/// Subsets S of [n] with |S| <= d, ordered by size then lexicographically.
inline std::vector<std::vector<int>> low_degree_subsets(int n, int d) {
    std::vector<std::vector<int>> out{{}};
    std::vector<int> cur;
    for (int size = 1; size <= std::min(d, n); ++size) {
        cur.resize(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) cur[static_cast<std::size_t>(i)] = i;
        while (true) {
            out.push_back(cur);
            int i = size - 1;
            while (i >= 0 && cur[static_cast<std::size_t>(i)] == n - size + i) --i;
            if (i < 0) break;
            ++cur[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < size; ++k) cur[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k - 1)] + 1;
        }
    }
    return out;
}

/// Subset-indexed parity features chi_S(x) for |S| <= d.
inline Vector monomial_basis_map(std::span<const double> x, int d) {
    if (d < 0) throw input_error("kernel degree must be >= 0");
    detail::require_boolean(x);
    const int n = static_cast<int>(x.size());
    double count = 0.0;
    for (int j = 0; j <= std::min(d, n); ++j) count += static_cast<double>(binomial(n, j));
    if (count > feature_capacity) throw capacity_error("monomial basis exceeds feature budget");
    Vector out;
    out.reserve(static_cast<std::size_t>(count));
    for (const auto& s : low_degree_subsets(n, d)) {
        double v = 1.0;
        for (int i : s) v *= x[static_cast<std::size_t>(i)];
        out.push_back(v);
    }
    return out;
}

/// Kernel between two points under a non-mean-map spec.
inline double evaluate(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
    switch (spec.kind) {
        case KernelKind::multinomial: {
            const double k = multinomial_kernel(a, b, spec.degree, false);
            return spec.normalized ? k / spec.normalization_constant : k;
        }
        case KernelKind::explicit_monomial: {
            if (static_cast<int>(a.size()) != spec.dimension) throw input_error("dimension does not match kernel spec");
            const double k = monomial_kernel(a, b, spec.degree);
            return spec.normalized ? k / spec.normalization_constant : k;
        }
        case KernelKind::mean_map: break;
    }
    throw input_error("mean map kernel needs bag inputs");
}

/// K_mean(S, T) = 1/(|S||T|) sum_{s in S, t in T} K(s, t).
inline double mean_map_kernel(const Bag& s, const Bag& t, const KernelSpec& base) {
    if (s.empty() || t.empty()) throw input_error("mean map kernel needs non-empty bags");
    const KernelSpec b = base.base();
    double sum = 0.0;
    for (const auto& a : s)
        for (const auto& c : t) sum += evaluate(b, a, c);
    return sum / static_cast<double>(s.size() * t.size());
}

inline double evaluate(const KernelSpec& spec, const Bag& a, const Bag& b) {
    if (spec.kind != KernelKind::mean_map) throw input_error("bag inputs need a mean map kernel");
    return mean_map_kernel(a, b, spec);
}

template <class T>
concept KernelInput = std::same_as<T, Vector> || std::same_as<T, Bag>;

/// Dense m x m kernel matrix, row-major.
struct GramMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;

    double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {entries.data() + i * cols, cols}; }
    std::size_t size() const { return rows; }
};

/// Gram matrix of `samples`; the upper triangle is computed and mirrored so
/// the result is exactly symmetric.
template <KernelInput X>
GramMatrix gram(const std::vector<X>& samples, const KernelSpec& spec) {
    const std::size_t m = samples.size();
    GramMatrix g{m, m, std::vector<double>(m * m)};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const double k = evaluate(spec, samples[i], samples[j]);
            g(i, j) = k;
            g(j, i) = k;
        }
    }
    return g;
}

/// Rectangular kernel matrix K(rows_i, cols_j).
template <KernelInput X>
GramMatrix cross_gram(const std::vector<X>& rows, const std::vector<X>& cols, const KernelSpec& spec) {
    GramMatrix g{rows.size(), cols.size(), std::vector<double>(rows.size() * cols.size())};
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) g(i, j) = evaluate(spec, rows[i], cols[j]);
    return g;
}

}  // namespace alphatron
