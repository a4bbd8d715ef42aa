#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "alphatron/error.hpp"
#include "alphatron/kernels.hpp"
#include "alphatron/rng.hpp"

namespace alphatron {

using Mask = std::uint32_t;

inline constexpr int max_oracle_dimension = 20;
inline constexpr int max_brute_dimension = 14;
inline constexpr double fourier_zero = 1e-15;
inline constexpr std::uint64_t default_query_budget = 10000000;

/// Coefficients indexed by subset bitmask (bit i <-> variable i).
struct SparseFourierPolynomial {
    int n = 0;
    std::map<Mask, double> coeffs;

    void set(Mask s, double c) {
        if (std::abs(c) < fourier_zero)
            coeffs.erase(s);
        else
            coeffs[s] = c;
    }

    double get(Mask s) const {
        const auto it = coeffs.find(s);
        return it == coeffs.end() ? 0.0 : it->second;
    }

    std::size_t size() const { return coeffs.size(); }
    bool empty() const { return coeffs.empty(); }

    bool operator==(const SparseFourierPolynomial&) const = default;
};

inline void prune(SparseFourierPolynomial& p) {
    std::erase_if(p.coeffs, [](const auto& kv) { return std::abs(kv.second) < fourier_zero; });
}

inline double l1(const SparseFourierPolynomial& p) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs) s += std::abs(c);
    return s;
}

inline double l2(const SparseFourierPolynomial& p) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs) s += c * c;
    return std::sqrt(s);
}

inline double linf(const SparseFourierPolynomial& p) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs) s = std::max(s, std::abs(c));
    return s;
}

/// sum_{|S| > d} P(S)^2.
inline double tail_mass(const SparseFourierPolynomial& p, int d) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs)
        if (std::popcount(m) > d) s += c * c;
    return s;
}

/// a + b * scale.
inline SparseFourierPolynomial axpy(const SparseFourierPolynomial& a, const SparseFourierPolynomial& b, double scale) {
    SparseFourierPolynomial r = a;
    r.n = std::max(a.n, b.n);
    for (const auto& [m, c] : b.coeffs) r.set(m, r.get(m) + scale * c);
    return r;
}

inline SparseFourierPolynomial difference(const SparseFourierPolynomial& a, const SparseFourierPolynomial& b) {
    return axpy(a, b, -1.0);
}

// Bits set where x_i == -1; chi_S(x) = (-1)^{popcount(S & bits)}.
inline Mask cube_bits(std::span<const double> x) {
    if (x.size() > 32) throw capacity_error("cube point wider than 32 bits");
    Mask b = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == -1.0)
            b |= Mask{1} << i;
        else if (x[i] != 1.0)
            throw input_error("point is not in {-1,1}^n");
    }
    return b;
}

inline Vector cube_point(Mask bits, int n) {
    Vector x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = (bits >> i) & 1u ? -1.0 : 1.0;
    return x;
}

inline Vector random_cube_point(int n, Rng& rng) {
    Vector x(static_cast<std::size_t>(n));
    for (double& v : x) v = rng.sign();
    return x;
}

inline double character(Mask s, Mask bits) { return std::popcount(s & bits) & 1 ? -1.0 : 1.0; }

inline double eval_bits(const SparseFourierPolynomial& p, Mask bits) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs) s += c * character(m, bits);
    return s;
}

inline double eval(const SparseFourierPolynomial& p, std::span<const double> x) { return eval_bits(p, cube_bits(x)); }

/// Point query with a hard budget: the counter moves once per query.
class MembershipOracle {
public:
    using Fn = std::function<double(const Vector&)>;

    MembershipOracle(int n, Fn f, std::uint64_t budget = default_query_budget)
        : n_{n}, f_{std::move(f)}, budget_{budget} {}

    double operator()(const Vector& x) {
        if (count_ >= budget_) throw budget_error("query budget of " + std::to_string(budget_) + " exhausted");
        ++count_;
        return f_(x);
    }

    int dimension() const { return n_; }
    std::uint64_t query_count() const { return count_; }
    std::uint64_t budget() const { return budget_; }
    void set_budget(std::uint64_t b) { budget_ = b; }

private:
    int n_;
    Fn f_;
    std::uint64_t budget_;
    std::uint64_t count_ = 0;
};

/// Draws y in [0, 1] with E[y | x] = c(x), from its own seeded stream.
class DistributionOracle {
public:
    using Mean = std::function<double(const Vector&)>;

    DistributionOracle(int n, Mean c, std::uint64_t seed, std::uint64_t budget = default_query_budget)
        : n_{n}, c_{std::move(c)}, rng_{seed, "distribution-oracle"}, budget_{budget} {}

    double operator()(const Vector& x) {
        if (count_ >= budget_) throw budget_error("query budget of " + std::to_string(budget_) + " exhausted");
        ++count_;
        const double p = c_(x);
        if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) throw concept_error("conditional mean outside [0, 1]");
        return rng_.bernoulli(p) ? 1.0 : 0.0;
    }

    // Test hook: the exact mean behind the draws.
    double mean(const Vector& x) const { return c_(x); }

    int dimension() const { return n_; }
    std::uint64_t query_count() const { return count_; }
    std::uint64_t budget() const { return budget_; }
    void set_budget(std::uint64_t b) { budget_ = b; }

private:
    int n_;
    Mean c_;
    Rng rng_;
    std::uint64_t budget_;
    std::uint64_t count_ = 0;
};

/// Exact transform over all 2^n points (fast Walsh-Hadamard).
template <class F>
SparseFourierPolynomial brute_fourier(F&& f, int n) {
    if (n < 1 || n > max_brute_dimension) throw capacity_error("brute_fourier supports 1 <= n <= 14");
    const std::size_t size = std::size_t{1} << n;
    std::vector<double> v(size);
    for (std::size_t b = 0; b < size; ++b) v[b] = f(cube_point(static_cast<Mask>(b), n));
    for (std::size_t h = 1; h < size; h <<= 1)
        for (std::size_t i = 0; i < size; i += h << 1)
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = v[j], c = v[j + h];
                v[j] = a + c;
                v[j + h] = a - c;
            }
    SparseFourierPolynomial p;
    p.n = n;
    for (std::size_t s = 0; s < size; ++s) p.set(static_cast<Mask>(s), v[s] / static_cast<double>(size));
    return p;
}

struct KMOptions {
    std::uint64_t seed = 0;
    // Inner samples per outer suffix; 0 picks ceil(2 l2^2 / theta^2).
    int inner = 0;
};

/// Sample sizes used by km, exposed for budgeting and tests.
struct KMPlan {
    int inner = 0;
    std::size_t outer = 0;         // suffix draws per level
    std::size_t coefficient = 0;   // draws for the final coefficient estimates
    std::size_t max_candidates = 0;

    std::uint64_t queries(int n) const {
        return static_cast<std::uint64_t>(std::max(n - 1, 0)) * outer * static_cast<std::uint64_t>(inner) + coefficient;
    }
};

inline KMPlan km_plan(double theta, double delta, int n, double l2_bound, int inner = 0) {
    if (!(theta > 0.0 && theta <= 1.0)) throw input_error("km: theta must lie in (0, 1]");
    if (!(delta > 0.0 && delta < 1.0)) throw input_error("km: delta must lie in (0, 1)");
    if (n < 1 || n > max_oracle_dimension) throw capacity_error("km: n must lie in [1, 20]");
    if (!(l2_bound > 0.0)) throw input_error("km: l2_bound must be positive");
    KMPlan plan;
    const double l2sq = l2_bound * l2_bound, t2 = theta * theta;
    plan.inner = inner > 0 ? inner : std::max(2, static_cast<int>(std::ceil(2.0 * l2sq / t2)));
    plan.max_candidates = static_cast<std::size_t>(std::ceil(8.0 * l2sq / t2));
    const double k = plan.inner;
    // Variance proxy of one suffix's U-statistic at weight theta^2.
    const double v = 2.0 * t2 * t2 + 4.0 * t2 * l2sq / k + 2.0 * l2sq * l2sq / (k * (k - 1.0));
    const double dev = t2 / 2.0;
    const double dw = delta / (2.0 * n * static_cast<double>(plan.max_candidates));
    plan.outer = static_cast<std::size_t>(std::ceil(2.0 * std::log(2.0 / dw) * v / (dev * dev)));
    const double dc = delta / (2.0 * static_cast<double>(plan.max_candidates));
    plan.coefficient = static_cast<std::size_t>(std::ceil(2.0 * std::log(2.0 / dc) * l2sq / (theta * theta / 4.0)));
    return plan;
}

/// Finds every Fourier coefficient of f larger than theta in magnitude, with
/// probability 1 - delta, from point queries. Prefixes fix the first k
/// variables; a prefix survives while its estimated weight (sum of squared
/// coefficients extending it) is at least theta^2 / 2. One sample per level
/// is shared by every candidate at that level.
template <class F>
SparseFourierPolynomial km(F&& f, double theta, double delta, int n, double l2_bound, const KMOptions& opt = {}) {
    const KMPlan plan = km_plan(theta, delta, n, l2_bound, opt.inner);
    Rng rng{opt.seed, "km"};
    const double keep_weight = theta * theta / 2.0;

    std::vector<Mask> alive{0};
    Vector x(static_cast<std::size_t>(n));
    for (int level = 1; level < n; ++level) {
        std::vector<Mask> cand;
        for (Mask a : alive) {
            cand.push_back(a);
            cand.push_back(a | (Mask{1} << (level - 1)));
        }
        std::vector<double> est(cand.size(), 0.0), s(cand.size());
        const int k = plan.inner;
        for (std::size_t o = 0; o < plan.outer; ++o) {
            for (int i = level; i < n; ++i) x[i] = rng.sign();
            std::fill(s.begin(), s.end(), 0.0);
            double q = 0.0;
            for (int r = 0; r < k; ++r) {
                Mask bits = 0;
                for (int i = 0; i < level; ++i) {
                    x[i] = rng.sign();
                    if (x[i] < 0) bits |= Mask{1} << i;
                }
                const double g = f(x);
                q += g * g;
                for (std::size_t c = 0; c < cand.size(); ++c) s[c] += g * character(cand[c], bits);
            }
            for (std::size_t c = 0; c < cand.size(); ++c) est[c] += (s[c] * s[c] - q) / (k * (k - 1.0));
        }
        std::vector<std::size_t> order;
        for (std::size_t c = 0; c < cand.size(); ++c)
            if (est[c] / static_cast<double>(plan.outer) >= keep_weight) order.push_back(c);
        if (order.size() > plan.max_candidates) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return est[a] > est[b]; });
            order.resize(plan.max_candidates);
            std::sort(order.begin(), order.end());
        }
        alive.clear();
        for (std::size_t c : order) alive.push_back(cand[c]);
        if (alive.empty()) break;
    }

    SparseFourierPolynomial out;
    out.n = n;
    if (alive.empty()) return out;
    std::vector<Mask> cand;
    for (Mask a : alive) {
        cand.push_back(a);
        cand.push_back(a | (Mask{1} << (n - 1)));
    }
    std::vector<double> sum(cand.size(), 0.0);
    for (std::size_t j = 0; j < plan.coefficient; ++j) {
        Mask bits = 0;
        for (int i = 0; i < n; ++i) {
            x[i] = rng.sign();
            if (x[i] < 0) bits |= Mask{1} << i;
        }
        const double g = f(x);
        for (std::size_t c = 0; c < cand.size(); ++c) sum[c] += g * character(cand[c], bits);
    }
    for (std::size_t c = 0; c < cand.size(); ++c) {
        const double v = sum[c] / static_cast<double>(plan.coefficient);
        if (std::abs(v) >= theta / 2.0) out.set(cand[c], v);
    }
    return out;
}

/// km applied to a polynomial that is already explicit: keeping every
/// coefficient of magnitude >= theta/2 meets the same L-infinity contract
/// without queries.
inline SparseFourierPolynomial km_exact(const SparseFourierPolynomial& p, double theta) {
    SparseFourierPolynomial out;
    out.n = p.n;
    for (const auto& [m, c] : p.coeffs)
        if (std::abs(c) >= theta / 2.0) out.set(m, c);
    return out;
}

/// Euclidean projection of the coefficient vector onto {L1 <= k}.
inline SparseFourierPolynomial proj_l1(const SparseFourierPolynomial& p, double k) {
    if (k < 0.0) throw input_error("proj_l1: k must be >= 0");
    if (l1(p) <= k) return p;
    std::vector<double> mag;
    for (const auto& [m, c] : p.coeffs) mag.push_back(std::abs(c));
    std::sort(mag.begin(), mag.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (std::size_t j = 0; j < mag.size(); ++j) {
        cum += mag[j];
        const double t = (cum - k) / static_cast<double>(j + 1);
        if (mag[j] - t > 0.0) tau = t;
    }
    SparseFourierPolynomial out;
    out.n = p.n;
    for (const auto& [m, c] : p.coeffs) {
        const double v = std::abs(c) - tau;
        if (v > 0.0) out.set(m, std::copysign(v, c));
    }
    return out;
}

}  // namespace alphatron
