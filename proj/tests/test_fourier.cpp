#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphatron/fourier.hpp"
#include "alphatron/rng.hpp"

using namespace alphatron;

namespace {

SparseFourierPolynomial random_sparse(int n, int terms, Rng& rng) {
    SparseFourierPolynomial p;
    p.n = n;
    while (static_cast<int>(p.size()) < terms) p.set(static_cast<Mask>(rng.below(Mask{1} << n)), rng.uniform(-1, 1));
    return p;
}

// Term-by-term expansion with explicit products.
double slow_eval(const SparseFourierPolynomial& p, const Vector& x) {
    double s = 0.0;
    for (const auto& [m, c] : p.coeffs) {
        double chi = 1.0;
        for (int i = 0; i < p.n; ++i)
            if (m >> i & 1) chi *= x[i];
        s += c * chi;
    }
    return s;
}

// Sorting-based simplex projection of |v| onto {sum <= k}.
std::vector<double> reference_projection(const std::vector<double>& v, double k) {
    double total = 0.0;
    for (double a : v) total += std::abs(a);
    if (total <= k) return v;
    std::vector<double> u;
    for (double a : v) u.push_back(std::abs(a));
    std::sort(u.rbegin(), u.rend());
    double cum = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        if (u[j] * (j + 1) > cum - k) rho = j;
    }
    const double csum = std::accumulate(u.begin(), u.begin() + rho + 1, 0.0);
    const double tau = (csum - k) / static_cast<double>(rho + 1);
    std::vector<double> out;
    for (double a : v) out.push_back(std::copysign(std::max(std::abs(a) - tau, 0.0), a));
    return out;
}

SparseFourierPolynomial from_vector(const std::vector<double>& v, int n) {
    SparseFourierPolynomial p;
    p.n = n;
    for (std::size_t i = 0; i < v.size(); ++i) p.set(static_cast<Mask>(i), v[i]);
    return p;
}

}  // namespace

TEST(Fourier, Norms) {
    SparseFourierPolynomial p;
    p.n = 3;
    p.set(0, 1.0);
    EXPECT_DOUBLE_EQ(l1(p), 1.0);
    EXPECT_DOUBLE_EQ(l2(p), 1.0);
    EXPECT_DOUBLE_EQ(linf(p), 1.0);
    p.set(0, 3.0);
    p.set(1, -4.0);
    EXPECT_DOUBLE_EQ(l1(p), 7.0);
    EXPECT_DOUBLE_EQ(l2(p), 5.0);
    EXPECT_DOUBLE_EQ(linf(p), 4.0);
    EXPECT_DOUBLE_EQ(tail_mass(p, 1), 0.0);
    p.set(0b111, 0.5);
    EXPECT_DOUBLE_EQ(tail_mass(p, 1), 0.25);
    EXPECT_DOUBLE_EQ(tail_mass(p, 3), 0.0);
}

TEST(Fourier, TinyCoefficientsArePruned) {
    SparseFourierPolynomial p;
    p.n = 2;
    p.set(1, 1e-16);
    EXPECT_TRUE(p.empty());
    p.set(1, 0.5);
    p.set(1, 0.0);
    EXPECT_TRUE(p.empty());
}

TEST(Fourier, EvalBasics) {
    SparseFourierPolynomial p;
    p.n = 3;
    p.set(0, 0.7);
    Rng rng(31);
    for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(eval(p, random_cube_point(3, rng)), 0.7);
    SparseFourierPolynomial q;
    q.n = 3;
    q.set(0b001, 1.0);
    EXPECT_DOUBLE_EQ(eval(q, Vector{-1, 1, 1}), -1.0);
    EXPECT_THROW(eval(q, Vector{0.5, 1, 1}), input_error);
}

TEST(Fourier, EvalMatchesTermExpansion) {
    Rng rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(12));
        const auto p = random_sparse(n, 1 + static_cast<int>(rng.below(std::min(10, 1 << n))), rng);
        const Vector x = random_cube_point(n, rng);
        EXPECT_NEAR(eval(p, x), slow_eval(p, x), 1e-12);
    }
}

TEST(Fourier, BruteParityAndConstant) {
    const Mask s = 0b1011;
    const auto p = brute_fourier([&](const Vector& x) { return static_cast<double>(character(s, cube_bits(x))); }, 6);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_NEAR(p.get(s), 1.0, 1e-15);
    const auto one = brute_fourier([](const Vector&) { return 1.0; }, 5);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one.get(0), 1.0);
    EXPECT_THROW(brute_fourier([](const Vector&) { return 0.0; }, 15), capacity_error);
}

TEST(Fourier, BruteRoundTrip) {
    Rng rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_sparse(8, 6, rng);
        const auto q = brute_fourier([&](const Vector& x) { return eval(p, x); }, 8);
        EXPECT_LE(linf(difference(p, q)), 1e-12);
    }
}

TEST(Fourier, Parseval) {
    Rng rng(34);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(11));
        const auto p = random_sparse(n, 5, rng);
        double s = 0.0;
        for (Mask b = 0; b < (Mask{1} << n); ++b) s += std::pow(eval_bits(p, b), 2);
        s /= std::ldexp(1.0, n);
        EXPECT_NEAR(s, std::pow(l2(p), 2), 1e-12);
    }
}

TEST(Km, Parity) {
    const Mask s = 0b1000100001;
    MembershipOracle f(10, [&](const Vector& x) { return static_cast<double>(character(s, cube_bits(x))); });
    const auto q = km(f, 0.1, 0.05, 10, 1.0, {.seed = 3});
    EXPECT_NEAR(q.get(s), 1.0, 0.1);
    for (const auto& [m, c] : q.coeffs) {
        if (m != s) EXPECT_LT(std::abs(c), 0.1);
    }
}

TEST(Km, ZeroFunction) {
    MembershipOracle f(10, [](const Vector&) { return 0.0; });
    EXPECT_TRUE(km(f, 0.1, 0.05, 10, 1.0).empty());
}

TEST(Km, ThreeTerms) {
    SparseFourierPolynomial p;
    p.n = 10;
    p.set(0b11, 0.9);
    p.set(0b100000, -0.9);
    p.set(0b1100000000, 0.9);
    MembershipOracle f(10, [&](const Vector& x) { return eval(p, x); });
    const auto q = km(f, 0.2, 0.05, 10, l2(p), {.seed = 4});
    const auto truth = brute_fourier([&](const Vector& x) { return eval(p, x); }, 10);
    EXPECT_LE(linf(difference(truth, q)), 0.2);
}

TEST(Km, DeterministicUnderSeed) {
    Rng rng(35);
    const auto p = random_sparse(8, 4, rng);
    MembershipOracle f1(8, [&](const Vector& x) { return eval(p, x); });
    MembershipOracle f2(8, [&](const Vector& x) { return eval(p, x); });
    const auto a = km(f1, 0.2, 0.05, 8, l2(p), {.seed = 9});
    const auto b = km(f2, 0.2, 0.05, 8, l2(p), {.seed = 9});
    EXPECT_EQ(a, b);
    EXPECT_EQ(f1.query_count(), f2.query_count());
}

TEST(Km, BudgetIsEnforced) {
    MembershipOracle f(10, [](const Vector& x) { return x[0]; }, 1000);
    EXPECT_THROW(km(f, 0.1, 0.05, 10, 1.0), budget_error);
    EXPECT_EQ(f.query_count(), 1000u);
}

TEST(Km, OracleCountsEachQuery) {
    MembershipOracle f(4, [](const Vector&) { return 1.0; });
    Rng rng(36);
    for (int i = 0; i < 17; ++i) f(random_cube_point(4, rng));
    EXPECT_EQ(f.query_count(), 17u);
}

TEST(Km, DistributionQueriesAgree) {
    SparseFourierPolynomial p;
    p.n = 8;
    p.set(0, 0.5);
    p.set(0b11, 0.25);
    p.set(0b10000, -0.2);
    auto mean = [&](const Vector& x) { return eval(p, x); };
    MembershipOracle mem(8, mean);
    DistributionOracle dist(8, mean, 77);
    const double theta = 0.2;
    const auto a = km(mem, theta, 0.05, 8, 1.0, {.seed = 5});
    const auto b = km(dist, theta, 0.025, 8, 1.0, {.seed = 5});
    EXPECT_LE(linf(difference(a, b)), theta);
    EXPECT_LE(linf(difference(p, b)), theta);
}

TEST(Km, DistributionOracleLabels) {
    DistributionOracle d(3, [](const Vector&) { return 0.3; }, 1);
    Rng rng(37);
    double s = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double y = d(random_cube_point(3, rng));
        EXPECT_TRUE(y == 0.0 || y == 1.0);
        s += y;
    }
    EXPECT_NEAR(s / 10000, 0.3, 0.02);
}

TEST(Km, PlanIsPolynomialSized) {
    const auto plan = km_plan(0.1, 0.05, 10, 1.0);
    EXPECT_GT(plan.inner, 0);
    EXPECT_GT(plan.outer, 0);
    EXPECT_LE(plan.queries(10), default_query_budget);
}

TEST(Projection, Examples) {
    SparseFourierPolynomial p;
    p.n = 2;
    p.set(0, 2.0);
    auto q = proj_l1(p, 1.0);
    EXPECT_DOUBLE_EQ(q.get(0), 1.0);
    p.set(0, 0.8);
    p.set(1, 0.6);
    q = proj_l1(p, 1.0);
    EXPECT_NEAR(q.get(0), 0.6, 1e-15);
    EXPECT_NEAR(q.get(1), 0.4, 1e-15);
    EXPECT_EQ(proj_l1(p, 5.0), p);
    EXPECT_THROW(proj_l1(p, -1.0), input_error);
}

TEST(Projection, MatchesReference) {
    Rng rng(38);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng.below(16));
        for (double& a : v) a = rng.uniform(-2, 2);
        const double k = rng.uniform(0.1, 4.0);
        const auto q = proj_l1(from_vector(v, 4), k);
        const auto r = reference_projection(v, k);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(q.get(static_cast<Mask>(i)), r[i], 1e-9);
        EXPECT_LE(l1(q), k + 1e-12);
    }
}

TEST(Projection, Optimality) {
    Rng rng(39);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(10);
        for (double& a : v) a = rng.uniform(-1, 1);
        const double k = rng.uniform(0.2, 2.0);
        const auto p = from_vector(v, 4);
        const double best = l2(difference(p, proj_l1(p, k)));
        for (int r = 0; r < 1000; ++r) {
            std::vector<double> w(10);
            double s = 0.0;
            for (double& a : w) s += std::abs(a = rng.uniform(-1, 1));
            const double scale = rng.uniform() * k / s;
            for (double& a : w) a *= scale;
            EXPECT_LE(best, l2(difference(p, from_vector(w, 4))) + 1e-9);
        }
    }
}

TEST(Projection, Stability) {
    Rng rng(40);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(12), w(12);
        const double eps = rng.uniform(0.0, 0.2);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = rng.uniform(-1, 1);
            w[i] = v[i] + rng.uniform(-eps, eps);
        }
        const double k = rng.uniform(0.2, 3.0);
        const auto a = proj_l1(from_vector(v, 4), k), b = proj_l1(from_vector(w, 4), k);
        EXPECT_LE(linf(difference(a, b)), 2 * eps + 1e-9);
    }
}

TEST(KmExact, PrunesBelowHalfTheta) {
    SparseFourierPolynomial p;
    p.n = 3;
    p.set(0, 0.06);
    p.set(1, 0.04);
    p.set(2, -0.5);
    const auto q = km_exact(p, 0.1);
    EXPECT_EQ(q.size(), 2u);
    EXPECT_LE(linf(difference(p, q)), 0.1);
}
