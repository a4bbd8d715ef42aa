#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "alphatron/kernels.hpp"
#include "alphatron/rng.hpp"

using namespace alphatron;

namespace {

Vector random_ball(Rng& rng, int n) {
    Vector x(n);
    for (double& v : x) v = rng.normal();
    const double r = norm(x);
    const double scale = rng.uniform() / r;
    for (double& v : x) v *= scale;
    return x;
}

Vector random_cube(Rng& rng, int n) {
    Vector x(n);
    for (double& v : x) v = rng.sign();
    return x;
}

// Enumerates every tuple (k_1..k_j), j <= d, and sums the products directly.
double tuple_kernel(const Vector& x, const Vector& y, int d) {
    const int n = static_cast<int>(x.size());
    double total = 0.0;
    std::function<void(int, int, double)> rec = [&](int depth, int target, double prod) {
        if (depth == target) {
            total += prod;
            return;
        }
        for (int k = 0; k < n; ++k) rec(depth + 1, target, prod * x[k] * y[k]);
    };
    for (int j = 0; j <= d; ++j) rec(0, j, 1.0);
    return total;
}

double subset_kernel(const Vector& x, const Vector& y, int d) {
    const int n = static_cast<int>(x.size());
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) > d) continue;
        double a = 1.0, b = 1.0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                a *= x[i];
                b *= y[i];
            }
        total += a * b;
    }
    return total;
}

}  // namespace

TEST(MultinomialKernel, UnitVectorGivesDegreePlusOne) {
    const Vector x{0.6, 0.8};
    EXPECT_DOUBLE_EQ(multinomial_kernel(x, x, 3, false), 4.0);
}

TEST(MultinomialKernel, OrthogonalGivesOne) {
    for (int d = 0; d < 7; ++d) EXPECT_DOUBLE_EQ(multinomial_kernel(Vector{1, 0}, Vector{0, 1}, d, false), 1.0);
}

TEST(MultinomialKernel, GeometricSum) {
    EXPECT_DOUBLE_EQ(multinomial_kernel(Vector{0.5, 0}, Vector{0.5, 0}, 2, false), 1.3125);
}

TEST(MultinomialKernel, Errors) {
    EXPECT_THROW(multinomial_kernel(Vector{1, 0}, Vector{1}, 2, false), input_error);
    EXPECT_THROW(multinomial_kernel(Vector{1}, Vector{1}, -1, false), input_error);
}

TEST(MultinomialKernel, LargeDegreeMatchesPowerSum) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector x = random_ball(rng, 4), y = random_ball(rng, 4);
        const double s = dot(x, y);
        double naive = 0.0;
        for (int j = 0; j <= 30; ++j) naive += std::pow(s, j);
        EXPECT_NEAR(multinomial_kernel(x, y, 30, false), naive, 1e-12 * (1 + std::abs(naive)));
    }
}

TEST(MultinomialKernel, NormalizationBoundAndEquality) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = static_cast<int>(rng.below(6));
        Vector x = random_ball(rng, 5);
        EXPECT_LE(multinomial_kernel(x, x, d, true), 1.0 + 1e-12);
        const double r = norm(x);
        for (double& v : x) v /= r;
        EXPECT_NEAR(multinomial_kernel(x, x, d, true), 1.0, 1e-12);
    }
}

TEST(KernelSpec, Constants) {
    EXPECT_DOUBLE_EQ(KernelSpec::multinomial(4).normalization_constant, 5.0);
    EXPECT_DOUBLE_EQ(KernelSpec::multinomial(2, true, 2.0).normalization_constant, 7.0);
    EXPECT_DOUBLE_EQ(KernelSpec::explicit_monomial(2, 4).normalization_constant, 11.0);
    EXPECT_THROW(KernelSpec::multinomial(-1), input_error);
    EXPECT_THROW(KernelSpec::mean_map(KernelSpec::mean_map(KernelSpec::multinomial(1))), input_error);
    KernelSpec bad = KernelSpec::multinomial(3);
    bad.normalization_constant = 2.0;
    EXPECT_THROW(bad.validate(), input_error);
}

TEST(FeatureMap, SmallExamples) {
    EXPECT_EQ(explicit_feature_map(Vector{2.0}, 2), (Vector{1, 2, 4}));
    EXPECT_EQ(explicit_feature_map(Vector{1.0, 0.0}, 1), (Vector{1, 1, 0}));
    const Vector f = explicit_feature_map(Vector{1, 2, 3}, 2);
    ASSERT_EQ(f.size(), 13u);
    // tuple (2,3) sits after (), (1),(2),(3), (1,1),(1,2),(1,3),(2,1),(2,2)
    EXPECT_DOUBLE_EQ(f[4 + 5], 6.0);
}

TEST(FeatureMap, IdentityAgainstTupleEnumeration) {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const int d = static_cast<int>(rng.below(5));
        const Vector x = random_ball(rng, n), y = random_ball(rng, n);
        const double k = multinomial_kernel(x, y, d, false);
        EXPECT_NEAR(dot(explicit_feature_map(x, d), explicit_feature_map(y, d)), k, 1e-9 * (1 + std::abs(k)));
        EXPECT_NEAR(tuple_kernel(x, y, d), k, 1e-9 * (1 + std::abs(k)));
    }
}

TEST(FeatureMap, CapacityGuard) {
    EXPECT_THROW(explicit_feature_map(Vector(100, 0.1), 4), capacity_error);
    EXPECT_NO_THROW(explicit_feature_map(Vector(10, 0.1), 4));
}

TEST(MonomialBasis, Examples) {
    EXPECT_EQ(monomial_basis_map(Vector{1, 1}, 1), (Vector{1, 1, 1}));
    EXPECT_EQ(monomial_basis_map(Vector{-1, 1}, 2), (Vector{1, -1, 1, -1}));
    EXPECT_THROW(monomial_basis_map(Vector{0.5, 1}, 1), input_error);
}

TEST(MonomialBasis, InnerProductMatchesSubsetSum) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        const int d = static_cast<int>(rng.below(5));
        const Vector x = random_cube(rng, n), y = random_cube(rng, n);
        const double oracle = subset_kernel(x, y, d);
        EXPECT_DOUBLE_EQ(dot(monomial_basis_map(x, d), monomial_basis_map(y, d)), oracle);
        EXPECT_DOUBLE_EQ(monomial_kernel(x, y, d), oracle);
    }
}

TEST(MeanMap, SingletonsAndDuplicates) {
    const KernelSpec base = KernelSpec::multinomial(3);
    const Vector x{0.6, 0.8};
    EXPECT_DOUBLE_EQ(mean_map_kernel({x}, {x}, base), evaluate(base, x, x));
    EXPECT_DOUBLE_EQ(mean_map_kernel({x, x}, {x}, base), evaluate(base, x, x));
    EXPECT_THROW(mean_map_kernel({}, {x}, base), input_error);
}

TEST(MeanMap, Bounded) {
    Rng rng(7);
    const KernelSpec spec = KernelSpec::mean_map(KernelSpec::multinomial(3));
    for (int trial = 0; trial < 200; ++trial) {
        Bag a, b;
        for (std::uint64_t i = 0, s = 1 + rng.below(5); i < s; ++i) a.push_back(random_ball(rng, 4));
        for (std::uint64_t i = 0, s = 1 + rng.below(5); i < s; ++i) b.push_back(random_ball(rng, 4));
        double brute = 0.0;
        for (const auto& u : a)
            for (const auto& v : b) brute += multinomial_kernel(u, v, 3, false) / 4.0;
        brute /= static_cast<double>(a.size() * b.size());
        const double k = evaluate(spec, a, b);
        EXPECT_NEAR(k, brute, 1e-12);
        EXPECT_LE(std::abs(k), 1.0 + 1e-12);
    }
}

TEST(Gram, OneSampleAndOrthogonal) {
    const KernelSpec spec = KernelSpec::multinomial(4);
    const Vector x{1, 0}, y{0, 1};
    const GramMatrix one = gram(std::vector<Vector>{x}, spec);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one(0, 0), 1.0);
    const GramMatrix two = gram(std::vector<Vector>{x, y}, spec);
    EXPECT_DOUBLE_EQ(two(0, 1), 1.0 / 5.0);
}

TEST(Gram, SymmetricAndPsd) {
    Rng rng(8);
    std::vector<Vector> xs;
    for (int i = 0; i < 50; ++i) xs.push_back(random_ball(rng, 5));
    const GramMatrix g = gram(xs, KernelSpec::multinomial(3));
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_LE(g(i, i), 1.0 + 1e-12);
        for (std::size_t j = 0; j < 50; ++j) EXPECT_EQ(g(i, j), g(j, i));
    }
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + static_cast<int>(rng.below(19));
        std::vector<Vector> s;
        for (int i = 0; i < m; ++i) s.push_back(random_ball(rng, 3));
        const GramMatrix k = gram(s, KernelSpec::multinomial(1 + static_cast<int>(rng.below(4))));
        Eigen::MatrixXd e(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) e(i, j) = k(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    }
}

TEST(Gram, BagsAndCross) {
    Rng rng(9);
    std::vector<Bag> bags;
    for (int i = 0; i < 10; ++i) bags.push_back({random_ball(rng, 3), random_ball(rng, 3)});
    const KernelSpec spec = KernelSpec::mean_map(KernelSpec::multinomial(2));
    const GramMatrix g = gram(bags, spec);
    const GramMatrix c = cross_gram(bags, bags, spec);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(g(i, j), c(i, j), 1e-15);
    EXPECT_THROW(evaluate(KernelSpec::multinomial(2), bags[0], bags[1]), input_error);
    EXPECT_THROW(evaluate(spec, bags[0][0], bags[1][0]), input_error);
}
