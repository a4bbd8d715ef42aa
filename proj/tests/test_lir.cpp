#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphatron/alphatron_u.hpp"
#include "alphatron/concepts.hpp"
#include "alphatron/rng.hpp"

using namespace alphatron;

namespace {

// Primal active-set solver for min sum (v_i - y_i)^2 subject to
// 0 <= v_{i+1} - v_i <= gap_i, in the variables (v_0, d_0..d_{n-2}).
std::vector<double> reference_chain_qp(const std::vector<double>& y, const std::vector<double>& gap) {
    const int n = static_cast<int>(y.size());
    const int p = n;  // v_0 plus n-1 increments
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, p);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        for (int j = 1; j <= i; ++j) A(i, j) = 1.0;
    }
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const Eigen::MatrixXd H = A.transpose() * A;
    const Eigen::VectorXd g = A.transpose() * b;
    std::vector<double> lo(p), hi(p);
    lo[0] = -1e300;
    hi[0] = 1e300;
    for (int j = 1; j < p; ++j) {
        lo[j] = 0.0;
        hi[j] = gap[j - 1];
    }
    // 0 free, -1 at lower, +1 at upper
    std::vector<int> state(p, 0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    for (int j = 1; j < p; ++j) state[j] = -1;
    for (int iter = 0; iter < 10000; ++iter) {
        std::vector<int> fr;
        for (int j = 0; j < p; ++j) {
            if (state[j] == -1) x[j] = lo[j];
            if (state[j] == 1) x[j] = hi[j];
            if (state[j] == 0) fr.push_back(j);
        }
        Eigen::VectorXd target = x;
        if (!fr.empty()) {
            const int f = static_cast<int>(fr.size());
            Eigen::MatrixXd Hf(f, f);
            Eigen::VectorXd rhs(f);
            for (int a = 0; a < f; ++a) {
                rhs[a] = g[fr[a]];
                for (int c = 0; c < p; ++c)
                    if (state[c] != 0) rhs[a] -= H(fr[a], c) * x[c];
                for (int c = 0; c < f; ++c) Hf(a, c) = H(fr[a], fr[c]);
            }
            const Eigen::VectorXd sol = Hf.ldlt().solve(rhs);
            for (int a = 0; a < f; ++a) target[fr[a]] = sol[a];
        }
        double step = 1.0;
        int blocking = -1;
        for (int j : fr) {
            const double dx = target[j] - x[j];
            if (dx < 0 && target[j] < lo[j]) {
                const double s = (lo[j] - x[j]) / dx;
                if (s < step) step = s, blocking = j;
            } else if (dx > 0 && target[j] > hi[j]) {
                const double s = (hi[j] - x[j]) / dx;
                if (s < step) step = s, blocking = j;
            }
        }
        x += step * (target - x);
        if (blocking >= 0) {
            state[blocking] = target[blocking] < lo[blocking] ? -1 : 1;
            continue;
        }
        const Eigen::VectorXd grad = H * x - g;
        int worst = -1;
        double worst_v = 1e-12;
        for (int j = 0; j < p; ++j) {
            if (state[j] == -1 && -grad[j] > worst_v) worst = j, worst_v = -grad[j];
            if (state[j] == 1 && grad[j] > worst_v) worst = j, worst_v = grad[j];
        }
        if (worst < 0) break;
        state[worst] = 0;
    }
    const Eigen::VectorXd v = A * x;
    return {v.data(), v.data() + n};
}

double objective(const std::vector<double>& v, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - y[i]) * (v[i] - y[i]);
    return s;
}

// Fitted value at every input point.
std::vector<double> fitted(const LipschitzMonotoneFit& fit, const std::vector<double>& z) {
    std::vector<double> out;
    for (double t : z) out.push_back(lir_eval(fit, t));
    return out;
}

}  // namespace

TEST(Lir, MonotoneLipschitzInputUnchanged) {
    const std::vector<double> z{0.0, 0.5, 1.0, 2.0}, y{0.1, 0.3, 0.5, 0.9};
    const auto fit = lir(z, y, 1.0);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(lir_eval(fit, z[i]), y[i], 1e-15);
}

TEST(Lir, TwoPointReversal) {
    const auto fit = lir(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0}, 1.0);
    EXPECT_NEAR(fit.y[0], 0.5, 1e-15);
    EXPECT_NEAR(fit.y[1], 0.5, 1e-15);
}

TEST(Lir, ConstantLabels) {
    const auto fit = lir(std::vector<double>{0.3, -1.0, 2.0, 0.1}, std::vector<double>(4, 0.7), 0.5);
    for (double v : fit.y) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Lir, TiesAreMerged) {
    const auto fit = lir(std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.0, 1.0, 0.5}, 1.0);
    ASSERT_EQ(fit.size(), 1u);
    EXPECT_DOUBLE_EQ(fit.y[0], 0.5);
}

TEST(Lir, SteepJumpIsCapped) {
    // A unit jump over a gap of 0.1 with L = 2 can rise at most 0.2.
    const auto fit = lir(std::vector<double>{0.0, 0.1}, std::vector<double>{0.0, 1.0}, 2.0);
    EXPECT_NEAR(fit.y[1] - fit.y[0], 0.2, 1e-15);
    EXPECT_NEAR(fit.y[0], 0.4, 1e-15);
}

TEST(Lir, Errors) {
    EXPECT_THROW(lir(std::vector<double>{}, std::vector<double>{}, 1.0), input_error);
    EXPECT_THROW(lir(std::vector<double>{0.0}, std::vector<double>{0.0}, 0.0), input_error);
}

TEST(LirEval, Interpolation) {
    LipschitzMonotoneFit fit{{0.0, 1.0, 3.0}, {0.2, 0.4, 0.8}, 1.0};
    EXPECT_DOUBLE_EQ(lir_eval(fit, 1.0), 0.4);
    EXPECT_DOUBLE_EQ(lir_eval(fit, -5.0), 0.2);
    EXPECT_DOUBLE_EQ(lir_eval(fit, 9.0), 0.8);
    EXPECT_DOUBLE_EQ(lir_eval(fit, 2.0), 0.6);
}

TEST(Lir, OptimalAgainstActiveSetOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(30));
        const double L = rng.uniform(0.2, 5.0);
        std::vector<double> z(n), y(n);
        for (int i = 0; i < n; ++i) {
            z[i] = rng.uniform(-1, 1);
            y[i] = rng.uniform();
        }
        const auto fit = lir(z, y, L);
        const auto v = fitted(fit, z);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return z[a] < z[b]; });
        std::vector<double> ys, gap;
        for (int i = 0; i < n; ++i) {
            ys.push_back(y[order[i]]);
            if (i + 1 < n) gap.push_back(L * (z[order[i + 1]] - z[order[i]]));
        }
        const auto ref = reference_chain_qp(ys, gap);
        std::vector<double> vs;
        for (int i = 0; i < n; ++i) vs.push_back(v[order[i]]);
        EXPECT_NEAR(objective(vs, ys), objective(ref, ys), 1e-6) << trial;

        for (std::size_t j = 1; j < fit.size(); ++j) {
            const double d = fit.y[j] - fit.y[j - 1];
            EXPECT_GE(d, -1e-12);
            EXPECT_LE(d, L * (fit.z[j] - fit.z[j - 1]) + 1e-12);
        }
        for (double u : fit.y) {
            EXPECT_GE(u, 0.0);
            EXPECT_LE(u, 1.0);
        }
    }
}

TEST(Lir, IdentityInstanceInequality) {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(40));
        std::vector<double> z(n), y(n);
        for (int i = 0; i < n; ++i) {
            z[i] = rng.uniform();
            y[i] = rng.uniform();
        }
        const auto v = fitted(lir(z, y, rng.uniform(1.0, 3.0)), z);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += (y[i] - v[i]) * (v[i] - z[i]);
        EXPECT_GE(s, -1e-9);
    }
}

TEST(Lir, LargeInputIsFast) {
    Rng rng(23);
    std::vector<double> z(20000), y(20000);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = rng.normal();
        y[i] = rng.bernoulli(std::clamp(0.5 + 0.3 * z[i], 0.0, 1.0)) ? 1.0 : 0.0;
    }
    const auto fit = lir(z, y, 1.0);
    for (std::size_t j = 1; j < fit.size(); ++j) {
        EXPECT_GE(fit.y[j] - fit.y[j - 1], -1e-12);
        EXPECT_LE(fit.y[j] - fit.y[j - 1], fit.z[j] - fit.z[j - 1] + 1e-12);
    }
}

namespace {

Dataset<Vector> planted(int m, int n, const Vector& w, Rng& rng, LabelMode mode) {
    Dataset<Vector> d;
    for (int i = 0; i < m; ++i) {
        Vector x = sample_sphere(n, rng);
        const double c = std::clamp(dot(w, x) + 0.5, 0.0, 1.0);
        d.y.push_back(pconcept_draw(c, mode, rng));
        d.x.push_back(std::move(x));
    }
    return d;
}

}  // namespace

TEST(AlphatronU, ConstantLabelsFreeze) {
    Rng rng(24);
    Dataset<Vector> train, holdout;
    for (int i = 0; i < 30; ++i) {
        train.x.push_back(sample_sphere(3, rng));
        train.y.push_back(0.3);
    }
    holdout = train;
    const auto [model, report] = alphatron_u_train(train, KernelSpec::multinomial(1), 1.0, 2.0, 5, holdout);
    EXPECT_EQ(report.holdout_loss.size(), 5u);
    for (double a : model.alphas) EXPECT_EQ(a, 0.0);
    for (double l : report.holdout_loss) EXPECT_NEAR(l, 0.0, 1e-30);
    EXPECT_NEAR(model.predict(train.x[0]), 0.3, 1e-15);
}

TEST(AlphatronU, PlantedRampSmall) {
    Rng rng(25);
    const int n = 5;
    const Vector w = sample_sphere(n, rng);
    auto train = planted(800, n, w, rng, LabelMode::bernoulli);
    auto holdout = planted(300, n, w, rng, LabelMode::bernoulli);
    auto fresh = planted(2000, n, w, rng, LabelMode::exact_mean);
    const auto [model, report] = alphatron_u_train(train, KernelSpec::multinomial(1), 2.0, 1.0, 150, holdout);
    EXPECT_EQ(report.iterations, 150);
    const auto& hl = report.holdout_loss;
    EXPECT_EQ(hl[report.selected_iteration - 1], *std::min_element(hl.begin(), hl.end()));
    EXPECT_LE(squared_err(model, fresh.x, fresh.y), 0.05);
}
