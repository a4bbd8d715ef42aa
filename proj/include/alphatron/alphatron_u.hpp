#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "alphatron/alphatron.hpp"
#include "alphatron/error.hpp"
#include "alphatron/kernels.hpp"
#include "alphatron/link.hpp"

namespace alphatron {

/// Knots of a monotone L-Lipschitz fit, z strictly increasing.
struct LipschitzMonotoneFit {
    std::vector<double> z;
    std::vector<double> y;
    double lipschitz = 1.0;

    std::size_t size() const { return z.size(); }
};

/// Linear interpolation between knots, constant beyond the ends.
inline double lir_eval(const LipschitzMonotoneFit& fit, double t) {
    if (fit.z.empty()) throw input_error("empty fit");
    if (t <= fit.z.front()) return fit.y.front();
    if (t >= fit.z.back()) return fit.y.back();
    const auto it = std::upper_bound(fit.z.begin(), fit.z.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - fit.z.begin());
    const double w = (t - fit.z[j - 1]) / (fit.z[j] - fit.z[j - 1]);
    return std::clamp(fit.y[j - 1] + w * (fit.y[j] - fit.y[j - 1]), 0.0, 1.0);
}

inline LinkFunction as_link(const LipschitzMonotoneFit& fit) {
    return LinkFunction::table(fit.z, fit.y, fit.lipschitz * (1 + 1e-9), "lir");
}

namespace detail {

// Breakpoint of the piecewise-linear derivative: position and slope change.
struct Kink {
    double at;
    double delta;
};

struct KinkBelow {
    bool operator()(const Kink& a, const Kink& b) const { return a.at < b.at; }
};
struct KinkAbove {
    bool operator()(const Kink& a, const Kink& b) const { return a.at > b.at; }
};

}  // namespace detail

/// Weighted least squares under 0 <= v_{j+1} - v_j <= gap_j, solved exactly.
///
/// F_j(v) is the optimal cost of the first j points with v_j = v. Its
/// derivative is continuous, increasing and piecewise linear. Passing to j+1
/// takes min over a window of width gap_j, which inserts a flat zero run of
/// that width at the minimizer; adding the next point adds a linear term.
/// The kinks live in two heaps around the current root, with a lazy shift on
/// the right heap. The fit is recovered by clamping each stage's minimizer.
inline std::vector<double> chain_isotonic(const std::vector<double>& y, const std::vector<double>& w,
                                          const std::vector<double>& gap) {
    const std::size_t n = y.size();
    if (n == 0) return {};
    std::priority_queue<detail::Kink, std::vector<detail::Kink>, detail::KinkBelow> left;
    std::priority_queue<detail::Kink, std::vector<detail::Kink>, detail::KinkAbove> right;
    double shift = 0.0;  // added to every position in `right`
    double p = y[0], value = 0.0, slope = 0.0;
    std::vector<double> root(n);

    for (std::size_t j = 0; j < n; ++j) {
        value += 2.0 * w[j] * (p - y[j]);
        slope += 2.0 * w[j];
        while (value < 0.0) {
            const double q = right.empty() ? std::numeric_limits<double>::infinity() : right.top().at + shift;
            if (slope > 0.0 && value + slope * (q - p) >= 0.0) {
                p -= value / slope;
                value = 0.0;
                break;
            }
            const detail::Kink k = right.top();
            right.pop();
            value += slope * (q - p);
            p = q;
            slope += k.delta;
            left.push({q, k.delta});
        }
        while (value > 0.0) {
            const double q = left.empty() ? -std::numeric_limits<double>::infinity() : left.top().at;
            if (slope > 0.0 && value - slope * (p - q) <= 0.0) {
                p -= value / slope;
                value = 0.0;
                break;
            }
            const detail::Kink k = left.top();
            left.pop();
            value -= slope * (p - q);
            p = q;
            slope -= k.delta;
            right.push({q - shift, k.delta});
        }
        value = 0.0;
        root[j] = p;
        if (j + 1 < n) {
            const double a = gap[j];
            shift += a;
            left.push({p, -slope});
            right.push({p + a - shift, slope});
            slope = 0.0;
        }
    }
    std::vector<double> v(n);
    v[n - 1] = root[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) v[j] = std::clamp(root[j], v[j + 1] - gap[j], v[j + 1]);
    return v;
}

/// Lipschitz isotonic regression of y on z: the least-squares fit that is
/// non-decreasing in z with slope at most L. Tied z are merged with weights.
inline LipschitzMonotoneFit lir(const std::vector<double>& z, const std::vector<double>& y, double L) {
    if (z.empty()) throw input_error("lir needs at least one point");
    if (z.size() != y.size()) throw input_error("lir: z and y sizes differ");
    if (!(L > 0.0)) throw input_error("lir: L must be positive");
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!std::isfinite(z[i]) || !std::isfinite(y[i])) throw input_error("lir: non-finite input");

    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

    LipschitzMonotoneFit fit;
    fit.lipschitz = L;
    std::vector<double> ys, ws;
    for (std::size_t k = 0; k < order.size();) {
        const double zk = z[order[k]];
        double s = 0.0;
        std::size_t c = 0;
        for (; k < order.size() && z[order[k]] == zk; ++k, ++c) s += y[order[k]];
        fit.z.push_back(zk);
        ys.push_back(s / static_cast<double>(c));
        ws.push_back(static_cast<double>(c));
    }
    std::vector<double> gap(fit.z.size() > 0 ? fit.z.size() - 1 : 0);
    for (std::size_t j = 0; j + 1 < fit.z.size(); ++j) gap[j] = L * (fit.z[j + 1] - fit.z[j]);
    fit.y = chain_isotonic(ys, ws, gap);
    for (double& v : fit.y) v = std::clamp(v, 0.0, 1.0);
    return fit;
}

inline LipschitzMonotoneFit lir(const std::vector<std::pair<double, double>>& points, double L) {
    std::vector<double> z, y;
    for (const auto& [a, b] : points) {
        z.push_back(a);
        y.push_back(b);
    }
    return lir(z, y, L);
}

struct UTrainReport {
    std::vector<double> holdout_loss;
    int selected_iteration = 1;
    int iterations = 0;
    double learning_rate = 0.0;
};

/// Alphatron with the link refit by LIR at every iteration. The returned
/// model carries the fitted link of the selected iterate.
template <KernelInput X>
std::pair<KernelModel<X>, UTrainReport> alphatron_u_train(const Dataset<X>& train, const KernelSpec& kernel, double L,
                                                          double lambda, int T, const Dataset<X>& holdout,
                                                          const KernelCache* cache = nullptr) {
    detail::validate_run(train.size(), holdout.size(), lambda, T);
    if (!(L > 0.0)) throw input_error("L must be positive");
    if (train.y.size() != train.size() || holdout.y.size() != holdout.size())
        throw input_error("label count does not match sample count");
    check_labels(train.y, "training");
    check_labels(holdout.y, "holdout");

    std::optional<KernelCache> own;
    if (!cache) {
        own = make_cache(train, holdout, kernel);
        cache = &*own;
    }
    const std::size_t m = train.size();
    const double step = lambda / static_cast<double>(m);

    std::vector<double> alpha(m, 0.0), best_alpha = alpha, f, fh, hh(holdout.size());
    LipschitzMonotoneFit best_fit;
    UTrainReport report;
    report.iterations = T;
    report.learning_rate = lambda;
    double best = std::numeric_limits<double>::infinity();

    for (int t = 1; t <= T; ++t) {
        mat_vec(cache->train, alpha, f);
        for (double v : f)
            if (!std::isfinite(v)) throw divergence_error("non-finite kernel sum", t);
        LipschitzMonotoneFit fit = lir(f, train.y, L);
        mat_vec(cache->holdout, alpha, fh);
        for (std::size_t j = 0; j < fh.size(); ++j) hh[j] = lir_eval(fit, fh[j]);
        const double loss = detail::mean_sq(hh, holdout.y);
        if (!std::isfinite(loss)) throw divergence_error("non-finite holdout loss", t);
        report.holdout_loss.push_back(loss);
        if (loss < best) {
            best = loss;
            best_alpha = alpha;
            best_fit = fit;
            report.selected_iteration = t;
        }
        if (t == T) break;
        for (std::size_t i = 0; i < m; ++i) alpha[i] += step * (train.y[i] - lir_eval(fit, f[i]));
    }
    KernelModel<X> model{std::move(best_alpha), train.x, kernel, as_link(best_fit)};
    return {std::move(model), std::move(report)};
}

}  // namespace alphatron
