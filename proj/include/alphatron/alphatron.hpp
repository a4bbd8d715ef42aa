#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "alphatron/error.hpp"
#include "alphatron/kernels.hpp"
#include "alphatron/link.hpp"

namespace alphatron {

template <KernelInput X>
struct Dataset {
    std::vector<X> x;
    std::vector<double> y;

    std::size_t size() const { return x.size(); }
};

inline void check_labels(const std::vector<double>& y, const char* which) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) throw input_error(std::string(which) + " label " + std::to_string(i) + " is not finite");
        if (y[i] < 0.0 || y[i] > 1.0)
            throw input_error(std::string(which) + " label " + std::to_string(i) + " outside [0, 1]");
    }
}

/// h(x) = u(sum_i alpha_i K(x, x_i)).
template <KernelInput X>
struct KernelModel {
    std::vector<double> alphas;
    std::vector<X> support;
    KernelSpec kernel;
    LinkFunction link;

    double raw(const X& x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < alphas.size(); ++i)
            if (alphas[i] != 0.0) s += alphas[i] * evaluate(kernel, x, support[i]);
        return s;
    }

    double predict(const X& x) const { return link(raw(x)); }
    double operator()(const X& x) const { return predict(x); }

    std::vector<double> predict(const std::vector<X>& xs) const {
        std::vector<double> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(predict(x));
        return out;
    }
};

struct TrainReport {
    std::vector<double> holdout_loss;
    int selected_iteration = 1;  // 1-based
    int iterations = 0;
    double learning_rate = 0.0;
};

/// y = K a for a row-major rows x cols matrix.
inline void mat_vec(const GramMatrix& k, const std::vector<double>& a, std::vector<double>& out) {
    out.assign(k.rows, 0.0);
    for (std::size_t i = 0; i < k.rows; ++i) {
        const double* r = k.entries.data() + i * k.cols;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= k.cols; j += 4) {
            s0 += r[j] * a[j];
            s1 += r[j + 1] * a[j + 1];
            s2 += r[j + 2] * a[j + 2];
            s3 += r[j + 3] * a[j + 3];
        }
        for (; j < k.cols; ++j) s0 += r[j] * a[j];
        out[i] = (s0 + s1) + (s2 + s3);
    }
}

/// One simultaneous sweep: alpha_i += dir * (lambda/m) (y_i - u(f_i)), with
/// f = K alpha. Returns the next alpha.
inline std::vector<double> alphatron_step(const GramMatrix& k, const std::vector<double>& alphas,
                                          const std::vector<double>& y, const LinkFunction& u, double lambda) {
    std::vector<double> f;
    mat_vec(k, alphas, f);
    const double step = u.direction() * lambda / static_cast<double>(y.size());
    std::vector<double> next = alphas;
    for (std::size_t i = 0; i < y.size(); ++i) next[i] += step * (y[i] - u(f[i]));
    return next;
}

/// Train and holdout kernel matrices, computed once per (data, kernel).
struct KernelCache {
    GramMatrix train;
    GramMatrix holdout;  // holdout rows x train columns
};

template <KernelInput X>
KernelCache make_cache(const Dataset<X>& train, const Dataset<X>& holdout, const KernelSpec& spec) {
    return {gram(train.x, spec), cross_gram(holdout.x, train.x, spec)};
}

namespace detail {

inline double mean_sq(const std::vector<double>& h, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double e = h[j] - y[j];
        s += e * e;
    }
    return s / static_cast<double>(y.size());
}

inline void validate_run(std::size_t m, std::size_t n_holdout, double lambda, int T) {
    if (m == 0) throw input_error("training set is empty");
    if (n_holdout == 0) throw input_error("holdout set is empty");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw input_error("learning rate must be positive");
    if (T < 1) throw input_error("iteration count must be >= 1");
}

}  // namespace detail

/// Kernelized isotonic regression with a known link. Runs T sweeps and returns
/// the iterate whose holdout mean squared error is smallest (earliest on ties).
template <KernelInput X>
std::pair<KernelModel<X>, TrainReport> alphatron_train(const Dataset<X>& train, const LinkFunction& u,
                                                       const KernelSpec& kernel, double lambda, int T,
                                                       const Dataset<X>& holdout,
                                                       const KernelCache* cache = nullptr) {
    detail::validate_run(train.size(), holdout.size(), lambda, T);
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
    const double step = u.direction() * lambda / static_cast<double>(m);

    std::vector<double> alpha(m, 0.0), best_alpha = alpha, f, fh, hh(holdout.size());
    TrainReport report;
    report.iterations = T;
    report.learning_rate = lambda;
    double best = std::numeric_limits<double>::infinity();

    for (int t = 1; t <= T; ++t) {
        mat_vec(cache->holdout, alpha, fh);
        for (std::size_t j = 0; j < fh.size(); ++j) hh[j] = u(fh[j]);
        const double loss = detail::mean_sq(hh, holdout.y);
        if (!std::isfinite(loss)) throw divergence_error("non-finite holdout loss", t);
        report.holdout_loss.push_back(loss);
        if (loss < best) {
            best = loss;
            best_alpha = alpha;
            report.selected_iteration = t;
        }
        if (t == T) break;
        mat_vec(cache->train, alpha, f);
        for (std::size_t i = 0; i < m; ++i) {
            alpha[i] += step * (train.y[i] - u(f[i]));
            if (!std::isfinite(alpha[i])) throw divergence_error("non-finite dual weight", t);
        }
    }
    KernelModel<X> model{std::move(best_alpha), train.x, kernel, u};
    return {std::move(model), std::move(report)};
}

struct Hyperparams {
    double lambda = 1.0;
    int T = 1;
    std::size_t N = 0;
};

/// lambda = 1/L, T = ceil(C B L sqrt(m / ln(1/delta))), N = ceil(C' m ln(T/delta))
/// capped at the available holdout (or the whole holdout when C' is unset).
inline Hyperparams default_hyperparams(double B, double L, std::size_t m, double delta, std::size_t holdout_available,
                                       double C = 2.0, std::optional<double> C_prime = std::nullopt) {
    if (!(B > 0.0) || !(L > 0.0)) throw input_error("B and L must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw input_error("delta must lie in (0, 1)");
    if (m < 2) throw input_error("m must be >= 2");
    Hyperparams h;
    h.lambda = 1.0 / L;
    const double t = C * B * L * std::sqrt(static_cast<double>(m) / std::log(1.0 / delta));
    h.T = static_cast<int>(std::ceil(t - 1e-9));
    h.T = std::max(h.T, 1);
    h.N = holdout_available;
    if (C_prime) {
        const double n = std::ceil(*C_prime * static_cast<double>(m) * std::log(h.T / delta));
        h.N = std::min<std::size_t>(holdout_available, static_cast<std::size_t>(std::max(1.0, n)));
    }
    return h;
}

/// Empirical mean of (h(x) - y)^2.
template <class Predictor, class X>
double squared_err(const Predictor& h, const std::vector<X>& xs, const std::vector<double>& ys) {
    if (xs.empty()) throw input_error("squared_err on empty data");
    if (xs.size() != ys.size()) throw input_error("label count does not match sample count");
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = h(xs[i]) - ys[i];
        s += e * e;
    }
    return s / static_cast<double>(xs.size());
}

/// Empirical mean of (h(x) - c(x))^2 against an exact conditional mean c.
template <class Predictor, class X>
double eps_vs_truth(const Predictor& h, const std::vector<X>& xs,
                    const std::function<double(const std::type_identity_t<X>&)>& c) {
    if (!c) throw unsupported_error("conditional mean is not available for this data");
    if (xs.empty()) throw input_error("eps_vs_truth on empty data");
    double s = 0.0;
    for (const auto& x : xs) {
        const double e = h(x) - c(x);
        s += e * e;
    }
    return s / static_cast<double>(xs.size());
}

}  // namespace alphatron
