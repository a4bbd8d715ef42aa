#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "alphatron/error.hpp"
#include "alphatron/fourier.hpp"
#include "alphatron/link.hpp"
#include "alphatron/rng.hpp"

namespace alphatron {

struct KMtronConfig {
    double k = 1.0;        // L1 budget
    double L = 1.0;        // link Lipschitz constant
    double eps = 0.05;     // target square loss
    double lambda = 1.0;
    int T = 5;
    double theta = 0.1;
    int eval_sample = 4000;
    double delta = 0.05;
    double theta_constant = 1e-2;  // C' in theta <= C' eps^4 / (L^4 k^3)
    std::uint64_t seed = 0;

    double theta_limit() const { return theta_constant * std::pow(eps, 4) / (std::pow(L, 4) * std::pow(k, 3)); }

    void validate() const {
        if (!(lambda > 0.0 && lambda <= 1.0)) throw input_error("kmtron: lambda must lie in (0, 1]");
        if (T < 1) throw input_error("kmtron: T must be >= 1");
        if (!(theta > 0.0 && theta <= 1.0)) throw input_error("kmtron: theta must lie in (0, 1]");
        if (!(k > 0.0) || !(L > 0.0) || !(eps > 0.0)) throw input_error("kmtron: k, L, eps must be positive");
        if (eval_sample < 1) throw input_error("kmtron: eval_sample must be >= 1");
        if (theta > theta_limit() * (1 + 1e-12))
            throw input_error("kmtron: theta " + std::to_string(theta) + " exceeds C' eps^4/(L^4 k^3) = " +
                              std::to_string(theta_limit()));
    }
};

struct KMtronRecord {
    int iteration = 0;
    double estimated_loss = 0.0;
    double l1 = 0.0;
    std::size_t support = 0;
    std::uint64_t queries = 0;
};

struct KMtronResult {
    SparseFourierPolynomial best;
    int selected_iteration = 1;
    std::vector<SparseFourierPolynomial> iterates;
    std::vector<KMtronRecord> trace;
};

/// oracle(x) - u(P_prev(x)): the function handed to km at each iteration.
template <class Oracle>
double inner_query(Oracle& oracle, const LinkFunction& u, const SparseFourierPolynomial& prev, const Vector& x) {
    return oracle(x) - u(eval(prev, x));
}

/// Projected functional gradient through KM. Each iteration adds lambda
/// times the KM estimate of the residual u(P) - u(P_{t-1}), projects onto
/// {L1 <= k} and keeps the coefficients KM would keep. Returns the iterate
/// with the smallest loss on a fixed uniform evaluation sample.
template <class Oracle>
KMtronResult kmtron(const LinkFunction& u, Oracle& oracle, const KMtronConfig& cfg, int n) {
    cfg.validate();
    if (n < 1 || n > max_oracle_dimension) throw capacity_error("kmtron: n must lie in [1, 20]");

    Rng eval_rng{cfg.seed, "kmtron-eval"};
    std::vector<Mask> eval_masks;
    std::vector<double> eval_y;
    for (int i = 0; i < cfg.eval_sample; ++i) {
        const Vector x = random_cube_point(n, eval_rng);
        eval_masks.push_back(cube_bits(x));
        eval_y.push_back(oracle(x));
    }

    KMtronResult result;
    SparseFourierPolynomial p;
    p.n = n;
    double best = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= cfg.T; ++t) {
        KMOptions opt;
        opt.seed = substream_seed(cfg.seed, "km-" + std::to_string(t));
        const SparseFourierPolynomial prev = p;
        auto residual = [&](const Vector& x) { return oracle(x) - u(eval_bits(prev, cube_bits(x))); };
        const SparseFourierPolynomial step = km(residual, cfg.theta, cfg.delta / cfg.T, n, 1.0, opt);
        p = km_exact(proj_l1(axpy(prev, step, cfg.lambda), cfg.k), cfg.theta);
        for (const auto& [m, c] : p.coeffs)
            if (!std::isfinite(c)) throw divergence_error("non-finite coefficient", t);

        double loss = 0.0;
        for (std::size_t i = 0; i < eval_y.size(); ++i) {
            const double e = eval_y[i] - u(eval_bits(p, eval_masks[i]));
            loss += e * e;
        }
        loss /= static_cast<double>(eval_y.size());
        result.trace.push_back({t, loss, l1(p), p.size(), oracle.query_count()});
        result.iterates.push_back(p);
        if (loss < best) {
            best = loss;
            result.best = p;
            result.selected_iteration = t;
        }
    }
    return result;
}

/// Thresholded u(P(x)) >= 1/2.
struct DNFHypothesis {
    SparseFourierPolynomial poly;
    LinkFunction link = LinkFunction::identity_ramp();

    double operator()(const Vector& x) const { return link(eval(poly, x)) >= 0.5 ? 1.0 : 0.0; }
};

struct DNFOptions {
    double theta = 0.1;
    double lambda = 1.0;
    int T = 3;
    int eval_sample = 4000;
    double theta_constant = 1e-2;
    std::uint64_t seed = 0;
};

/// Learns an s-term DNF from membership queries. The target is u(sum of
/// term ANDs) with u the unit ramp; each AND has L1 norm 1, so k = s.
inline DNFHypothesis learn_dnf(MembershipOracle& membership, int s, int n, double eps, double delta,
                               const DNFOptions& opt, KMtronResult* trace = nullptr) {
    KMtronConfig cfg;
    cfg.k = std::max(s, 1);
    cfg.L = 1.0;
    cfg.eps = eps;
    cfg.lambda = opt.lambda;
    cfg.T = opt.T;
    cfg.theta = opt.theta;
    cfg.eval_sample = opt.eval_sample;
    cfg.delta = delta;
    cfg.theta_constant = opt.theta_constant;
    cfg.seed = opt.seed;
    DNFHypothesis h;
    KMtronResult r = kmtron(h.link, membership, cfg, n);
    h.poly = r.best;
    if (trace) *trace = std::move(r);
    return h;
}

}  // namespace alphatron
