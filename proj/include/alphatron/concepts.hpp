#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "alphatron/error.hpp"
#include "alphatron/kernels.hpp"
#include "alphatron/link.hpp"
#include "alphatron/polyapprox.hpp"
#include "alphatron/rng.hpp"

namespace alphatron {

inline constexpr int max_consecutive_rejections = 100000;

inline Vector sample_sphere(int n, Rng& rng) {
    if (n < 1) throw input_error("sphere dimension must be >= 1");
    Vector x(static_cast<std::size_t>(n));
    double r = 0.0;
    while (r == 0.0) {
        for (double& v : x) v = rng.normal();
        r = norm(x);
    }
    for (double& v : x) v /= r;
    return x;
}

inline Vector sample_cube(int n, Rng& rng) {
    if (n < 1) throw input_error("cube dimension must be >= 1");
    Vector x(static_cast<std::size_t>(n));
    for (double& v : x) v = rng.sign();
    return x;
}

struct MarginHalfspace {
    Vector w;
    double rho = 0.0;

    bool positive(std::span<const double> x) const { return dot(w, x) > 0.0; }
    bool margin_ok(std::span<const double> x) const { return std::abs(dot(w, x)) >= rho; }
};

inline MarginHalfspace random_halfspace(int n, double rho, Rng& rng) { return {sample_sphere(n, rng), rho}; }

inline bool margins_ok(const std::vector<MarginHalfspace>& hs, std::span<const double> x) {
    return std::all_of(hs.begin(), hs.end(), [&](const MarginHalfspace& h) { return h.margin_ok(x); });
}

/// Uniform on the sphere conditioned on every margin holding, by rejection.
inline Vector sample_with_margin(const std::vector<MarginHalfspace>& hs, Rng& rng) {
    if (hs.empty()) throw input_error("no halfspaces given");
    const int n = static_cast<int>(hs.front().w.size());
    for (const auto& h : hs) {
        if (!(h.rho < 1.0)) throw input_error("margin must be < 1");
        if (static_cast<int>(h.w.size()) != n) throw input_error("halfspace dimensions differ");
    }
    for (int tries = 0; tries < max_consecutive_rejections; ++tries) {
        Vector x = sample_sphere(n, rng);
        if (margins_ok(hs, x)) return x;
    }
    throw infeasibility_error("margin rejection sampling: acceptance below 1e-4");
}

inline Vector sample_with_margin(const MarginHalfspace& h, Rng& rng) { return sample_with_margin(std::vector{h}, rng); }

enum class Activation { sigmoid, relu };

inline double activate(Activation a, double t) { return a == Activation::sigmoid ? sigmoid(t) : relu(t); }

/// x -> link(sum_i b_i act(a_i . x)).
struct TwoLayerNet {
    std::vector<Vector> a;
    Vector b;
    Activation hidden = Activation::sigmoid;
    LinkFunction out = LinkFunction::identity_ramp();
};

inline TwoLayerNet random_two_layer(int k, int n, Activation act, const LinkFunction& out, Rng& rng) {
    TwoLayerNet net;
    for (int i = 0; i < k; ++i) net.a.push_back(sample_sphere(n, rng));
    net.b = sample_sphere(k, rng);
    for (double& v : net.b) v = std::abs(v);
    net.hidden = act;
    net.out = out;
    return net;
}

inline double eval_net1(const TwoLayerNet& net, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < net.a.size(); ++i) s += net.b[i] * activate(net.hidden, dot(net.a[i], x));
    return s;
}

inline double eval_net2(const TwoLayerNet& net, std::span<const double> x) { return net.out(eval_net1(net, x)); }

inline double eval_intersection(const std::vector<MarginHalfspace>& hs, std::span<const double> x) {
    for (const auto& h : hs)
        if (!h.positive(x)) return 0.0;
    return 1.0;
}

inline int positive_count(const std::vector<MarginHalfspace>& hs, std::span<const double> x) {
    int c = 0;
    for (const auto& h : hs) c += h.positive(x) ? 1 : 0;
    return c;
}

// Strictly more than half of the halfspaces.
inline double eval_majority(const std::vector<MarginHalfspace>& hs, std::span<const double> x) {
    return 2 * positive_count(hs, x) > static_cast<int>(hs.size()) ? 1.0 : 0.0;
}

/// Ramp with u(a) = 0 for a <= 1 - 1/t and u(1) = 1. Applied to the fraction
/// of satisfied halfspaces it reproduces the intersection exactly; L = t.
inline LinkFunction intersection_as_link(int t) {
    if (t < 1) throw input_error("intersection needs t >= 1");
    return LinkFunction::ramp(1.0 - 1.0 / t, 1.0, "intersection-ramp");
}

/// Ramp that is 0 below (q-1)/t and 1 from q/t on, q = floor(t/2) + 1.
inline LinkFunction majority_as_link(int t) {
    if (t < 1) throw input_error("majority needs t >= 1");
    const int q = t / 2 + 1;
    return LinkFunction::ramp(static_cast<double>(q - 1) / t, static_cast<double>(q) / t, "majority-ramp");
}

struct Literal {
    int var = 0;
    bool positive = true;  // satisfied when x_var == +1

    bool operator==(const Literal&) const = default;
};

struct DNFFormula {
    int n = 0;
    std::vector<std::vector<Literal>> terms;

    std::size_t size() const { return terms.size(); }
};

inline bool term_satisfied(const std::vector<Literal>& term, std::span<const double> x) {
    for (const auto& l : term)
        if ((x[static_cast<std::size_t>(l.var)] > 0.0) != l.positive) return false;
    return true;
}

inline void require_cube(std::span<const double> x) {
    for (double v : x)
        if (v != 1.0 && v != -1.0) throw input_error("point is not in {-1,1}^n");
}

inline double eval_dnf(const DNFFormula& f, std::span<const double> x) {
    require_cube(x);
    for (const auto& t : f.terms)
        if (term_satisfied(t, x)) return 1.0;
    return 0.0;
}

inline double dnf_fraction(const DNFFormula& f, std::span<const double> x) {
    require_cube(x);
    if (f.terms.empty()) return 0.0;
    int c = 0;
    for (const auto& t : f.terms) c += term_satisfied(t, x) ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(f.terms.size());
}

/// s terms of `width` distinct variables each, random polarities.
inline DNFFormula random_dnf(int s, int n, int width, Rng& rng) {
    if (width > n || width < 1) throw input_error("term width must lie in [1, n]");
    DNFFormula f;
    f.n = n;
    for (int i = 0; i < s; ++i) {
        std::vector<int> vars(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) vars[j] = j;
        std::vector<Literal> term;
        for (int j = 0; j < width; ++j) {
            const std::size_t pick = j + rng.below(static_cast<std::uint64_t>(n - j));
            std::swap(vars[j], vars[pick]);
            term.push_back({vars[j], rng.sign() > 0});
        }
        std::sort(term.begin(), term.end(), [](const Literal& a, const Literal& b) { return a.var < b.var; });
        f.terms.push_back(std::move(term));
    }
    return f;
}

enum class LabelMode { bernoulli, exact_mean };

/// y with E[y | x] = c: a coin flip in bernoulli mode, c itself otherwise.
inline double pconcept_draw(double c, LabelMode mode, Rng& rng) {
    if (!(c >= -1e-9 && c <= 1.0 + 1e-9)) throw concept_error("conditional mean " + std::to_string(c) + " outside [0, 1]");
    if (mode == LabelMode::exact_mean) return c;
    return rng.bernoulli(std::clamp(c, 0.0, 1.0)) ? 1.0 : 0.0;
}

enum class BagMode { independent, clustered };

/// Bags whose label is Bernoulli with mean u(average instance value).
///
/// `instance` draws one admissible instance. `admissible` rejects jittered
/// copies in clustered mode.
struct BagDistributionSpec {
    std::function<Vector(Rng&)> instance;
    std::function<double(const Vector&)> instance_mean;
    std::function<bool(const Vector&)> admissible;
    int min_size = 1;
    int max_size = 1;
    LinkFunction link = LinkFunction::identity_ramp();
    BagMode mode = BagMode::independent;
    double jitter = 0.1;
};

inline double bag_mean(const BagDistributionSpec& spec, const Bag& bag) {
    if (bag.empty()) throw input_error("empty bag");
    double s = 0.0;
    for (const auto& x : bag) s += spec.instance_mean(x);
    return spec.link(s / static_cast<double>(bag.size()));
}

inline Bag draw_bag(const BagDistributionSpec& spec, Rng& rng) {
    if (spec.min_size < 1 || spec.max_size < spec.min_size) throw input_error("bag size bounds invalid");
    const int size = spec.min_size + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_size - spec.min_size + 1)));
    Bag bag;
    bag.push_back(spec.instance(rng));
    for (int i = 1; i < size; ++i) {
        if (spec.mode == BagMode::independent) {
            bag.push_back(spec.instance(rng));
            continue;
        }
        const Vector& seed = bag.front();
        int tries = 0;
        while (true) {
            Vector x = seed;
            for (double& v : x) v += spec.jitter * rng.normal();
            const double r = norm(x);
            if (r > 0.0) {
                for (double& v : x) v /= r;
                if (!spec.admissible || spec.admissible(x)) {
                    bag.push_back(std::move(x));
                    break;
                }
            }
            if (++tries >= max_consecutive_rejections) throw infeasibility_error("clustered bag jitter: no admissible copy");
        }
    }
    return bag;
}

inline std::pair<Bag, double> sample_bag(const BagDistributionSpec& spec, Rng& rng) {
    Bag bag = draw_bag(spec, rng);
    const double c = bag_mean(spec, bag);
    return {std::move(bag), pconcept_draw(c, LabelMode::bernoulli, rng)};
}

}  // namespace alphatron
