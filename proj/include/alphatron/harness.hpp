#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "alphatron/alphatron.hpp"
#include "alphatron/alphatron_u.hpp"
#include "alphatron/concepts.hpp"
#include "alphatron/error.hpp"
#include "alphatron/fourier.hpp"
#include "alphatron/kmtron.hpp"
#include "alphatron/rng.hpp"
#include "alphatron/serialize.hpp"

namespace alphatron {

// Malformed or inconsistent configuration; the CLI maps it to exit code 2.
struct config_error : input_error {
    using input_error::input_error;
};

enum class ExperimentKind {
    glm,
    two_layer_sigmoid,
    two_layer_relu,
    low_degree_hypercube,
    intersection_halfspaces,
    majority_halfspaces,
    dnf_kmtron,
    mil_bags,
    unknown_link
};

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kinds() {
    static const std::vector<std::pair<ExperimentKind, std::string>> kinds{
        {ExperimentKind::glm, "glm"},
        {ExperimentKind::two_layer_sigmoid, "two-layer-sigmoid"},
        {ExperimentKind::two_layer_relu, "two-layer-relu"},
        {ExperimentKind::low_degree_hypercube, "low-degree-hypercube"},
        {ExperimentKind::intersection_halfspaces, "intersection-halfspaces"},
        {ExperimentKind::majority_halfspaces, "majority-halfspaces"},
        {ExperimentKind::dnf_kmtron, "dnf-kmtron"},
        {ExperimentKind::mil_bags, "mil-bags"},
        {ExperimentKind::unknown_link, "unknown-link"}};
    return kinds;
}

inline std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : experiment_kinds())
        if (kind == k) return name;
    return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : experiment_kinds())
        if (name == s) return kind;
    throw config_error("unknown experiment kind '" + s + "'");
}

struct LearnerParams {
    std::optional<double> lambda;
    std::optional<int> T;
    double B = 1.0;        // norm bound fed to the default T formula
    double delta = 0.05;
    double C = 2.0;
    double L = 1.0;        // link bound for unknown-link
};

struct ConceptParams {
    double offset = 0.5;   // glm, low-degree constant term
    double scale = 1.0;    // glm slope on w.x
    int hidden = 3;
    std::optional<int> t;  // 2 for intersection, 3 for majority
    double rho = 0.3;
    std::optional<int> terms;  // low-degree: non-constant terms (5); dnf: s (2)
    int degree = 2;        // low-degree
    double spread = 0.5;   // low-degree: L1 mass of the non-constant part
    int width = 3;         // dnf term width
    int bag_min = 1, bag_max = 5;
    std::string bag_mode = "clustered";
    double jitter = 0.1;
    double ramp_lo = -0.5, ramp_hi = 0.5;  // unknown-link planted ramp on w.x
};

struct KMtronParams {
    double eps = 0.05;
    double delta = 0.05;
    double theta = 0.1;
    double lambda = 1.0;
    int T = 3;
    double theta_constant = 1e6;
    int eval_sample = 4000;
    std::uint64_t max_queries = default_query_budget;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::glm;
    std::string id;
    std::uint64_t seed = 0;
    int n = 10;
    std::size_t m = 1000;
    std::size_t holdout = 0;  // 0 resolves to max(1, m/4)
    std::size_t fresh = 10000;
    LabelMode labels = LabelMode::bernoulli;
    std::optional<KernelSpec> kernel;
    LearnerParams learner;
    ConceptParams concept_params;
    KMtronParams kmtron;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw config_error(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw config_error("unknown key '" + k + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out) {
    if (const auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

inline KernelSpec default_kernel(const ExperimentConfig& c) {
    switch (c.kind) {
        case ExperimentKind::glm:
        case ExperimentKind::unknown_link: return KernelSpec::multinomial(1);
        case ExperimentKind::two_layer_sigmoid:
        case ExperimentKind::two_layer_relu: return KernelSpec::multinomial(6);
        case ExperimentKind::low_degree_hypercube: return KernelSpec::explicit_monomial(c.concept_params.degree, c.n);
        case ExperimentKind::intersection_halfspaces:
        case ExperimentKind::majority_halfspaces: return KernelSpec::multinomial(4);
        case ExperimentKind::mil_bags: return KernelSpec::mean_map(KernelSpec::multinomial(4));
        case ExperimentKind::dnf_kmtron: break;
    }
    return KernelSpec::multinomial(1);
}

inline LinkFunction known_link(const ExperimentConfig& c) {
    switch (c.kind) {
        case ExperimentKind::intersection_halfspaces: return intersection_as_link(*c.concept_params.t);
        case ExperimentKind::majority_halfspaces: return majority_as_link(*c.concept_params.t);
        default: return LinkFunction::identity_ramp();
    }
}

inline BagMode bag_mode_from_string(const std::string& s) {
    if (s == "independent") return BagMode::independent;
    if (s == "clustered") return BagMode::clustered;
    throw config_error("bag_mode must be 'independent' or 'clustered'");
}

}  // namespace detail

/// Fills every default so the echoed config reproduces the run on its own.
inline void resolve(ExperimentConfig& c) {
    auto& p = c.concept_params;
    if (c.id.empty()) c.id = to_string(c.kind);
    if (c.n < 1) throw config_error("n must be >= 1");
    if (c.m < 1 || c.fresh < 1) throw config_error("m and fresh must be >= 1");
    if (c.holdout == 0) c.holdout = std::max<std::size_t>(1, c.m / 4);
    if (!p.t) p.t = c.kind == ExperimentKind::majority_halfspaces ? 3 : 2;
    if (*p.t < 1) throw config_error("concept.t must be >= 1");
    if (!p.terms) p.terms = c.kind == ExperimentKind::dnf_kmtron ? 2 : 5;
    if (!(p.rho >= 0.0 && p.rho < 1.0)) throw config_error("concept.rho must lie in [0, 1)");
    if (p.hidden < 1) throw config_error("concept.hidden must be >= 1");
    if (p.bag_min < 1 || p.bag_max < p.bag_min) throw config_error("bag sizes must satisfy 1 <= bag_min <= bag_max");
    detail::bag_mode_from_string(p.bag_mode);
    if (!(p.ramp_hi > p.ramp_lo)) throw config_error("concept.ramp_hi must exceed ramp_lo");
    if (c.kind == ExperimentKind::low_degree_hypercube || c.kind == ExperimentKind::dnf_kmtron) {
        if (c.n > max_oracle_dimension) throw config_error("hypercube experiments need n <= 20");
    }
    if (c.kind == ExperimentKind::low_degree_hypercube) {
        if (p.degree < 1 || p.degree > c.n) throw config_error("concept.degree must lie in [1, n]");
        double avail = 0.0;
        for (int j = 1; j <= p.degree; ++j) avail += static_cast<double>(binomial(c.n, j));
        if (*p.terms < 0 || *p.terms > avail) throw config_error("concept.terms exceeds the available subsets");
    }
    if (c.kind == ExperimentKind::dnf_kmtron) {
        if (*p.terms < 0) throw config_error("concept.terms must be >= 0");
        if (p.width < 1 || p.width > c.n) throw config_error("concept.width must lie in [1, n]");
        KMtronConfig k;
        k.k = std::max(*p.terms, 1);
        k.eps = c.kmtron.eps;
        k.lambda = c.kmtron.lambda;
        k.T = c.kmtron.T;
        k.theta = c.kmtron.theta;
        k.eval_sample = c.kmtron.eval_sample;
        k.delta = c.kmtron.delta;
        k.theta_constant = c.kmtron.theta_constant;
        try {
            k.validate();
        } catch (const input_error& e) {
            throw config_error(e.what());
        }
        if (!(c.kmtron.delta > 0.0 && c.kmtron.delta < 1.0)) throw config_error("kmtron.delta must lie in (0, 1)");
        if (c.kmtron.max_queries < 1) throw config_error("kmtron.max_queries must be >= 1");
        return;
    }
    try {
        if (!c.kernel) c.kernel = detail::default_kernel(c);
        c.kernel->validate();
        const bool bags = c.kind == ExperimentKind::mil_bags;
        if (bags != (c.kernel->kind == KernelKind::mean_map))
            throw config_error(bags ? "mil-bags needs a mean_map kernel" : "mean_map kernel needs bag inputs");
        const bool cube = c.kind == ExperimentKind::low_degree_hypercube;
        if (c.kernel->base().kind == KernelKind::explicit_monomial && (!cube || c.kernel->dimension != c.n))
            throw config_error("explicit_monomial kernel needs hypercube inputs of dimension n");
        const double L = c.kind == ExperimentKind::unknown_link ? c.learner.L : detail::known_link(c).lipschitz;
        if (!(L > 0.0)) throw config_error("learner.L must be positive");
        if (!c.learner.lambda) c.learner.lambda = (c.kind == ExperimentKind::unknown_link ? 2.0 : 1.0) / L;
        if (!c.learner.T) c.learner.T = default_hyperparams(c.learner.B, L, std::max<std::size_t>(c.m, 2), c.learner.delta, c.holdout, c.learner.C).T;
        if (!(*c.learner.lambda > 0.0)) throw config_error("learner.lambda must be positive");
        if (*c.learner.T < 1) throw config_error("learner.T must be >= 1");
    } catch (const config_error&) {
        throw;
    } catch (const input_error& e) {
        throw config_error(e.what());
    }
}

inline ExperimentConfig config_from_json(const json& j) {
    detail::reject_unknown(j, {"kind", "id", "seed", "n", "m", "holdout", "fresh", "labels", "kernel", "learner", "concept", "kmtron"},
                           "config");
    ExperimentConfig c;
    try {
        c.kind = experiment_kind_from_string(detail::need(j, "kind").get<std::string>());
        if (!j.contains("seed")) throw config_error("missing field 'seed'");
        c.seed = j["seed"].get<std::uint64_t>();
        detail::read(j, "id", c.id);
        detail::read(j, "n", c.n);
        detail::read(j, "m", c.m);
        detail::read(j, "holdout", c.holdout);
        detail::read(j, "fresh", c.fresh);
        if (j.contains("labels")) {
            const auto s = j["labels"].get<std::string>();
            if (s == "bernoulli") c.labels = LabelMode::bernoulli;
            else if (s == "exact_mean") c.labels = LabelMode::exact_mean;
            else throw config_error("labels must be 'bernoulli' or 'exact_mean'");
        }
        if (j.contains("kernel")) c.kernel = kernel_from_json(j["kernel"]);
        if (j.contains("learner")) {
            const json& l = j["learner"];
            detail::reject_unknown(l, {"lambda", "T", "B", "delta", "C", "L"}, "learner");
            detail::read(l, "lambda", c.learner.lambda);
            detail::read(l, "T", c.learner.T);
            detail::read(l, "B", c.learner.B);
            detail::read(l, "delta", c.learner.delta);
            detail::read(l, "C", c.learner.C);
            detail::read(l, "L", c.learner.L);
        }
        if (j.contains("concept")) {
            const json& p = j["concept"];
            detail::reject_unknown(p,
                                   {"offset", "scale", "hidden", "t", "rho", "terms", "degree", "spread", "width", "bag_min",
                                    "bag_max", "bag_mode", "jitter", "ramp_lo", "ramp_hi"},
                                   "concept");
            auto& cp = c.concept_params;
            detail::read(p, "offset", cp.offset);
            detail::read(p, "scale", cp.scale);
            detail::read(p, "hidden", cp.hidden);
            detail::read(p, "t", cp.t);
            detail::read(p, "rho", cp.rho);
            detail::read(p, "terms", cp.terms);
            detail::read(p, "degree", cp.degree);
            detail::read(p, "spread", cp.spread);
            detail::read(p, "width", cp.width);
            detail::read(p, "bag_min", cp.bag_min);
            detail::read(p, "bag_max", cp.bag_max);
            detail::read(p, "bag_mode", cp.bag_mode);
            detail::read(p, "jitter", cp.jitter);
            detail::read(p, "ramp_lo", cp.ramp_lo);
            detail::read(p, "ramp_hi", cp.ramp_hi);
        }
        if (j.contains("kmtron")) {
            const json& k = j["kmtron"];
            detail::reject_unknown(k, {"eps", "delta", "theta", "lambda", "T", "theta_constant", "eval_sample", "max_queries"},
                                   "kmtron");
            detail::read(k, "eps", c.kmtron.eps);
            detail::read(k, "delta", c.kmtron.delta);
            detail::read(k, "theta", c.kmtron.theta);
            detail::read(k, "lambda", c.kmtron.lambda);
            detail::read(k, "T", c.kmtron.T);
            detail::read(k, "theta_constant", c.kmtron.theta_constant);
            detail::read(k, "eval_sample", c.kmtron.eval_sample);
            detail::read(k, "max_queries", c.kmtron.max_queries);
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("bad config value: ") + e.what());
    } catch (const config_error&) {
        throw;
    } catch (const input_error& e) {
        throw config_error(e.what());
    }
    return c;
}

inline json to_json_value(const ExperimentConfig& c) {
    json j{{"kind", to_string(c.kind)}, {"id", c.id},         {"seed", c.seed},
           {"n", c.n},                  {"m", c.m},           {"holdout", c.holdout},
           {"fresh", c.fresh},          {"labels", c.labels == LabelMode::bernoulli ? "bernoulli" : "exact_mean"}};
    const auto& p = c.concept_params;
    json target{{"offset", p.offset},   {"scale", p.scale},     {"hidden", p.hidden},   {"rho", p.rho},
                 {"degree", p.degree},   {"spread", p.spread},   {"width", p.width},
                 {"bag_min", p.bag_min}, {"bag_max", p.bag_max}, {"bag_mode", p.bag_mode}, {"jitter", p.jitter},
                 {"ramp_lo", p.ramp_lo}, {"ramp_hi", p.ramp_hi}};
    if (p.t) target["t"] = *p.t;
    if (p.terms) target["terms"] = *p.terms;
    j["concept"] = target;
    if (c.kind == ExperimentKind::dnf_kmtron) {
        const auto& k = c.kmtron;
        j["kmtron"] = {{"eps", k.eps},
                       {"delta", k.delta},
                       {"theta", k.theta},
                       {"lambda", k.lambda},
                       {"T", k.T},
                       {"theta_constant", k.theta_constant},
                       {"eval_sample", k.eval_sample},
                       {"max_queries", k.max_queries}};
        return j;
    }
    if (c.kernel) j["kernel"] = to_json_value(*c.kernel);
    json learner{{"B", c.learner.B}, {"delta", c.learner.delta}, {"C", c.learner.C}, {"L", c.learner.L}};
    if (c.learner.lambda) learner["lambda"] = *c.learner.lambda;
    if (c.learner.T) learner["T"] = *c.learner.T;
    j["learner"] = learner;
    return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

struct RunOptions {
    std::ostream* log = nullptr;
};

namespace detail {

template <KernelInput X>
struct Problem {
    Dataset<X> train, holdout;
    std::vector<X> fresh;
    std::vector<double> fresh_c, fresh_y;
    bool boolean = false;
    json target;
};

template <KernelInput X, class Draw, class Mean>
void fill_problem(Problem<X>& p, const ExperimentConfig& c, Draw&& draw, Mean&& mean) {
    Rng data{c.seed, "data"}, eval{c.seed, "eval"};
    auto fill = [&](Dataset<X>& d, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            X x = draw(data);
            d.y.push_back(pconcept_draw(mean(x), c.labels, data));
            d.x.push_back(std::move(x));
        }
    };
    fill(p.train, c.m);
    fill(p.holdout, c.holdout);
    for (std::size_t i = 0; i < c.fresh; ++i) {
        X x = draw(eval);
        const double v = mean(x);
        p.fresh_c.push_back(v);
        p.fresh_y.push_back(pconcept_draw(v, LabelMode::bernoulli, eval));
        p.fresh.push_back(std::move(x));
    }
}

inline void log_line(const RunOptions& opt, const std::string& s) {
    if (opt.log) *opt.log << s << '\n';
}

struct Scores {
    double eps = 0.0, err = 0.0, zero_one = 0.0;
};

inline Scores score(const std::vector<double>& h, const std::vector<double>& c, const std::vector<double>& y) {
    Scores s;
    for (std::size_t i = 0; i < h.size(); ++i) {
        s.eps += (h[i] - c[i]) * (h[i] - c[i]);
        s.err += (h[i] - y[i]) * (h[i] - y[i]);
        s.zero_one += ((h[i] >= 0.5 ? 1.0 : 0.0) != c[i]) ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(h.size());
    return {s.eps / n, s.err / n, s.zero_one / n};
}

// Trains, predicts the fresh sample in row blocks and fills the metrics.
template <KernelInput X>
void run_kernel_learner(Problem<X>& p, const ExperimentConfig& c, json& out, const RunOptions& opt) {
    const KernelSpec& kernel = *c.kernel;
    log_line(opt, "building kernel matrices (m=" + std::to_string(c.m) + ")");
    const KernelCache cache = make_cache(p.train, p.holdout, kernel);
    KernelModel<X> model;
    std::vector<double> trace;
    int selected = 1;
    if (c.kind == ExperimentKind::unknown_link) {
        auto [mdl, rep] = alphatron_u_train(p.train, kernel, c.learner.L, *c.learner.lambda, *c.learner.T, p.holdout, &cache);
        model = std::move(mdl);
        trace = std::move(rep.holdout_loss);
        selected = rep.selected_iteration;
        out["learned_link_knots"] = model.link.knots_z.size();
    } else {
        auto [mdl, rep] = alphatron_train(p.train, known_link(c), kernel, *c.learner.lambda, *c.learner.T, p.holdout, &cache);
        model = std::move(mdl);
        trace = std::move(rep.holdout_loss);
        selected = rep.selected_iteration;
    }
    log_line(opt, "trained " + std::to_string(trace.size()) + " iterations, selected " + std::to_string(selected));

    std::vector<double> h;
    h.reserve(p.fresh.size());
    bool bounded = true;
    std::vector<double> self_train, f;
    if constexpr (std::is_same_v<X, Bag>) {
        for (std::size_t i = 0; i < p.train.size(); ++i) self_train.push_back(cache.train(i, i));
    }
    constexpr std::size_t block = 1000;
    for (std::size_t lo = 0; lo < p.fresh.size(); lo += block) {
        const std::size_t hi = std::min(lo + block, p.fresh.size());
        const std::vector<X> rows(p.fresh.begin() + static_cast<std::ptrdiff_t>(lo), p.fresh.begin() + static_cast<std::ptrdiff_t>(hi));
        const GramMatrix g = cross_gram(rows, p.train.x, kernel);
        mat_vec(g, model.alphas, f);
        for (double v : f) h.push_back(model.link(v));
        if constexpr (std::is_same_v<X, Bag>) {
            // |K(S,T)| <= 1 and Cauchy-Schwarz on every evaluated pair
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const double kss = evaluate(kernel, rows[r], rows[r]);
                for (std::size_t j = 0; j < g.cols; ++j) {
                    const double k = g(r, j);
                    if (std::abs(k) > 1.0 + 1e-12 || k * k > kss * self_train[j] * (1 + 1e-12) + 1e-15) bounded = false;
                }
            }
        }
    }
    const Scores s = score(h, p.fresh_c, p.fresh_y);
    out["trace"] = trace;
    out["selected_iteration"] = selected;
    out["eps_hat"] = s.eps;
    out["err_hat"] = s.err;
    out["zero_one"] = p.boolean ? json(s.zero_one) : json(nullptr);
    out["queries"] = nullptr;
    if constexpr (std::is_same_v<X, Bag>) out["mean_map_bounded"] = bounded;
    out["concept"] = p.target;
}

inline SparseFourierPolynomial planted_low_degree(const ExperimentConfig& c, Rng& rng) {
    const auto& p = c.concept_params;
    SparseFourierPolynomial poly;
    poly.n = c.n;
    std::map<Mask, double> raw;
    while (static_cast<int>(raw.size()) < *p.terms) {
        const int size = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.degree)));
        Mask m = 0;
        while (std::popcount(m) < size) m |= Mask{1} << rng.below(static_cast<std::uint64_t>(c.n));
        if (!raw.count(m)) raw[m] = rng.uniform(0.2, 1.0) * rng.sign();
    }
    double total = 0.0;
    for (const auto& [m, v] : raw) total += std::abs(v);
    for (const auto& [m, v] : raw) poly.set(m, p.spread * v / total);
    poly.set(0, p.offset);
    return poly;
}

inline json halfspaces_json(const std::vector<MarginHalfspace>& hs) {
    json a = json::array();
    for (const auto& h : hs) a.push_back(to_json_value(h));
    return a;
}

inline void run_dnf(const ExperimentConfig& c, json& out, const RunOptions& opt) {
    const auto& p = c.concept_params;
    Rng concept_rng{c.seed, "concept"};
    const DNFFormula f = random_dnf(*p.terms, c.n, p.width, concept_rng);
    MembershipOracle oracle(c.n, [&](const Vector& x) { return eval_dnf(f, x); }, c.kmtron.max_queries);
    DNFOptions o;
    o.theta = c.kmtron.theta;
    o.lambda = c.kmtron.lambda;
    o.T = c.kmtron.T;
    o.eval_sample = c.kmtron.eval_sample;
    o.theta_constant = c.kmtron.theta_constant;
    o.seed = substream_seed(c.seed, "train-order");
    KMtronResult trace;
    log_line(opt, "running kmtron on a " + std::to_string(*p.terms) + "-term DNF");
    const DNFHypothesis h = learn_dnf(oracle, *p.terms, c.n, c.kmtron.eps, c.kmtron.delta, o, &trace);

    // Exhaustive when the cube is small enough, otherwise a fresh uniform sample.
    std::vector<double> hv, cv;
    if (c.n <= max_brute_dimension) {
        for (Mask b = 0; b < (Mask{1} << c.n); ++b) {
            const Vector x = cube_point(b, c.n);
            hv.push_back(h(x));
            cv.push_back(eval_dnf(f, x));
        }
    } else {
        Rng eval{c.seed, "eval"};
        for (std::size_t i = 0; i < c.fresh; ++i) {
            const Vector x = random_cube_point(c.n, eval);
            hv.push_back(h(x));
            cv.push_back(eval_dnf(f, x));
        }
    }
    const Scores s = score(hv, cv, cv);
    json records = json::array();
    for (const auto& r : trace.trace)
        records.push_back({{"iteration", r.iteration},
                           {"estimated_loss", r.estimated_loss},
                           {"l1", r.l1},
                           {"support", r.support},
                           {"queries", r.queries}});
    out["trace"] = records;
    out["selected_iteration"] = trace.selected_iteration;
    out["eps_hat"] = s.eps;
    out["err_hat"] = s.err;
    out["zero_one"] = s.zero_one;
    out["queries"] = oracle.query_count();
    out["exhaustive"] = c.n <= max_brute_dimension;
    out["hypothesis"] = to_json_value(h.poly);
    out["concept"] = to_json_value(f);
}

}  // namespace detail

/// Generate, train, evaluate against exact conditional means. The returned
/// record carries `wall_time_seconds`; everything else is a function of the
/// config alone.
inline json run_experiment(ExperimentConfig c, const RunOptions& opt = {}) {
    resolve(c);
    const auto start = std::chrono::steady_clock::now();
    json out{{"id", c.id}, {"kind", to_string(c.kind)}, {"seed", c.seed}, {"config", to_json_value(c)}};
    detail::log_line(opt, "running " + c.id + " (" + to_string(c.kind) + ", seed " + std::to_string(c.seed) + ")");
    Rng concept_rng{c.seed, "concept"};
    const auto& p = c.concept_params;

    switch (c.kind) {
        case ExperimentKind::glm:
        case ExperimentKind::unknown_link: {
            const Vector w = sample_sphere(c.n, concept_rng);
            const bool known = c.kind == ExperimentKind::glm;
            const LinkFunction u = known ? LinkFunction::identity_ramp() : LinkFunction::ramp(p.ramp_lo, p.ramp_hi, "planted-ramp");
            detail::Problem<Vector> prob;
            auto mean = [&](const Vector& x) { return known ? u(p.offset + p.scale * dot(w, x)) : u(dot(w, x)); };
            detail::fill_problem(prob, c, [&](Rng& r) { return sample_sphere(c.n, r); }, mean);
            prob.target = {{"w", w}, {"link", to_json_value(u)}};
            if (known) {
                prob.target["offset"] = p.offset;
                prob.target["scale"] = p.scale;
            }
            detail::run_kernel_learner(prob, c, out, opt);
            break;
        }
        case ExperimentKind::two_layer_sigmoid:
        case ExperimentKind::two_layer_relu: {
            const Activation act = c.kind == ExperimentKind::two_layer_sigmoid ? Activation::sigmoid : Activation::relu;
            const TwoLayerNet net = random_two_layer(p.hidden, c.n, act, LinkFunction::identity_ramp(), concept_rng);
            detail::Problem<Vector> prob;
            detail::fill_problem(prob, c, [&](Rng& r) { return sample_sphere(c.n, r); },
                                 [&](const Vector& x) { return eval_net2(net, x); });
            prob.target = {{"a", net.a}, {"b", net.b}, {"hidden", act == Activation::sigmoid ? "sigmoid" : "relu"},
                            {"out", to_json_value(net.out)}};
            detail::run_kernel_learner(prob, c, out, opt);
            break;
        }
        case ExperimentKind::low_degree_hypercube: {
            const SparseFourierPolynomial poly = detail::planted_low_degree(c, concept_rng);
            const LinkFunction u = LinkFunction::identity_ramp();
            detail::Problem<Vector> prob;
            detail::fill_problem(prob, c, [&](Rng& r) { return sample_cube(c.n, r); },
                                 [&](const Vector& x) { return u(eval(poly, x)); });
            prob.target = {{"polynomial", to_json_value(poly)}, {"link", to_json_value(u)}};
            detail::run_kernel_learner(prob, c, out, opt);
            break;
        }
        case ExperimentKind::intersection_halfspaces:
        case ExperimentKind::majority_halfspaces: {
            std::vector<MarginHalfspace> hs;
            for (int i = 0; i < *p.t; ++i) hs.push_back(random_halfspace(c.n, p.rho, concept_rng));
            const bool all = c.kind == ExperimentKind::intersection_halfspaces;
            detail::Problem<Vector> prob;
            prob.boolean = true;
            detail::fill_problem(prob, c, [&](Rng& r) { return sample_with_margin(hs, r); },
                                 [&](const Vector& x) { return all ? eval_intersection(hs, x) : eval_majority(hs, x); });
            prob.target = {{"halfspaces", detail::halfspaces_json(hs)}, {"combine", all ? "and" : "majority"}};
            detail::run_kernel_learner(prob, c, out, opt);
            break;
        }
        case ExperimentKind::mil_bags: {
            const MarginHalfspace h = random_halfspace(c.n, p.rho, concept_rng);
            BagDistributionSpec spec;
            spec.instance = [&](Rng& r) { return sample_with_margin(h, r); };
            spec.instance_mean = [&](const Vector& x) { return h.positive(x) ? 1.0 : 0.0; };
            spec.admissible = [&](const Vector& x) { return h.margin_ok(x); };
            spec.min_size = p.bag_min;
            spec.max_size = p.bag_max;
            spec.mode = detail::bag_mode_from_string(p.bag_mode);
            spec.jitter = p.jitter;
            detail::Problem<Bag> prob;
            detail::fill_problem(prob, c, [&](Rng& r) { return draw_bag(spec, r); },
                                 [&](const Bag& b) { return bag_mean(spec, b); });
            prob.target = {{"instance", to_json_value(h)},
                            {"link", to_json_value(spec.link)},
                            {"bag_min", p.bag_min},
                            {"bag_max", p.bag_max},
                            {"bag_mode", p.bag_mode}};
            detail::run_kernel_learner(prob, c, out, opt);
            break;
        }
        case ExperimentKind::dnf_kmtron: detail::run_dnf(c, out, opt); break;
    }
    out["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// The record without timing fields, for determinism checks.
inline json deterministic_part(json metrics) {
    metrics.erase("wall_time_seconds");
    return metrics;
}

inline json error_record(const ExperimentConfig& c, const std::exception& e) {
    std::string type = "error";
    int iteration = -1;
    if (const auto* d = dynamic_cast<const divergence_error*>(&e)) {
        type = "divergence";
        iteration = d->iteration();
    } else if (dynamic_cast<const budget_error*>(&e)) type = "budget";
    else if (dynamic_cast<const capacity_error*>(&e)) type = "capacity";
    else if (dynamic_cast<const construction_error*>(&e)) type = "construction";
    else if (dynamic_cast<const infeasibility_error*>(&e)) type = "infeasibility";
    else if (dynamic_cast<const concept_error*>(&e)) type = "concept";
    else if (dynamic_cast<const unsupported_error*>(&e)) type = "unsupported";
    else if (dynamic_cast<const input_error*>(&e)) type = "input";
    json err{{"type", type}, {"message", e.what()}};
    if (iteration >= 0) err["iteration"] = iteration;
    return {{"id", c.id.empty() ? to_string(c.kind) : c.id}, {"kind", to_string(c.kind)}, {"seed", c.seed}, {"error", err}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

// ---- sweeps ----

inline constexpr std::size_t max_sweep_cells = 200;

struct SweepCell {
    std::map<std::string, json> params;  // dotted config path -> value
    json config;
};

struct SweepPlan {
    std::vector<std::string> keys;
    std::vector<SweepCell> cells;
};

namespace detail {

inline void set_path(json& j, const std::string& dotted, const json& v) {
    json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw config_error("bad grid key '" + dotted + "'");
        if (dot == std::string::npos) {
            (*cur)[key] = v;
            return;
        }
        if (!cur->contains(key)) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        if (!cur->is_object()) throw config_error("grid key '" + dotted + "' crosses a non-object");
        start = dot + 1;
    }
}

}  // namespace detail

/// `{"base": {...}, "grid": {"m": [..], "concept.rho": [..]}}`: the cartesian
/// product of the grid over the base config, keys in sorted order.
inline SweepPlan plan_sweep(const json& j, std::optional<std::uint64_t> seed_override = std::nullopt) {
    detail::reject_unknown(j, {"base", "grid"}, "sweep config");
    if (!j.contains("base") || !j.contains("grid")) throw config_error("sweep config needs 'base' and 'grid'");
    json base = j["base"];
    if (!base.is_object()) throw config_error("sweep base must be an object");
    if (seed_override) base["seed"] = *seed_override;
    const json& grid = j["grid"];
    if (!grid.is_object() || grid.empty()) throw config_error("grid must be a non-empty object");
    SweepPlan plan;
    std::size_t count = 1;
    for (const auto& [k, v] : grid.items()) {
        if (!v.is_array() || v.empty()) throw config_error("grid entry '" + k + "' must be a non-empty array");
        plan.keys.push_back(k);
        count *= v.size();
        if (count > max_sweep_cells) throw config_error("sweep grid exceeds 200 cells");
    }
    for (std::size_t idx = 0; idx < count; ++idx) {
        SweepCell cell;
        cell.config = base;
        std::size_t rest = idx;
        for (auto it = plan.keys.rbegin(); it != plan.keys.rend(); ++it) {
            const json& values = grid[*it];
            const json& v = values[rest % values.size()];
            rest /= values.size();
            cell.params[*it] = v;
            detail::set_path(cell.config, *it, v);
        }
        // every cell must parse before anything runs
        config_from_json(cell.config);
        plan.cells.push_back(std::move(cell));
    }
    return plan;
}

namespace detail {

inline std::string csv_field(const json& v) {
    if (v.is_null()) return "";
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

}  // namespace detail

inline const std::vector<std::string>& sweep_metric_columns() {
    static const std::vector<std::string> cols{"eps_hat", "err_hat", "zero_one", "queries", "selected_iteration"};
    return cols;
}

/// Runs every cell into `dir/cell_NNN.json` and writes `dir/summary.csv`.
/// A failing cell gets an error record and an error row; the rest still run.
/// Returns the number of failed cells.
inline std::size_t run_sweep(const SweepPlan& plan, const std::filesystem::path& dir, const RunOptions& opt = {},
                             std::optional<std::uint64_t> max_queries = std::nullopt) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    csv << "cell";
    for (const auto& k : plan.keys) csv << ',' << detail::csv_field(k);
    csv << ",status";
    for (const auto& k : sweep_metric_columns()) csv << ',' << k;
    csv << ",message\n";

    std::size_t failed = 0;
    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
        const auto& cell = plan.cells[i];
        char name[32];
        std::snprintf(name, sizeof name, "cell_%03zu.json", i);
        ExperimentConfig c = config_from_json(cell.config);
        if (max_queries) c.kmtron.max_queries = *max_queries;
        json record;
        std::string status = "ok", message;
        try {
            record = run_experiment(c, opt);
        } catch (const std::exception& e) {
            record = error_record(c, e);
            status = "error";
            message = e.what();
            ++failed;
            detail::log_line(opt, "cell " + std::to_string(i) + " failed: " + message);
        }
        write_json(dir / name, record);
        csv << i;
        for (const auto& k : plan.keys) csv << ',' << detail::csv_field(cell.params.at(k));
        csv << ',' << status;
        for (const auto& k : sweep_metric_columns())
            csv << ',' << (record.contains(k) ? detail::csv_field(record[k]) : std::string());
        csv << ',' << detail::csv_field(message) << '\n';
    }
    std::ofstream out(dir / "summary.csv");
    if (!out) throw error("cannot write summary.csv");
    out << csv.str();
    return failed;
}

}  // namespace alphatron
