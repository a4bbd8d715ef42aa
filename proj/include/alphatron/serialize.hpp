#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "alphatron/alphatron.hpp"
#include "alphatron/concepts.hpp"
#include "alphatron/error.hpp"
#include "alphatron/fourier.hpp"
#include "alphatron/kernels.hpp"
#include "alphatron/link.hpp"
#include "alphatron/polyapprox.hpp"

namespace alphatron {

using nlohmann::json;

inline constexpr int model_format_version = 1;

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

inline const json& need(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw input_error(std::string("missing field '") + key + "'");
    return *it;
}

}  // namespace detail

inline json to_json_value(const KernelSpec& k) {
    json j{{"kind", to_string(k.kind)},
           {"degree", k.degree},
           {"normalized", k.normalized},
           {"declared_norm_bound", k.declared_norm_bound}};
    if (k.kind == KernelKind::explicit_monomial || k.base_kind == KernelKind::explicit_monomial)
        j["dimension"] = k.dimension;
    if (k.kind == KernelKind::mean_map) j["base_kind"] = to_string(k.base_kind);
    return j;
}

inline KernelSpec kernel_from_json(const json& j) {
    if (!j.is_object()) throw input_error("kernel must be an object");
    const KernelKind kind = kernel_kind_from_string(detail::need(j, "kind").get<std::string>());
    const int degree = detail::need(j, "degree").get<int>();
    const bool normalized = detail::get_or(j, "normalized", true);
    const double bound = detail::get_or(j, "declared_norm_bound", 1.0);
    const int dimension = detail::get_or(j, "dimension", 0);
    auto plain = [&](KernelKind k) {
        switch (k) {
            case KernelKind::multinomial: return KernelSpec::multinomial(degree, normalized, bound);
            case KernelKind::explicit_monomial: return KernelSpec::explicit_monomial(degree, dimension, normalized);
            case KernelKind::mean_map: break;
        }
        throw input_error("mean map base cannot be a mean map");
    };
    if (kind != KernelKind::mean_map) return plain(kind);
    return KernelSpec::mean_map(plain(kernel_kind_from_string(detail::need(j, "base_kind").get<std::string>())));
}

inline json to_json_value(const LinkFunction& u) {
    json j{{"kind", to_string(u.kind)}, {"name", u.name}, {"lipschitz", u.lipschitz}, {"increasing", u.increasing}};
    switch (u.kind) {
        case LinkKind::ramp: j["lo"] = u.lo; j["hi"] = u.hi; break;
        case LinkKind::sigmoid: j["scale"] = u.scale; j["shift"] = u.shift; break;
        case LinkKind::table: j["knots_z"] = u.knots_z; j["knots_y"] = u.knots_y; break;
    }
    return j;
}

inline LinkFunction link_from_json(const json& j) {
    if (!j.is_object()) throw input_error("link must be an object");
    const LinkKind kind = link_kind_from_string(detail::need(j, "kind").get<std::string>());
    LinkFunction u;
    switch (kind) {
        case LinkKind::ramp:
            u = LinkFunction::ramp(detail::need(j, "lo").get<double>(), detail::need(j, "hi").get<double>(),
                                   detail::get_or<std::string>(j, "name", "ramp"));
            break;
        case LinkKind::sigmoid:
            u = LinkFunction::sigmoid(detail::get_or(j, "scale", 1.0), detail::get_or(j, "shift", 0.0));
            break;
        case LinkKind::table:
            u = LinkFunction::table(detail::need(j, "knots_z").get<std::vector<double>>(),
                                    detail::need(j, "knots_y").get<std::vector<double>>(),
                                    detail::need(j, "lipschitz").get<double>(),
                                    detail::get_or<std::string>(j, "name", "table"));
            break;
    }
    if (j.contains("name")) u.name = j["name"].get<std::string>();
    if (j.contains("lipschitz")) u.lipschitz = j["lipschitz"].get<double>();
    if (!detail::get_or(j, "increasing", true)) u = u.mirrored();
    return u;
}

// Degree-ascending coefficient array.
inline json to_json_value(const UnivariatePolynomial& p) { return p.coeffs; }

inline UnivariatePolynomial polynomial_from_json(const json& j) {
    if (!j.is_array()) throw input_error("polynomial must be a coefficient array");
    return {j.get<std::vector<double>>()};
}

// Bit i of the mask is variable i.
inline json to_json_value(const SparseFourierPolynomial& p) {
    json terms = json::array();
    for (const auto& [m, c] : p.coeffs) terms.push_back(json::array({m, c}));
    return {{"n", p.n}, {"coeffs", terms}};
}

inline SparseFourierPolynomial fourier_from_json(const json& j) {
    SparseFourierPolynomial p;
    p.n = detail::need(j, "n").get<int>();
    if (p.n < 0 || p.n > 32) throw input_error("fourier dimension out of range");
    for (const auto& t : detail::need(j, "coeffs")) {
        const auto m = t.at(0).get<Mask>();
        if (p.n < 32 && (m >> p.n) != 0) throw input_error("fourier mask outside [n]");
        p.set(m, t.at(1).get<double>());
    }
    return p;
}

inline json to_json_value(const MarginHalfspace& h) { return {{"w", h.w}, {"rho", h.rho}}; }

inline json to_json_value(const DNFFormula& f) {
    json terms = json::array();
    for (const auto& t : f.terms) {
        json term = json::array();
        for (const auto& l : t) term.push_back(l.positive ? l.var + 1 : -(l.var + 1));
        terms.push_back(term);
    }
    return {{"n", f.n}, {"terms", terms}};
}

template <KernelInput X>
json to_json_value(const KernelModel<X>& m) {
    return {{"version", model_format_version},
            {"kernel", to_json_value(m.kernel)},
            {"link", to_json_value(m.link)},
            {"alphas", m.alphas},
            {"support", m.support}};
}

template <KernelInput X>
KernelModel<X> model_from_json(const json& j) {
    if (detail::need(j, "version").get<int>() != model_format_version) throw input_error("unsupported model version");
    KernelModel<X> m{detail::need(j, "alphas").get<std::vector<double>>(), detail::need(j, "support").get<std::vector<X>>(),
                     kernel_from_json(detail::need(j, "kernel")), link_from_json(detail::need(j, "link"))};
    if (m.alphas.size() != m.support.size()) throw input_error("alphas and support differ in length");
    return m;
}

}  // namespace alphatron
