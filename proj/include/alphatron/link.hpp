#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "alphatron/error.hpp"

namespace alphatron {

enum class LinkKind { ramp, sigmoid, table };

inline std::string to_string(LinkKind k) {
    switch (k) {
        case LinkKind::ramp: return "ramp";
        case LinkKind::sigmoid: return "sigmoid";
        case LinkKind::table: return "table";
    }
    return "unknown";
}

inline LinkKind link_kind_from_string(const std::string& s) {
    if (s == "ramp") return LinkKind::ramp;
    if (s == "sigmoid") return LinkKind::sigmoid;
    if (s == "table") return LinkKind::table;
    throw input_error("unknown link kind '" + s + "'");
}

/// Monotone Lipschitz map into [0, 1].
///
/// ramp: 0 below lo, 1 above hi, linear between (L = 1/(hi - lo)).
/// sigmoid: 1/(1 + exp(-scale (t - shift))) (L = scale/4).
/// table: linear interpolation through knots, constant outside.
/// A non-increasing link evaluates the base map at -t.
struct LinkFunction {
    LinkKind kind = LinkKind::ramp;
    std::string name = "identity-ramp";
    double lo = 0.0, hi = 1.0;
    double scale = 1.0, shift = 0.0;
    std::vector<double> knots_z, knots_y;
    double lipschitz = 1.0;
    bool increasing = true;

    static LinkFunction ramp(double lo, double hi, std::string name = "ramp") {
        if (!(hi > lo)) throw input_error("ramp link needs hi > lo");
        LinkFunction u;
        u.kind = LinkKind::ramp;
        u.name = std::move(name);
        u.lo = lo;
        u.hi = hi;
        u.lipschitz = 1.0 / (hi - lo);
        return u;
    }

    static LinkFunction identity_ramp() { return ramp(0.0, 1.0, "identity-ramp"); }

    static LinkFunction sigmoid(double scale = 1.0, double shift = 0.0) {
        if (!(scale > 0.0)) throw input_error("sigmoid link needs scale > 0");
        LinkFunction u;
        u.kind = LinkKind::sigmoid;
        u.name = "sigmoid";
        u.scale = scale;
        u.shift = shift;
        u.lipschitz = scale / 4.0;
        return u;
    }

    /// Piecewise-linear link through (z, y). `L` is the declared constant;
    /// it must dominate every knot-to-knot slope.
    static LinkFunction table(std::vector<double> z, std::vector<double> y, double L, std::string name = "table") {
        if (z.empty() || z.size() != y.size()) throw input_error("table link needs matching non-empty knots");
        if (!(L > 0.0)) throw input_error("table link needs L > 0");
        for (std::size_t i = 1; i < z.size(); ++i) {
            if (!(z[i] > z[i - 1])) throw input_error("table knots must be strictly increasing");
            if (y[i] < y[i - 1]) throw input_error("table values must be non-decreasing");
            if (y[i] - y[i - 1] > L * (z[i] - z[i - 1]) * (1 + 1e-9) + 1e-12)
                throw input_error("table slope exceeds declared Lipschitz constant");
        }
        LinkFunction u;
        u.kind = LinkKind::table;
        u.name = std::move(name);
        u.knots_z = std::move(z);
        u.knots_y = std::move(y);
        u.lipschitz = L;
        return u;
    }

    /// The same map reflected, t -> base(-t); flips the monotone direction.
    LinkFunction mirrored() const {
        LinkFunction u = *this;
        u.increasing = !increasing;
        return u;
    }

    double base(double t) const {
        double v = 0.0;
        switch (kind) {
            case LinkKind::ramp: v = (t - lo) / (hi - lo); break;
            case LinkKind::sigmoid: v = 1.0 / (1.0 + std::exp(-scale * (t - shift))); break;
            case LinkKind::table: v = interpolate(t); break;
        }
        return std::clamp(v, 0.0, 1.0);
    }

    double operator()(double t) const { return base(increasing ? t : -t); }

    // Sign applied to the Alphatron update for this link's direction.
    double direction() const { return increasing ? 1.0 : -1.0; }

    bool operator==(const LinkFunction&) const = default;

private:
    double interpolate(double t) const {
        if (t <= knots_z.front()) return knots_y.front();
        if (t >= knots_z.back()) return knots_y.back();
        const auto it = std::upper_bound(knots_z.begin(), knots_z.end(), t);
        const std::size_t j = static_cast<std::size_t>(it - knots_z.begin());
        const double z0 = knots_z[j - 1], z1 = knots_z[j];
        const double w = (t - z0) / (z1 - z0);
        return knots_y[j - 1] + w * (knots_y[j] - knots_y[j - 1]);
    }
};

/// Interval on which a link's shape lives, padded by one unit on both sides.
inline std::pair<double, double> probe_interval(const LinkFunction& u) {
    double a = -2.0, b = 2.0;
    switch (u.kind) {
        case LinkKind::ramp: a = u.lo - 1.0; b = u.hi + 1.0; break;
        case LinkKind::sigmoid: a = u.shift - 10.0 / u.scale - 1.0; b = u.shift + 10.0 / u.scale + 1.0; break;
        case LinkKind::table: a = u.knots_z.front() - 1.0; b = u.knots_z.back() + 1.0; break;
    }
    if (!u.increasing) return {-b, -a};
    return {a, b};
}

/// Largest finite-difference slope of u on `points` equispaced probes; also
/// checks monotone direction and range.
struct LipschitzProbe {
    double max_slope = 0.0;
    bool monotone = true;
    bool in_range = true;
};

inline LipschitzProbe probe_link(const LinkFunction& u, std::size_t points = 10000) {
    auto [a, b] = probe_interval(u);
    LipschitzProbe r;
    double prev_t = a, prev_v = u(a);
    for (std::size_t i = 1; i < points; ++i) {
        const double t = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
        const double v = u(t);
        if (v < 0.0 || v > 1.0) r.in_range = false;
        const double diff = v - prev_v;
        if (u.increasing ? diff < -1e-15 : diff > 1e-15) r.monotone = false;
        r.max_slope = std::max(r.max_slope, std::abs(diff) / (t - prev_t));
        prev_t = t;
        prev_v = v;
    }
    return r;
}

inline bool verify_lipschitz(const LinkFunction& u, std::size_t points = 10000) {
    const LipschitzProbe p = probe_link(u, points);
    return p.monotone && p.in_range && p.max_slope <= u.lipschitz * (1 + 1e-6);
}

}  // namespace alphatron
