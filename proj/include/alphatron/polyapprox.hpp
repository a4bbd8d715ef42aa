#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "alphatron/error.hpp"
#include "alphatron/kernels.hpp"

namespace alphatron {

inline constexpr int max_poly_degree = 200;
inline constexpr std::size_t audit_points = 100000;
inline constexpr double audit_slack = 1e-9;

/// Dense monomial-basis polynomial, coefficients in ascending degree.
struct UnivariatePolynomial {
    std::vector<double> coeffs;

    int degree() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.size()) - 1; }

    double coeff_l2() const {
        double s = 0.0;
        for (double c : coeffs) s += c * c;
        return std::sqrt(s);
    }

    bool operator==(const UnivariatePolynomial&) const = default;
};

namespace detail {

inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    const double z = s - a;
    e = (a - (s - z)) + (b - z);
}

inline void two_prod(double a, double b, double& p, double& e) {
    p = a * b;
    e = std::fma(a, b, -p);
}

}  // namespace detail

/// Horner evaluation with error-free transformations (compensated Horner).
inline double eval_poly(const UnivariatePolynomial& p, double t) {
    if (p.coeffs.empty()) return 0.0;
    double r = p.coeffs.back();
    double c = 0.0;
    for (std::size_t i = p.coeffs.size() - 1; i-- > 0;) {
        double prod, pe, sum, se;
        detail::two_prod(r, t, prod, pe);
        detail::two_sum(prod, p.coeffs[i], sum, se);
        r = sum;
        c = c * t + (pe + se);
    }
    return r + c;
}

/// T_r in the monomial basis via T_{r+1} = 2t T_r - T_{r-1}.
inline UnivariatePolynomial chebyshev(int r) {
    if (r < 0) throw input_error("chebyshev degree must be >= 0");
    if (r > 64) throw capacity_error("chebyshev degree > 64 risks coefficient overflow");
    std::vector<double> prev{1.0};
    if (r == 0) return {prev};
    std::vector<double> cur{0.0, 1.0};
    for (int k = 1; k < r; ++k) {
        std::vector<double> next(cur.size() + 1, 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += 2.0 * cur[i];
        for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= prev[i];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return {cur};
}

/// Finite Chebyshev series sum_k c_k T_k(t), evaluated by Clenshaw.
struct ChebyshevSeries {
    std::vector<double> coeffs;

    int degree() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.size()) - 1; }

    double operator()(double t) const {
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 1;) {
            const double b0 = coeffs[k] + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        const double c0 = coeffs.empty() ? 0.0 : coeffs[0];
        return c0 + t * b1 - b2;
    }

    UnivariatePolynomial to_monomial() const {
        std::vector<double> out(coeffs.size(), 0.0);
        if (coeffs.empty()) return {{0.0}};
        std::vector<double> prev{1.0}, cur{0.0, 1.0};
        out[0] += coeffs[0];
        for (std::size_t k = 1; k < coeffs.size(); ++k) {
            if (k > 1) {
                std::vector<double> next(cur.size() + 1, 0.0);
                for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += 2.0 * cur[i];
                for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= prev[i];
                prev = std::move(cur);
                cur = std::move(next);
            }
            if (coeffs[k] != 0.0)
                for (std::size_t i = 0; i < cur.size(); ++i) out[i] += coeffs[k] * cur[i];
        }
        return {out};
    }
};

/// Interpolation coefficients of f at `nodes` Chebyshev points of the first kind.
inline ChebyshevSeries chebyshev_interpolant(const std::function<double(double)>& f, int nodes) {
    const double n = nodes;
    std::vector<double> fx(static_cast<std::size_t>(nodes)), theta(fx.size());
    for (int j = 0; j < nodes; ++j) {
        theta[j] = std::numbers::pi * (j + 0.5) / n;
        fx[j] = f(std::cos(theta[j]));
    }
    ChebyshevSeries s;
    s.coeffs.resize(fx.size());
    for (int k = 0; k < nodes; ++k) {
        double acc = 0.0;
        for (int j = 0; j < nodes; ++j) acc += fx[j] * std::cos(k * theta[j]);
        s.coeffs[k] = (k == 0 ? 1.0 : 2.0) * acc / n;
    }
    return s;
}

/// Smallest degree whose discarded tail sum_{k>D} |c_k| is at most `budget`.
inline int truncation_degree(const ChebyshevSeries& s, double budget) {
    double tail = 0.0;
    for (int d = s.degree(); d >= 0; --d) {
        tail += std::abs(s.coeffs[d]);
        if (tail > budget) return d;
    }
    return 0;
}

inline ChebyshevSeries truncate(const ChebyshevSeries& s, int degree) {
    ChebyshevSeries t;
    t.coeffs.assign(s.coeffs.begin(), s.coeffs.begin() + std::min<std::size_t>(degree + 1, s.coeffs.size()));
    return t;
}

/// Bounds attached to a constructed approximator.
///
/// `margin` is 0 for uniform approximations (no excluded band).
struct ApproxCertificate {
    double sup_bound = 0.0;
    double coeff_l2 = 0.0;
    double margin = 0.0;
    double tolerance = 0.0;
    int degree = 0;

    bool operator==(const ApproxCertificate&) const = default;
};

/// An approximator in both bases. The Chebyshev form is the numerically
/// reliable evaluator; the monomial form is what the kernel embedding uses.
struct Approximation {
    UnivariatePolynomial poly;
    ChebyshevSeries series;
    ApproxCertificate cert;

    double operator()(double t) const { return series(t); }
};

/// Equispaced points on [-1, 1] plus the endpoints and +-margin exactly.
inline std::vector<double> audit_grid(std::size_t points, double margin = 0.0) {
    std::vector<double> g;
    g.reserve(points + 4);
    for (std::size_t i = 0; i < points; ++i) g.push_back(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1));
    g.push_back(-1.0);
    g.push_back(1.0);
    if (margin > 0.0) {
        g.push_back(margin);
        g.push_back(-margin);
    }
    return g;
}

inline double sup_abs(const std::function<double(double)>& p, const std::vector<double>& grid) {
    double m = 0.0;
    for (double t : grid) m = std::max(m, std::abs(p(t)));
    return m;
}

inline double sup_error(const std::function<double(double)>& p, const std::function<double(double)>& f,
                        const std::vector<double>& grid) {
    double m = 0.0;
    for (double t : grid) m = std::max(m, std::abs(p(t) - f(t)));
    return m;
}

/// Both sign-approximation bounds on the grid: |p| < 1 + tau everywhere and
/// |p - sign| < tau off the band (-rho, rho).
inline bool audit_sign(const std::function<double(double)>& p, double rho, double tau, std::size_t points) {
    for (double t : audit_grid(points, rho)) {
        const double v = p(t);
        if (!(std::abs(v) < 1.0 + tau + audit_slack)) return false;
        if (std::abs(t) >= rho && !(std::abs(v - (t > 0 ? 1.0 : -1.0)) < tau + audit_slack)) return false;
    }
    return true;
}

namespace detail {

// erfc^{-1}(y) for y in (0, 1), by bisection.
inline double erfc_inv(double y) {
    double lo = 0.0, hi = 30.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (std::erfc(mid) > y)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline constexpr int interpolation_nodes = 2048;

inline Approximation finish(ChebyshevSeries s, double margin, double tolerance) {
    Approximation a;
    a.series = std::move(s);
    a.poly = a.series.to_monomial();
    a.cert.sup_bound = sup_abs(a.series, audit_grid(audit_points, margin)) + audit_slack;
    a.cert.coeff_l2 = a.poly.coeff_l2();
    a.cert.margin = margin;
    a.cert.tolerance = tolerance;
    a.cert.degree = a.series.degree();
    return a;
}

// Audit-then-escalate loop shared by every constructor: try the starting
// degree, then grow it by 25% up to three times.
template <class Audit>
Approximation build(const ChebyshevSeries& full, int start, double margin, double tolerance, Audit audit,
                    const char* what) {
    int d = std::clamp(start, 0, max_poly_degree);
    for (int attempt = 0; attempt <= 3; ++attempt) {
        ChebyshevSeries s = truncate(full, d);
        if (audit(s)) return finish(std::move(s), margin, tolerance);
        if (d == max_poly_degree) break;
        d = std::min(max_poly_degree, static_cast<int>(std::ceil(1.25 * std::max(d, 1))));
    }
    throw construction_error(std::string(what) + ": audit failed at degree " + std::to_string(d));
}

}  // namespace detail

/// Odd polynomial p with |p| < 1 + tau on [-1,1] and |p - sign| < tau for
/// rho <= |t| <= 1. Built as the truncated Chebyshev expansion of erf(k t)
/// with k chosen so that erfc(k rho) = tau / 2.
inline Approximation sign_approx(double rho, double tau) {
    if (!(rho > 0.0 && rho <= 1.0)) throw input_error("sign_approx: rho must lie in (0, 1]");
    if (!(tau > 0.0 && tau < 1.0)) throw input_error("sign_approx: tau must lie in (0, 1)");
    const double k = detail::erfc_inv(tau / 2.0) / rho;
    ChebyshevSeries full = chebyshev_interpolant([k](double t) { return std::erf(k * t); }, detail::interpolation_nodes);
    for (std::size_t i = 0; i < full.coeffs.size(); i += 2) full.coeffs[i] = 0.0;
    const int start = truncation_degree(full, tau / 4.0);
    return detail::build(
        full, start, rho, tau, [&](const ChebyshevSeries& s) { return audit_sign(s, rho, tau, audit_points); },
        "sign_approx");
}

/// (1 + p) / 2 for the sign approximator p: approximates the {0,1} halfspace
/// indicator within tau / 2 off the margin band.
inline Approximation zero_one_sign_approx(double rho, double tau) {
    Approximation s = sign_approx(rho, tau);
    ChebyshevSeries z = s.series;
    for (double& c : z.coeffs) c *= 0.5;
    z.coeffs[0] += 0.5;
    return detail::finish(std::move(z), rho, tau / 2.0);
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double relu(double t) { return t > 0.0 ? t : 0.0; }

/// Uniform eps-approximation of the logistic sigmoid on [-1, 1].
inline Approximation sigmoid_approx(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw input_error("sigmoid_approx: eps must lie in (0, 1/2)");
    const ChebyshevSeries full = chebyshev_interpolant(sigmoid, detail::interpolation_nodes);
    const int start = truncation_degree(full, eps / 2.0);
    const auto grid = audit_grid(audit_points);
    return detail::build(
        full, start, 0.0, eps, [&](const ChebyshevSeries& s) { return sup_error(s, sigmoid, grid) <= eps + audit_slack; },
        "sigmoid_approx");
}

/// Uniform eps-approximation of max(0, t) on [-1, 1].
inline Approximation relu_approx(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw input_error("relu_approx: eps must lie in (0, 1/2)");
    if (eps < 0.02) throw capacity_error("relu_approx: eps < 0.02 exceeds the degree budget");
    const ChebyshevSeries full = chebyshev_interpolant(relu, detail::interpolation_nodes);
    const int start = truncation_degree(full, eps / 2.0);
    const auto grid = audit_grid(audit_points);
    return detail::build(
        full, start, 0.0, eps, [&](const ChebyshevSeries& s) { return sup_error(s, relu, grid) <= eps + audit_slack; },
        "relu_approx");
}

/// sqrt((d+1) (4e)^{2d} M^2): the guaranteed bound on sqrt(sum beta_i^2)
/// for a degree-d polynomial bounded by M on [-1, 1].
inline double coeff_l2_bound(double M, int d) {
    if (M < 0.0 || d < 0) throw input_error("coeff_l2_bound: need M >= 0, d >= 0");
    if (d > 40) throw capacity_error("coeff_l2_bound: d > 40 overflows");
    return std::sqrt(static_cast<double>(d + 1)) * std::pow(4.0 * std::numbers::e, d) * M;
}

/// (M d)^r: bound on sqrt(sum eta_i^2) for p^r when |beta_i| <= M and p has
/// no constant term.
inline double power_coeff_bound(double M, int d, int r) {
    if (M < 0.0 || d < 1 || r < 1) throw input_error("power_coeff_bound: need M >= 0, d >= 1, r >= 1");
    const double b = std::pow(M * d, r);
    if (!std::isfinite(b) || !std::isfinite(b * b)) throw capacity_error("power_coeff_bound overflows");
    return b;
}

/// p_w in the tuple-indexed multinomial feature space of degree deg(p), with
/// <p_w, psi(x)> = p(w . x).
inline Vector embed_composition(const UnivariatePolynomial& p, std::span<const double> w) {
    const int d = p.degree();
    Vector feat = explicit_feature_map(w, d);
    std::size_t offset = 0, width = 1;
    const std::size_t n = w.size();
    for (int j = 0; j <= d; ++j) {
        const double beta = j < static_cast<int>(p.coeffs.size()) ? p.coeffs[j] : 0.0;
        for (std::size_t i = 0; i < width; ++i) feat[offset + i] *= beta;
        offset += width;
        width *= n;
    }
    return feat;
}

/// Certificate for sum_i a_i f_i given certificates for each f_i.
inline ApproxCertificate linear_combination_certificate(const std::vector<std::pair<double, ApproxCertificate>>& certs) {
    if (certs.empty()) throw input_error("linear_combination_certificate: empty list");
    ApproxCertificate out;
    out.margin = certs.front().second.margin;
    for (const auto& [a, c] : certs) {
        const double w = std::abs(a);
        out.tolerance += w * c.tolerance;
        out.coeff_l2 += w * c.coeff_l2;
        out.sup_bound += w * c.sup_bound;
        out.margin = std::min(out.margin, c.margin);
        out.degree = std::max(out.degree, c.degree);
    }
    return out;
}

}  // namespace alphatron
