#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "reslab/error.hpp"
#include "reslab/expr.hpp"
#include "reslab/parallel.hpp"
#include "reslab/quadrature.hpp"
#include "reslab/random.hpp"

namespace reslab {

/// Points closer to the origin than this are outside an origin-excluded law's domain.
inline constexpr double kOriginGuard = 1e-9;

/// Degeneracy threshold on the normalized Gram eigenvalue.
inline constexpr double kLambdaThreshold = 1e-8;

struct SamplingDomain {
    double r_min = 0.5;
    double r_max = 2.0;

    void validate() const
    {
        if (!(r_min > 0.0) || !(r_max > r_min) || !std::isfinite(r_max))
            throw ConfigError("annulus needs 0 < r_min < r_max < inf");
    }

    double volume(int d) const
    {
        return ball_volume(d, r_max) - ball_volume(d, r_min);
    }
};

struct DispersionLaw {
    int d = 2;
    Expr omega;
    bool origin_excluded = false;
    std::string label;

    double value(const Vec& v) const
    {
        guard(v);
        return omega.eval(v);
    }
    Grad1 grad(const Vec& v) const
    {
        guard(v);
        return omega.eval_grad(v);
    }
    Jet2 jet(const Vec& v) const
    {
        guard(v);
        return omega.eval_jet(v);
    }

    void guard(const Vec& v) const
    {
        if (origin_excluded && v.norm() < kOriginGuard)
            throw EvalError(EvalError::Kind::Domain, "law '" + label + "' is not defined at the origin");
    }
};

inline Jet2 omega_jet(const DispersionLaw& law, const Vec& v) { return law.jet(v); }

namespace detail {

inline std::string num(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void check_dim(int d, int lo, int hi, const char* what)
{
    if (d < lo || d > hi)
        throw ConfigError(std::string(what) + " law needs dimension in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "], got " + std::to_string(d));
}

/// Splits on commas that are not nested in parentheses.
inline std::vector<std::string> split_top_level(std::string_view s)
{
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '(') ++depth;
        if (s[k] == ')') --depth;
        if (s[k] == ',' && depth == 0) {
            out.emplace_back(s.substr(start, k - start));
            start = k + 1;
        }
    }
    out.emplace_back(s.substr(start));
    return out;
}

inline std::string trim(std::string_view s)
{
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string_view::npos) return {};
    std::size_t b = s.find_last_not_of(" \t");
    return std::string(s.substr(a, b - a + 1));
}

inline double parse_number(const std::string& key, const std::string& text)
{
    double x = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(x))
        throw ConfigError("parameter " + key + ": '" + text + "' is not a number");
    return x;
}

} // namespace detail

inline DispersionLaw make_law(int d, const std::string& text, bool origin_excluded, std::string label)
{
    if (d < 2 || d > kMaxDim) throw ConfigError("dimension must be 2 or 3, got " + std::to_string(d));
    DispersionLaw law;
    law.d = d;
    law.omega = Expr::parse(text, d);
    law.origin_excluded = origin_excluded;
    law.label = std::move(label);
    return law;
}

inline DispersionLaw quadratic_law(int d) { return make_law(d, "dot(v,v)", false, "quadratic"); }

inline DispersionLaw relativistic_law(int d) { return make_law(d, "sqrt(1+dot(v,v))", false, "relativistic"); }

inline DispersionLaw power_law(int d, double C, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("power law needs 0 < alpha < 1");
    if (!(C > 0.0)) throw ConfigError("power law needs C > 0");
    return make_law(d, detail::num(C) + "*norm(v)^" + detail::num(alpha), true,
                    "power:C=" + detail::num(C) + ",alpha=" + detail::num(alpha));
}

inline DispersionLaw gravity_law(int d, double C)
{
    detail::check_dim(d, 2, 2, "gravity");
    if (!(C > 0.0)) throw ConfigError("gravity law needs C > 0");
    return make_law(d, detail::num(C) + "*sqrt(norm(v))", true, "gravity:C=" + detail::num(C));
}

inline DispersionLaw rossby_law(int d)
{
    detail::check_dim(d, 2, 2, "rossby");
    return make_law(d, "v1/(1+dot(v,v))", false, "rossby");
}

/// alpha*h(v1) + beta*v2, with h an expression in v1 alone.
inline DispersionLaw sheared_law(int d, double alpha, double beta, const std::string& h)
{
    detail::check_dim(d, 2, 2, "sheared");
    Expr hx;
    try {
        hx = Expr::parse(h, 1);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("sheared law: h must be an expression in v1: ") + e.what());
    }
    return make_law(d, detail::num(alpha) + "*" + hx.str() + " + " + detail::num(beta) + "*v2", false,
                    "sheared:alpha=" + detail::num(alpha) + ",beta=" + detail::num(beta) + ",h=" + h);
}

/// Parses the law mini-language, e.g. "power:C=1,alpha=0.5" or "expr:norm(v),singular_origin".
inline DispersionLaw parse_law(const std::string& spec, int d)
{
    std::string s = detail::trim(spec);
    std::string head = s, tail;
    if (auto colon = s.find(':'); colon != std::string::npos) {
        head = detail::trim(s.substr(0, colon));
        tail = s.substr(colon + 1);
    }

    auto params = [&](std::map<std::string, std::string> allowed) {
        if (detail::trim(tail).empty()) return allowed;
        for (const auto& item : detail::split_top_level(tail)) {
            auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("law parameter '" + detail::trim(item) + "' needs key=value");
            std::string key = detail::trim(item.substr(0, eq));
            if (!allowed.count(key)) throw ConfigError("unknown parameter '" + key + "' for law '" + head + "'");
            allowed[key] = detail::trim(item.substr(eq + 1));
        }
        return allowed;
    };
    auto no_params = [&] {
        if (!detail::trim(tail).empty()) throw ConfigError("law '" + head + "' takes no parameters");
    };

    try {
        if (head == "quadratic") {
            no_params();
            return quadratic_law(d);
        }
        if (head == "relativistic") {
            no_params();
            return relativistic_law(d);
        }
        if (head == "rossby") {
            no_params();
            return rossby_law(d);
        }
        if (head == "power") {
            auto p = params({{"C", "1"}, {"alpha", "0.5"}});
            return power_law(d, detail::parse_number("C", p["C"]), detail::parse_number("alpha", p["alpha"]));
        }
        if (head == "gravity") {
            auto p = params({{"C", "1"}});
            return gravity_law(d, detail::parse_number("C", p["C"]));
        }
        if (head == "sheared") {
            auto p = params({{"alpha", "1"}, {"beta", "1"}, {"h", ""}});
            if (p["h"].empty()) throw ConfigError("sheared law needs h=<expression in v1>");
            return sheared_law(d, detail::parse_number("alpha", p["alpha"]), detail::parse_number("beta", p["beta"]),
                               p["h"]);
        }
        if (head == "expr") {
            auto parts = detail::split_top_level(tail);
            bool singular = false;
            if (parts.size() == 2 && detail::trim(parts[1]) == "singular_origin") {
                singular = true;
                parts.pop_back();
            }
            if (parts.size() != 1 || detail::trim(parts[0]).empty())
                throw ConfigError("expr law expects expr:<expression>[,singular_origin]");
            return make_law(d, parts[0], singular, "expr:" + detail::trim(tail));
        }
    } catch (const ParseError& e) {
        throw ConfigError("law '" + s + "': " + e.what());
    }
    throw ConfigError("unknown law '" + head + "'");
}

struct IndependenceResult {
    double lambda_min = 0.0;
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero(); ///< normalized Gram of {1, d_i w, d_j w}
};

/// Smallest eigenvalue of the normalized Gram matrix of {1, d_i w, d_j w} on the annulus.
/// Indices are zero-based.
inline IndependenceResult independence_gram(const DispersionLaw& law, int i, int j, const SamplingDomain& dom,
                                            int n_quad)
{
    dom.validate();
    if (i == j || i < 0 || j < 0 || i >= law.d || j >= law.d) throw ConfigError("independence: need distinct indices in range");
    if (n_quad < 100) throw ConfigError("independence: n_quad must be at least 100");
    AnnulusRule q = AnnulusRule::with_size(law.d, dom.r_min, dom.r_max, n_quad);

    const std::size_t n = q.size();
    std::vector<std::array<double, 6>> terms(n);
    parallel_for((n + 255) / 256, [&](std::size_t chunk) {
        for (std::size_t k = chunk * 256; k < std::min(n, chunk * 256 + 256); ++k) {
            Grad1 g = law.grad(q.nodes[k]);
            double f[3] = {1.0, g.gradient[i], g.gradient[j]};
            double w = q.weights[k];
            terms[k] = {w * f[0] * f[0], w * f[0] * f[1], w * f[0] * f[2], w * f[1] * f[1], w * f[1] * f[2], w * f[2] * f[2]};
        }
    });
    std::array<double, 6> s{};
    std::vector<double> col(n);
    for (int c = 0; c < 6; ++c) {
        for (std::size_t k = 0; k < n; ++k) col[k] = terms[k][c];
        s[c] = pairwise_sum(col);
    }
    Eigen::Matrix3d G;
    G << s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5];

    IndependenceResult r;
    Eigen::Vector3d scale;
    for (int a = 0; a < 3; ++a) scale[a] = G(a, a) > 0.0 ? 1.0 / std::sqrt(G(a, a)) : 0.0;
    r.gram = scale.asDiagonal() * G * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(r.gram, Eigen::EigenvaluesOnly);
    r.lambda_min = es.eigenvalues()[0];
    if (!std::isfinite(r.lambda_min)) throw NumericalError(NumericalError::Kind::SingularMatrix, "independence: non-finite Gram matrix");
    return r;
}

inline double independence_margin(const DispersionLaw& law, int i, int j, const SamplingDomain& dom, int n_quad = 4096)
{
    return independence_gram(law, i, j, dom, n_quad).lambda_min;
}

/// Standing hypotheses of the three-wave theory, checked numerically.
struct ThreeWaveHypotheses {
    bool omega_zero_at_origin = false;
    std::optional<bool> gradient_zero_at_origin; ///< empty when the origin is singular
    bool positive_off_origin = false;
    double omega_at_origin = 0.0;
    double min_value = 0.0; ///< smallest sampled value off the origin

    bool all_hold() const
    {
        return omega_zero_at_origin && gradient_zero_at_origin.value_or(true) && positive_off_origin;
    }
};

inline ThreeWaveHypotheses check_three_wave_hypotheses(const DispersionLaw& law, const SamplingDomain& dom,
                                                       std::uint64_t seed = 0)
{
    ThreeWaveHypotheses h;
    Vec zero = Vec::Zero(law.d);
    try {
        h.omega_at_origin = law.omega.eval(zero);
        h.omega_zero_at_origin = std::abs(h.omega_at_origin) <= 1e-12;
    } catch (const EvalError&) {
        h.omega_at_origin = std::nan("");
        h.omega_zero_at_origin = false;
    }
    if (!law.origin_excluded) {
        try {
            h.gradient_zero_at_origin = law.omega.eval_grad(zero).gradient.norm() <= 1e-10;
        } catch (const EvalError&) {
            h.gradient_zero_at_origin = false;
        }
    }
    Stream rng(seed, 0x7e57);
    h.min_value = INFINITY;
    for (int k = 0; k < 1000; ++k) {
        Vec v = rng.annulus(law.d, 0.0, dom.r_max);
        if (v.norm() < kOriginGuard) continue;
        h.min_value = std::min(h.min_value, law.omega.eval(v));
    }
    h.positive_off_origin = h.min_value > 0.0;
    return h;
}

} // namespace reslab
