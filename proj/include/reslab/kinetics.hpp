#pragma once

// Collision operators and entropy dissipations estimated on resonant samples.
//
// Integrals over the resonant sets use the co-area measure of the chart
// samplers: every sample carries mass = co-area weight * chart volume, and
// only the chart neighbourhoods that the samplers draw from are covered.
// Absolute values therefore depend on this convention; signs and zero sets
// do not.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reslab/dispersion.hpp"
#include "reslab/error.hpp"
#include "reslab/expr.hpp"
#include "reslab/invariants.hpp"
#include "reslab/parallel.hpp"
#include "reslab/random.hpp"
#include "reslab/resonance.hpp"

namespace reslab {

/// Four-wave kernel W(v, v*, v', v*'); an empty expression means W = 1.
struct WaveKernel {
    Expr W;
    bool exchange_symmetric = false; ///< W(v*, v, v*', v') = W(v, v*, v', v*')
    bool pair_symmetric = false;     ///< W(v', v*', v, v*) = W(v, v*, v', v*')

    static WaveKernel parse(std::string_view text, int d, bool exchange = false, bool pairs = false)
    {
        WaveKernel k;
        if (!text.empty()) k.W = Expr::parse(text, d, {"v", "vs", "vp", "vps"});
        k.exchange_symmetric = exchange;
        k.pair_symmetric = pairs;
        return k;
    }

    double operator()(const Vec& v, const Vec& vs, const Vec& vp, const Vec& vps) const
    {
        if (W.empty()) return 1.0;
        const auto d = v.size();
        std::array<double, 12> x{};
        for (Eigen::Index k = 0; k < d; ++k) {
            x[k] = v[k];
            x[d + k] = vs[k];
            x[2 * d + k] = vp[k];
            x[3 * d + k] = vps[k];
        }
        return W.eval(std::span<const double>(x.data(), static_cast<std::size_t>(4 * d)));
    }
};

/// Three-wave kernel W(v, v', v''), required symmetric in its last two arguments.
struct TriadKernel {
    Expr W;

    static TriadKernel parse(std::string_view text, int d)
    {
        TriadKernel k;
        if (!text.empty()) k.W = Expr::parse(text, d, {"v", "vp", "vpp"});
        return k;
    }

    double operator()(const Vec& v, const Vec& vp, const Vec& vpp) const
    {
        if (W.empty()) return 1.0;
        const auto d = v.size();
        std::array<double, 9> x{};
        for (Eigen::Index k = 0; k < d; ++k) {
            x[k] = v[k];
            x[d + k] = vp[k];
            x[2 * d + k] = vpp[k];
        }
        return W.eval(std::span<const double>(x.data(), static_cast<std::size_t>(3 * d)));
    }
};

namespace detail {

inline double positive(const Expr& f, const Vec& v)
{
    double x = f.eval(v);
    if (!(x > 0.0)) {
        std::string at;
        for (Eigen::Index k = 0; k < v.size(); ++k) at += (k ? ", " : "") + fmt(v[k]);
        throw NumericalError(NumericalError::Kind::Positivity, "f = " + fmt(x) + " is not positive at (" + at + ")");
    }
    return x;
}

inline double nonnegative_kernel(double w)
{
    if (!(w >= 0.0)) throw NumericalError(NumericalError::Kind::Positivity, "kernel W is negative on a sample (" + fmt(w) + ")");
    return w;
}

inline bool close_rel(double a, double b) { return std::abs(a - b) <= 1e-10 * std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace detail

/// Checks W >= 0 and the declared symmetries on the given quadruples.
inline void check_kernel(const WaveKernel& k, std::span<const ResonantQuadruple> quads)
{
    for (const auto& q : quads) {
        double w = detail::nonnegative_kernel(k(q.v, q.vs, q.vp, q.vps));
        if (k.exchange_symmetric && !detail::close_rel(w, k(q.vs, q.v, q.vps, q.vp)))
            throw ConfigError("kernel W is declared symmetric under v <-> v* but is not");
        if (k.pair_symmetric && !detail::close_rel(w, k(q.vp, q.vps, q.v, q.vs)))
            throw ConfigError("kernel W is declared symmetric under (v, v*) <-> (v', v*') but is not");
    }
}

inline void check_kernel(const TriadKernel& k, std::span<const ResonantTriple> triples)
{
    for (const auto& t : triples) {
        double w = detail::nonnegative_kernel(k(t.v, t.vp, t.vpp));
        if (!detail::close_rel(w, k(t.v, t.vpp, t.vp)))
            throw ConfigError("three-wave kernel must satisfy W(v, v', v'') = W(v, v'', v')");
    }
}

/// Throws a positivity error unless f > 0 on `n` points of the annulus.
inline void check_positive(const Expr& f, int d, const SamplingDomain& dom, std::uint64_t seed = 0, int n = 1000)
{
    Stream rng(seed, 0x706f73u);
    for (int k = 0; k < n; ++k) detail::positive(f, rng.annulus(d, dom.r_min, dom.r_max));
}

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
    std::size_t rejected = 0; ///< outer samples without a chart (contribute zero)
    std::size_t failures = 0; ///< chart solves that failed (contribute zero)
};

enum class ZeroVerdict { Zero, Positive, Inconclusive };

inline const char* to_string(ZeroVerdict v)
{
    switch (v) {
    case ZeroVerdict::Zero: return "zero";
    case ZeroVerdict::Positive: return "positive";
    default: return "inconclusive";
    }
}

struct Dissipation {
    double value = 0.0;
    double stderr_ = 0.0;
    double scale = 0.0;    ///< weighted mean of the prefactor times (sum of |1/f| terms)^2
    double tol_zero = 0.0; ///< max(1e-12 scale, 3 stderr) unless overridden
    ZeroVerdict verdict = ZeroVerdict::Inconclusive;
    std::size_t n = 0;
    SampleStats stats;
};

namespace detail {

/// Ratio estimator sum(m x) / sum(m) with its delta-method standard error.
inline std::pair<double, double> weighted_mean(const std::vector<double>& m, const std::vector<double>& x)
{
    const std::size_t n = x.size();
    std::vector<double> mx(n), dev(n);
    for (std::size_t k = 0; k < n; ++k) mx[k] = m[k] * x[k];
    const double sm = pairwise_sum(m);
    const double mean = pairwise_sum(mx) / sm;
    for (std::size_t k = 0; k < n; ++k) dev[k] = m[k] * m[k] * (x[k] - mean) * (x[k] - mean);
    return {mean, std::sqrt(pairwise_sum(dev)) / sm};
}

inline std::pair<double, double> plain_mean(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    const double mean = pairwise_sum(x) / static_cast<double>(n);
    std::vector<double> dev(n);
    for (std::size_t k = 0; k < n; ++k) dev[k] = (x[k] - mean) * (x[k] - mean);
    double var = n > 1 ? pairwise_sum(dev) / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

inline void decide(Dissipation& d, std::optional<double> tol_zero)
{
    d.tol_zero = tol_zero ? *tol_zero : std::max(1e-12 * d.scale, 3.0 * d.stderr_);
    if (d.value <= d.tol_zero && d.value <= 1e-8 * d.scale)
        d.verdict = ZeroVerdict::Zero;
    else if (d.value > d.tol_zero)
        d.verdict = ZeroVerdict::Positive;
    else
        d.verdict = ZeroVerdict::Inconclusive;
}

inline Dissipation finish(const std::vector<double>& m, const std::vector<double>& x, const std::vector<double>& s,
                          const SampleStats& stats, std::optional<double> tol_zero)
{
    Dissipation d;
    d.n = x.size();
    d.stats = stats;
    std::tie(d.value, d.stderr_) = weighted_mean(m, x);
    d.scale = weighted_mean(m, s).first;
    decide(d, tol_zero);
    return d;
}

} // namespace detail

/// (1/4) weighted mean over resonant quadruples of W f f* f' f*' (1/f + 1/f* - 1/f' - 1/f*')^2.
inline Dissipation entropy_dissipation_four(const Expr& f, const WaveKernel& W, const DispersionLaw& law,
                                            const SamplingDomain& dom, std::size_t n, std::uint64_t seed,
                                            std::optional<double> tol_zero = std::nullopt,
                                            const SamplerOptions& opt = {})
{
    check_positive(f, law.d, dom, seed);
    QuadrupleSample s = sample_quadruples(law, dom, n, seed, opt);
    if (s.items.empty()) throw NumericalError(NumericalError::Kind::Budget, "no resonant quadruple was sampled");
    check_kernel(W, s.items);
    const std::size_t m = s.items.size();
    std::vector<double> mass(m), x(m), sc(m);
    detail::scan(m, [&](std::size_t k) {
        const auto& q = s.items[k];
        double a = detail::positive(f, q.v), b = detail::positive(f, q.vs);
        double c = detail::positive(f, q.vp), e = detail::positive(f, q.vps);
        double br = 1.0 / a + 1.0 / b - 1.0 / c - 1.0 / e;
        double ab = 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / e;
        double pre = 0.25 * a * b * c * e;
        double w = W(q.v, q.vs, q.vp, q.vps);
        mass[k] = q.mass();
        x[k] = w * (pre * br * br);
        sc[k] = w * (pre * ab * ab);
    });
    return detail::finish(mass, x, sc, s.stats, tol_zero);
}

/// Weighted mean over resonant triples of W f f' f'' (1/f - 1/f' - 1/f'')^2, with v = v' + v''.
inline Dissipation entropy_dissipation_three(const Expr& f, const TriadKernel& W, const DispersionLaw& law,
                                             const SamplingDomain& dom, std::size_t n, std::uint64_t seed,
                                             std::optional<double> tol_zero = std::nullopt,
                                             const SamplerOptions& opt = {})
{
    check_positive(f, law.d, dom, seed);
    TripleSample s = sample_triples(law, dom, n, seed, opt);
    if (s.items.empty()) throw NumericalError(NumericalError::Kind::Budget, "no resonant triple was sampled");
    check_kernel(W, s.items);
    const std::size_t m = s.items.size();
    std::vector<double> mass(m), x(m), sc(m);
    detail::scan(m, [&](std::size_t k) {
        const auto& t = s.items[k];
        double a = detail::positive(f, t.v), b = detail::positive(f, t.vp), c = detail::positive(f, t.vpp);
        double br = 1.0 / a - 1.0 / b - 1.0 / c;
        double ab = 1.0 / a + 1.0 / b + 1.0 / c;
        double pre = a * b * c;
        double w = W(t.v, t.vp, t.vpp);
        mass[k] = t.mass();
        x[k] = w * (pre * br * br);
        sc[k] = w * (pre * ab * ab);
    });
    return detail::finish(mass, x, sc, s.stats, tol_zero);
}

/// (1/4) weighted mean of M(v) M(v*) [g(v*') + g(v') - g(v*) - g(v)]^2 W over resonant quadruples.
inline Dissipation linearized_form(const Expr& g, const DispersionLaw& law, const Expr& weight, const WaveKernel& W,
                                   const SamplingDomain& dom, std::size_t n, std::uint64_t seed,
                                   std::optional<double> tol_zero = std::nullopt)
{
    check_positive(weight, law.d, dom, seed);
    QuadrupleSample s = sample_quadruples(law, dom, n, seed);
    if (s.items.empty()) throw NumericalError(NumericalError::Kind::Budget, "no resonant quadruple was sampled");
    check_kernel(W, s.items);
    const std::size_t m = s.items.size();
    std::vector<double> mass(m), x(m), sc(m);
    detail::scan(m, [&](std::size_t k) {
        const auto& q = s.items[k];
        double ga = g.eval(q.v), gb = g.eval(q.vs), gc = g.eval(q.vp), ge = g.eval(q.vps);
        double br = gc + ge - ga - gb;
        double ab = std::abs(ga) + std::abs(gb) + std::abs(gc) + std::abs(ge);
        double pre = 0.25 * detail::positive(weight, q.v) * detail::positive(weight, q.vs);
        double w = W(q.v, q.vs, q.vp, q.vps);
        mass[k] = q.mass();
        x[k] = w * (pre * br * br);
        sc[k] = w * (pre * ab * ab);
    });
    return detail::finish(mass, x, sc, s.stats, tol_zero);
}

namespace detail {

inline void check_point(const Vec& v, int d, const SamplingDomain& dom)
{
    if (v.size() != d) throw ConfigError("evaluation point has wrong dimension");
    double r = v.norm();
    if (r < dom.r_min || r > dom.r_max) throw ConfigError("evaluation point must lie in the sampling annulus");
}

inline void check_budget(std::size_t failures, std::size_t n)
{
    if (failures * 10 > n)
        throw NumericalError(NumericalError::Kind::Budget,
                             "more than 10% of chart solves failed (" + std::to_string(failures) + " of " +
                                 std::to_string(n) + ")");
}

} // namespace detail

/// Q_W(f)(v): v* uniform on the annulus, one sigma per v* in that pair's chart ball.
inline Estimate qw_apply(const Expr& f, const WaveKernel& W, const DispersionLaw& law, const Vec& v,
                         const SamplingDomain& dom, std::size_t n, std::uint64_t seed, const ChartOptions& copt = {})
{
    dom.validate();
    detail::check_point(v, law.d, dom);
    if (n < 2) throw ConfigError("qw: need at least 2 samples");
    check_positive(f, law.d, dom, seed);
    const int d = law.d;
    const double annulus = dom.volume(d);
    const double fv = detail::positive(f, v);
    std::vector<double> val(n, 0.0);
    std::vector<unsigned char> state(n, 0); // 1 no chart, 2 solve failed
    const std::size_t chunk = 256, nchunks = (n + chunk - 1) / chunk;
    parallel_for(nchunks, [&](std::size_t c) {
        Stream rng(seed, c);
        for (std::size_t k = c * chunk; k < std::min(n, (c + 1) * chunk); ++k) {
            Vec vs = rng.annulus(d, dom.r_min, dom.r_max);
            std::optional<Chart> chart;
            try {
                chart.emplace(Chart::four_wave(law, v, vs, copt));
            } catch (const NumericalError&) {
                state[k] = 1;
                continue;
            }
            Vec sigma = rng.ball(d - 1, chart->trust_radius());
            ChartPoint pt;
            double weight;
            try {
                pt = chart->solve(sigma);
                weight = chart->coarea_weight(pt);
            } catch (const NumericalError&) {
                state[k] = 2;
                continue;
            } catch (const EvalError&) {
                state[k] = 2;
                continue;
            }
            Vec vp = v - pt.psi, vps = vs + pt.psi;
            double a = fv, b = detail::positive(f, vs), cc = detail::positive(f, vp), e = detail::positive(f, vps);
            double br = cc * e * (a + b) - a * b * (cc + e);
            double w = detail::nonnegative_kernel(W(v, vs, vp, vps));
            val[k] = annulus * chart->chart_volume() * weight * w * br;
        }
    });
    Estimate est;
    est.n = n;
    for (auto s : state) {
        est.rejected += s == 1;
        est.failures += s == 2;
    }
    detail::check_budget(est.failures, n);
    std::tie(est.value, est.stderr_) = detail::plain_mean(val);
    return est;
}

/// Three-wave operator at v: T1 - 2 T2, where T1 integrates R(v, v', v'') over the
/// decay chart at v and T2 integrates R(v', v, v'') over the three-wave chart at v
/// (the R(v'', v, v') term equals T2 after relabelling). `swap` exchanges the
/// last two kernel arguments throughout.
inline Estimate q3_apply(const Expr& f, const TriadKernel& W, const DispersionLaw& law, const Vec& v,
                         const SamplingDomain& dom, std::size_t n, std::uint64_t seed, bool swap = false,
                         const ChartOptions& copt = {})
{
    dom.validate();
    detail::check_point(v, law.d, dom);
    if (n < 2) throw ConfigError("q3: need at least 2 samples");
    check_positive(f, law.d, dom, seed);
    const int d = law.d;
    const Chart t1 = Chart::decay(law, v, copt);
    const Chart t2 = Chart::three_wave(law, v, copt);
    const double fv = detail::positive(f, v);
    auto kernel = [&](const Vec& a, const Vec& b, const Vec& c) { return detail::nonnegative_kernel(swap ? W(a, c, b) : W(a, b, c)); };

    std::vector<double> r1(n, 0.0), r2(n, 0.0);
    std::vector<unsigned char> failed(2 * n, 0);
    const std::size_t chunk = 256, nchunks = (n + chunk - 1) / chunk;
    parallel_for(nchunks, [&](std::size_t c) {
        Stream g1(seed, 2 * c), g2(seed, 2 * c + 1);
        for (std::size_t k = c * chunk; k < std::min(n, (c + 1) * chunk); ++k) {
            try {
                ChartPoint pt = t1.solve(g1.ball(d - 1, t1.trust_radius()));
                Vec vp = pt.psi, vpp = v - pt.psi;
                double a = detail::positive(f, vp), b = detail::positive(f, vpp);
                r1[k] = t1.chart_volume() * t1.coarea_weight(pt) * kernel(v, vp, vpp) * (a * b - fv * (a + b));
            } catch (const NumericalError& e) {
                if (e.kind() == NumericalError::Kind::Positivity) throw;
                failed[2 * k] = 1;
            }
            try {
                ChartPoint pt = t2.solve(g2.ball(d - 1, t2.trust_radius()));
                Vec vpp = pt.psi, sum = v + pt.psi;
                double a = detail::positive(f, sum), b = detail::positive(f, vpp);
                r2[k] = t2.chart_volume() * t2.coarea_weight(pt) * kernel(sum, v, vpp) * (fv * b - a * (fv + b));
            } catch (const NumericalError& e) {
                if (e.kind() == NumericalError::Kind::Positivity) throw;
                failed[2 * k + 1] = 1;
            }
        }
    });
    Estimate est;
    est.n = n;
    for (auto x : failed) est.failures += x;
    detail::check_budget(est.failures, 2 * n);
    auto [m1, s1] = detail::plain_mean(r1);
    auto [m2, s2] = detail::plain_mean(r2);
    est.value = m1 - 2.0 * m2;
    est.stderr_ = std::sqrt(s1 * s1 + 4.0 * s2 * s2);
    return est;
}

} // namespace reslab
