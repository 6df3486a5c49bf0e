#pragma once

// Local charts of the resonant sets and samplers built on them.
//
// Every chart solves a scalar equation F(z) = 0 in one pivot coordinate of
// z in R^d, the other d-1 coordinates being the chart parameters sigma:
//   four-wave   F(z) = w(v) + w(v*) - w(v - z) - w(v* + z)   (v' = v - z, v*' = v* + z)
//   three-wave  F(z) = w(v + z) - w(v) - w(z)                  (triple v, z -> v + z)
//   decay       F(z) = w(v) - w(z) - w(v - z)                  (v -> z, v - z)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "reslab/dispersion.hpp"
#include "reslab/error.hpp"
#include "reslab/parallel.hpp"
#include "reslab/random.hpp"

#include <Eigen/Eigenvalues>

namespace reslab {

namespace detail {

inline double spectral_norm(const Mat& h)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace detail

struct ChartOptions {
    double newton_tol = 1e-12; ///< relative to max(1, energy scale of the base point)
    int max_iter = 50;
    double grad_gap_rel = 1e-6;
    double trust_factor = 0.25;
    double trust_cap = 0.5;
};

enum class ChartKind { FourWave, ThreeWave, Decay };

struct ChartPoint {
    Vec psi;            ///< solved z
    Vec grad;           ///< gradient of F in z at psi
    double residual = 0.0;
    int iterations = 0;
    bool tangential = false; ///< root where the pivot derivative vanishes (double root)
};

class Chart {
public:
    static Chart four_wave(const DispersionLaw& law, const Vec& v, const Vec& vs, const ChartOptions& opt = {})
    {
        Chart c(ChartKind::FourWave, law, v, vs, opt);
        Jet2 ja = law.jet(v), jb = law.jet(vs);
        c.gap_ = ja.gradient - jb.gradient;
        c.energy_scale_ = std::abs(ja.value) + std::abs(jb.value);
        c.base_energy_ = ja.value + jb.value;
        c.hess_ = std::max(ja.hessian.norm(), jb.hessian.norm());
        c.gap_min_ = opt.grad_gap_rel * std::max({ja.gradient.norm(), jb.gradient.norm(), 1.0});
        c.finish(std::nullopt);
        return c;
    }

    /// Three-wave chart at v; `pivot` forces the pivot coordinate.
    static Chart three_wave(const DispersionLaw& law, const Vec& v, const ChartOptions& opt = {},
                            std::optional<int> pivot = std::nullopt)
    {
        return origin_chart(ChartKind::ThreeWave, law, v, opt, pivot);
    }

    static Chart decay(const DispersionLaw& law, const Vec& v, const ChartOptions& opt = {})
    {
        return origin_chart(ChartKind::Decay, law, v, opt, std::nullopt);
    }

    /// Four-wave chart with a prescribed pivot (used to stay on one chart while X moves).
    static Chart four_wave_pivot(const DispersionLaw& law, const Vec& v, const Vec& vs, int pivot,
                                 const ChartOptions& opt = {})
    {
        Chart c(ChartKind::FourWave, law, v, vs, opt);
        Grad1 ga = law.grad(v), gb = law.grad(vs);
        c.gap_ = ga.gradient - gb.gradient;
        c.energy_scale_ = std::abs(ga.value) + std::abs(gb.value);
        c.base_energy_ = ga.value + gb.value;
        c.hess_ = 0.0;
        c.gap_min_ = opt.grad_gap_rel * std::max({ga.gradient.norm(), gb.gradient.norm(), 1.0});
        c.finish(pivot);
        return c;
    }

    ChartKind kind() const { return kind_; }
    int dim() const { return law_->d; }
    int pivot() const { return pivot_; }
    const Vec& gap() const { return gap_; }
    double gap_min() const { return gap_min_; }
    double trust_radius() const { return radius_; }
    double tolerance() const { return tol_; }
    const Vec& base_a() const { return a_; }
    const Vec& base_b() const { return b_; }
    const DispersionLaw& law() const { return *law_; }

    /// Volume of the sigma ball the samplers draw from.
    double chart_volume() const { return ball_volume(dim() - 1, radius_); }

    /// Free (non-pivot) coordinate k of z, in increasing index order.
    int free_index(int k) const { return k < pivot_ ? k : k + 1; }

    ChartPoint solve(const Vec& sigma) const
    {
        const int d = dim();
        if (sigma.size() != d - 1) throw ConfigError("sigma must have d-1 components");
        ChartPoint pt;
        if (sigma.isZero(0.0)) {
            pt.psi = Vec::Zero(d);
            pt.grad = gap_;
            return pt;
        }
        Vec z(d);
        double pred = 0.0;
        for (int k = 0; k < d - 1; ++k) {
            z[free_index(k)] = sigma[k];
            pred -= gap_[free_index(k)] * sigma[k];
        }
        z[pivot_] = pred / gap_[pivot_];
        return newton(z);
    }

    /// Columns span the tangent space at sigma = 0 (implicit differentiation).
    Mat tangent_basis() const { return dsigma(gap_); }

    /// D_sigma psi at a solved point.
    Mat dsigma_psi(const ChartPoint& pt) const { return dsigma(pt.grad); }

    /// Co-area factor sqrt(det(J^T J)) / |grad F| of the delta constraint at a solved point.
    double coarea_weight(const ChartPoint& pt) const
    {
        if (std::abs(pt.grad[pivot_]) < gap_min_) return 1.0 / gap_min_; // capped at tangential roots
        Mat J = dsigma_psi(pt);
        Mat JtJ = J.transpose() * J;
        return std::sqrt(JtJ.determinant()) / pt.grad.norm();
    }

    double value(const Vec& z) const { return eval(z, false).value; }

private:
    ChartKind kind_;
    const DispersionLaw* law_;
    Vec a_, b_;
    ChartOptions opt_;
    Vec gap_;
    int pivot_ = 0;
    double gap_min_ = 0.0;
    double hess_ = 0.0;
    double energy_scale_ = 0.0;
    double base_energy_ = 0.0; ///< w(a) + w(b) for four-wave charts, w(a) otherwise
    double radius_ = 0.0;
    double tol_ = 0.0;

    Chart(ChartKind kind, const DispersionLaw& law, const Vec& a, const Vec& b, const ChartOptions& opt)
        : kind_(kind), law_(&law), a_(a), b_(b), opt_(opt)
    {
        if (a.size() != law.d || b.size() != law.d) throw ConfigError("chart base point has wrong dimension");
    }

    static Chart origin_chart(ChartKind kind, const DispersionLaw& law, const Vec& v, const ChartOptions& opt,
                              std::optional<int> pivot)
    {
        if (v.norm() < kOriginGuard) throw NumericalError(NumericalError::Kind::LeftDomain, "three-wave chart needs v != 0");
        Vec zero = Vec::Zero(law.d);
        double w0 = 0.0;
        try {
            w0 = law.omega.eval(zero);
        } catch (const EvalError&) {
            w0 = std::nan("");
        }
        if (!(std::abs(w0) <= 1e-12))
            throw NumericalError(NumericalError::Kind::Hypothesis, "three-wave charts need w(0) = 0 (law '" + law.label + "')");
        Chart c(kind, law, v, zero, opt);
        Jet2 jv = law.jet(v);
        Vec g0 = Vec::Zero(law.d);
        double h0 = 0.0;
        if (!law.origin_excluded) {
            try {
                Jet2 j0 = law.omega.eval_jet(zero);
                g0 = j0.gradient;
                h0 = detail::spectral_norm(j0.hessian);
            } catch (const EvalError&) {
                // a kink at the origin acts as a critical point
            }
        }
        c.gap_ = jv.gradient - g0;
        c.energy_scale_ = 2.0 * std::abs(jv.value);
        c.base_energy_ = jv.value;
        c.hess_ = std::max(detail::spectral_norm(jv.hessian), h0);
        c.gap_min_ = opt.grad_gap_rel * std::max({jv.gradient.norm(), g0.norm(), 1.0});
        c.finish(pivot);
        return c;
    }

    void finish(std::optional<int> forced)
    {
        const int d = law_->d;
        if (forced) {
            if (*forced < 0 || *forced >= d) throw ConfigError("pivot out of range");
            pivot_ = *forced;
        } else {
            pivot_ = 0;
            for (int k = 1; k < d; ++k)
                if (std::abs(gap_[k]) > std::abs(gap_[pivot_])) pivot_ = k;
        }
        if (gap_.norm() < gap_min_ || std::abs(gap_[pivot_]) < gap_min_ / std::sqrt(static_cast<double>(d)))
            throw NumericalError(NumericalError::Kind::NotInA, "gradient gap below grad_gap_min: base point is not in A");
        // the extra 1/d keeps ||D_X Psi|| <= 1/2 for gamma_sigma; origin charts have no gamma
        const double spread = kind_ == ChartKind::FourWave ? d : 1.0;
        radius_ = hess_ > 0.0 ? std::min(opt_.trust_cap, opt_.trust_factor * std::abs(gap_[pivot_]) / (spread * hess_))
                              : opt_.trust_cap;
        tol_ = opt_.newton_tol * std::max(1.0, energy_scale_);
    }

    struct Eval {
        double value = 0.0;
        Vec grad;
        double curv = 0.0; ///< second derivative along the pivot, only when requested
    };

    Eval eval(const Vec& z, bool want_grad, bool want_curv = false) const
    {
        const DispersionLaw& w = *law_;
        Eval e;
        auto term = [&](const Vec& x, double sign, double gsign) {
            if (want_curv) {
                Jet2 j = w.jet(x);
                e.value += sign * j.value;
                e.grad += gsign * j.gradient;
                e.curv += sign * j.hessian(pivot_, pivot_);
            } else if (want_grad) {
                Grad1 g = w.grad(x);
                e.value += sign * g.value;
                e.grad += gsign * g.gradient;
            } else {
                e.value += sign * w.value(x);
            }
        };
        e.grad = Vec::Zero(w.d);
        switch (kind_) {
        case ChartKind::FourWave: {
            // evaluation order fixed so the residual equals the recomputed energy residual
            Vec x1 = a_ - z, x2 = b_ + z;
            e.value = base_energy_;
            term(x1, -1.0, 1.0);
            term(x2, -1.0, -1.0);
            break;
        }
        case ChartKind::ThreeWave: {
            Vec s = a_ + z;
            term(s, 1.0, 1.0);
            e.value -= base_energy_;
            term(z, -1.0, -1.0);
            break;
        }
        case ChartKind::Decay: {
            Vec r = a_ - z;
            e.value = base_energy_;
            term(z, -1.0, -1.0);
            term(r, -1.0, 1.0);
            break;
        }
        }
        return e;
    }

    Mat dsigma(const Vec& g) const
    {
        const int d = dim();
        Mat J = Mat::Zero(d, d - 1);
        for (int k = 0; k < d - 1; ++k) {
            int m = free_index(k);
            J(m, k) = 1.0;
            J(pivot_, k) = -g[m] / g[pivot_];
        }
        return J;
    }

    [[noreturn]] void fail(NumericalError::Kind k, const std::string& what) const
    {
        throw NumericalError(k, "chart (" + law_->label + "): " + what);
    }

    Eval safe_eval(const Vec& z, bool curv = false) const
    {
        try {
            return eval(z, true, curv);
        } catch (const EvalError& e) {
            fail(NumericalError::Kind::LeftDomain, std::string("iterate left the domain: ") + e.what());
        }
    }

    /// Newton on F along the pivot coordinate, with step halving.
    ChartPoint newton(Vec z) const
    {
        const int i = pivot_;
        Eval e = safe_eval(z);
        for (int it = 0; it < opt_.max_iter; ++it) {
            double gi = e.grad[i];
            if (std::abs(gi) < gap_min_) return tangential_root(z, it);
            if (std::abs(e.value) <= tol_) {
                // a small pivot derivative at an apparent root hints at a double root
                if (std::abs(gi) < 0.25 * std::abs(gap_[i])) {
                    if (auto t = try_tangential(z, it)) return *t;
                }
                polish(z, e);
                return {z, e.grad, e.value, it, false};
            }
            double step = -e.value / gi;
            bool moved = false;
            for (int half = 0; half < 40; ++half, step *= 0.5) {
                Vec zt = z;
                zt[i] += step;
                Eval et;
                try {
                    et = eval(zt, true);
                } catch (const EvalError&) {
                    continue;
                }
                if (std::abs(et.value) < std::abs(e.value)) {
                    z = zt;
                    e = et;
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                if (std::abs(e.value) <= tol_) return {z, e.grad, e.value, it, false};
                fail(NumericalError::Kind::NewtonDivergence, "line search made no progress");
            }
        }
        if (std::abs(e.value) <= tol_ && std::abs(e.grad[i]) >= gap_min_) return {z, e.grad, e.value, opt_.max_iter, false};
        fail(NumericalError::Kind::NewtonDivergence, "Newton did not converge within max_iter");
    }

    /// One extra Newton step once inside the tolerance, kept only if it helps.
    void polish(Vec& z, Eval& e) const
    {
        if (e.value == 0.0) return;
        Vec zt = z;
        zt[pivot_] -= e.value / e.grad[pivot_];
        try {
            Eval et = eval(zt, true);
            if (std::abs(et.value) < std::abs(e.value)) {
                z = zt;
                e = et;
            }
        } catch (const EvalError&) {
        }
    }

    /// Newton on dF/dz_i = 0, for roots where F touches zero tangentially.
    std::optional<ChartPoint> try_tangential(Vec z, int it0) const
    {
        const int i = pivot_;
        Eval e;
        try {
            e = eval(z, true, true);
        } catch (const EvalError&) {
            return std::nullopt;
        }
        double gscale = std::max(1.0, gap_.norm());
        for (int it = 0; it < opt_.max_iter; ++it) {
            if (std::abs(e.grad[i]) <= 1e-15 * gscale) break;
            if (!(std::abs(e.curv) > 0.0)) return std::nullopt;
            double step = -e.grad[i] / e.curv;
            bool moved = false;
            for (int half = 0; half < 40; ++half, step *= 0.5) {
                Vec zt = z;
                zt[i] += step;
                Eval et;
                try {
                    et = eval(zt, true, true);
                } catch (const EvalError&) {
                    continue;
                }
                if (std::abs(et.grad[i]) < std::abs(e.grad[i])) {
                    z = zt;
                    e = et;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        if (std::abs(e.value) <= tol_) return ChartPoint{z, e.grad, e.value, it0, true};
        return std::nullopt;
    }

    ChartPoint tangential_root(const Vec& z, int it) const
    {
        if (auto t = try_tangential(z, it)) return *t;
        fail(NumericalError::Kind::PivotDegenerate, "pivot derivative fell below grad_gap_min");
    }
};

// ---------------------------------------------------------------------------
// Convenience entry points

inline Vec solve_psi_four(const DispersionLaw& law, const Vec& v, const Vec& vs, const Vec& sigma,
                          const ChartOptions& opt = {})
{
    return Chart::four_wave(law, v, vs, opt).solve(sigma).psi;
}

inline Mat chart_tangent_basis(const DispersionLaw& law, const Vec& v, const Vec& vs, const ChartOptions& opt = {})
{
    return Chart::four_wave(law, v, vs, opt).tangent_basis();
}

inline Vec solve_psi_three(const DispersionLaw& law, const Vec& v, const Vec& sigma, const ChartOptions& opt = {})
{
    return Chart::three_wave(law, v, opt).solve(sigma).psi;
}

struct GammaResult {
    Vec v, vs;            ///< X' = X + Psi(X, sigma)
    double jacobian_det = 1.0;
    double dxpsi_norm = 0.0; ///< operator 2-norm of D_X Psi
    int pivot = 0;
};

namespace detail {

// D_X Psi = u w^T with u = (-e_i, e_i); returns w.
inline Eigen::VectorXd gamma_w(const DispersionLaw& law, const Vec& v, const Vec& vs, const ChartPoint& pt, int i)
{
    const int d = law.d;
    Vec gv = law.grad(v).gradient, gs = law.grad(vs).gradient;
    Vec g1 = law.grad(Vec(v - pt.psi)).gradient, g2 = law.grad(Vec(vs + pt.psi)).gradient;
    Eigen::VectorXd w(2 * d);
    for (int k = 0; k < d; ++k) {
        w[k] = -(gv[k] - g1[k]) / pt.grad[i];
        w[d + k] = -(gs[k] - g2[k]) / pt.grad[i];
    }
    return w;
}

} // namespace detail

/// gamma_sigma(X) = X + Psi(X, sigma) with its Jacobian determinant.
inline GammaResult gamma_sigma(const DispersionLaw& law, const Vec& v, const Vec& vs, const Vec& sigma,
                               std::optional<int> pivot = std::nullopt, const ChartOptions& opt = {})
{
    Chart c = pivot ? Chart::four_wave_pivot(law, v, vs, *pivot, opt) : Chart::four_wave(law, v, vs, opt);
    GammaResult r;
    r.pivot = c.pivot();
    if (sigma.isZero(0.0)) {
        r.v = v;
        r.vs = vs;
        return r;
    }
    ChartPoint pt = c.solve(sigma);
    r.v = v - pt.psi;
    r.vs = vs + pt.psi;
    const int d = law.d, i = c.pivot();
    Eigen::VectorXd w = detail::gamma_w(law, v, vs, pt, i);
    r.jacobian_det = 1.0 - w[i] + w[d + i];
    r.dxpsi_norm = std::sqrt(2.0) * w.norm();
    return r;
}

/// Solves gamma_sigma(X) = X' for X on the chart with the given pivot (Newton, Sherman–Morrison).
inline std::pair<Vec, Vec> gamma_sigma_inverse(const DispersionLaw& law, const Vec& vp, const Vec& vsp,
                                               const Vec& sigma, int pivot, const ChartOptions& opt = {})
{
    const int d = law.d;
    Vec v = vp, vs = vsp;
    double scale = 1.0 + vp.norm() + vsp.norm();
    for (int it = 0; it < opt.max_iter; ++it) {
        Chart c = Chart::four_wave_pivot(law, v, vs, pivot, opt);
        ChartPoint pt = c.solve(sigma);
        Eigen::VectorXd r(2 * d);
        r << (v - pt.psi - vp), (vs + pt.psi - vsp);
        if (r.norm() <= 1e-15 * scale) return {v, vs};
        Eigen::VectorXd w = detail::gamma_w(law, v, vs, pt, pivot);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * d);
        u[pivot] = -1.0;
        u[d + pivot] = 1.0;
        Eigen::VectorXd step = r - u * (w.dot(r) / (1.0 + w.dot(u)));
        v -= step.head(d);
        vs -= step.tail(d);
        if (step.norm() <= 1e-16 * scale) return {v, vs};
    }
    throw NumericalError(NumericalError::Kind::NewtonDivergence, "gamma_sigma inverse did not converge");
}

// ---------------------------------------------------------------------------
// Samplers

struct ResonantQuadruple {
    Vec v, vs, vp, vps;
    double weight = 0.0;          ///< co-area factor
    double chart_volume = 0.0;    ///< volume of the sigma ball the point was drawn from
    double energy_residual = 0.0;
    bool trivial = false;         ///< v' ~ v or v' ~ v*, or an affine (curvature-free) exchange

    /// Importance weight of the sample for integrals over the resonant set.
    double mass() const { return weight * chart_volume; }
};

struct ResonantTriple {
    Vec vp, vpp, v; ///< v = v' + v''
    double weight = 0.0;
    double chart_volume = 0.0;
    double energy_residual = 0.0;
    bool tangential = false;

    double mass() const { return weight * chart_volume; }
};

struct SampleStats {
    std::size_t requested = 0;
    std::size_t accepted = 0;
    std::size_t attempts = 0;
    std::size_t gap_rejections = 0;
    std::size_t chart_failures = 0;
    std::size_t trivial = 0;
    std::size_t strictly_trivial = 0;
    std::size_t tangential = 0;
    double max_energy_residual = 0.0;
    double max_momentum_residual = 0.0;

    double rejection_rate() const
    {
        return attempts ? 1.0 - static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
    }
    double trivial_fraction() const { return accepted ? static_cast<double>(trivial) / accepted : 0.0; }
    bool near_total_rejection() const { return rejection_rate() > 0.99; }
    bool shortfall() const { return accepted < requested; }

    void merge(const SampleStats& o)
    {
        requested += o.requested;
        accepted += o.accepted;
        attempts += o.attempts;
        gap_rejections += o.gap_rejections;
        chart_failures += o.chart_failures;
        trivial += o.trivial;
        strictly_trivial += o.strictly_trivial;
        tangential += o.tangential;
        max_energy_residual = std::max(max_energy_residual, o.max_energy_residual);
        max_momentum_residual = std::max(max_momentum_residual, o.max_momentum_residual);
    }
};

struct QuadrupleSample {
    std::vector<ResonantQuadruple> items;
    SampleStats stats;
};

struct TripleSample {
    std::vector<ResonantTriple> items;
    SampleStats stats;
};

struct SamplerOptions {
    ChartOptions chart;
    std::size_t chunk = 256;
    double attempt_factor = 100.0; ///< attempts allowed per requested sample
};

namespace detail {

/// w(x + z) - w(x) - grad w(x).z is zero at the endpoint and midpoint of the segment.
inline bool affine_along(const DispersionLaw& law, const Vec& x, const Vec& z)
{
    Grad1 g = law.grad(x);
    double scale = std::abs(g.value) + std::abs(g.gradient.dot(z)) + 1e-300;
    for (double t : {0.5, 1.0}) {
        Vec y = x + t * z;
        double dev = law.value(y) - g.value - t * g.gradient.dot(z);
        if (std::abs(dev) > 1e-9 * scale) return false;
    }
    // small displacements hide curvature in the check above
    double zz = z.squaredNorm();
    if (zz == 0.0) return true;
    for (const Vec& y : {x, Vec(x + z)}) {
        Jet2 j = law.jet(y);
        double hn = j.hessian.norm();
        if (std::abs(z.dot(j.hessian * z)) > 1e-9 * hn * zz) return false;
    }
    return true;
}

inline bool close(const Vec& a, const Vec& b) { return (a - b).norm() <= 1e-9 * (1.0 + a.norm() + b.norm()); }

} // namespace detail

/// Classifies a quadruple as trivial: v' = v, v' = v*, or energy exchanged only
/// through directions in which w is affine at both points.
inline std::pair<bool, bool> classify_quadruple(const DispersionLaw& law, const ResonantQuadruple& q)
{
    bool strict = detail::close(q.vp, q.v) || detail::close(q.vp, q.vs);
    if (strict) return {true, true};
    bool affine = detail::affine_along(law, q.v, Vec(q.vp - q.v)) && detail::affine_along(law, q.vs, Vec(q.vps - q.vs));
    return {affine, false};
}

inline QuadrupleSample sample_quadruples(const DispersionLaw& law, const SamplingDomain& dom, std::size_t n,
                                         std::uint64_t seed, const SamplerOptions& opt = {})
{
    dom.validate();
    if (n < 1) throw ConfigError("sample size must be at least 1");
    const int d = law.d;
    const std::size_t nchunks = (n + opt.chunk - 1) / opt.chunk;
    std::vector<QuadrupleSample> parts(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        QuadrupleSample& part = parts[c];
        const std::size_t quota = std::min(opt.chunk, n - c * opt.chunk);
        const auto budget = static_cast<std::size_t>(opt.attempt_factor * static_cast<double>(quota));
        part.stats.requested = quota;
        Stream rng(seed, c);
        while (part.items.size() < quota && part.stats.attempts < budget) {
            ++part.stats.attempts;
            Vec v = rng.annulus(d, dom.r_min, dom.r_max);
            Vec vs = rng.annulus(d, dom.r_min, dom.r_max);
            std::optional<Chart> chart;
            try {
                chart.emplace(Chart::four_wave(law, v, vs, opt.chart));
            } catch (const NumericalError&) {
                ++part.stats.gap_rejections;
                continue;
            }
            Vec sigma = rng.ball(d - 1, chart->trust_radius());
            ResonantQuadruple q;
            ChartPoint pt;
            try {
                pt = chart->solve(sigma);
                q.weight = chart->coarea_weight(pt);
            } catch (const Error&) {
                ++part.stats.chart_failures;
                continue;
            }
            q.v = v;
            q.vs = vs;
            q.vp = v - pt.psi;
            q.vps = vs + pt.psi;
            q.chart_volume = chart->chart_volume();
            q.energy_residual = std::abs(law.value(v) + law.value(vs) - law.value(q.vp) - law.value(q.vps));
            auto [triv, strict] = classify_quadruple(law, q);
            q.trivial = triv;
            part.stats.trivial += triv;
            part.stats.strictly_trivial += strict;
            part.stats.tangential += pt.tangential;
            part.stats.max_energy_residual = std::max(part.stats.max_energy_residual, q.energy_residual);
            part.stats.max_momentum_residual =
                std::max(part.stats.max_momentum_residual, ((q.vp + q.vps) - (q.v + q.vs)).norm());
            part.items.push_back(std::move(q));
            ++part.stats.accepted;
        }
    });
    QuadrupleSample out;
    for (auto& p : parts) {
        out.stats.merge(p.stats);
        for (auto& q : p.items) out.items.push_back(std::move(q));
    }
    return out;
}

inline TripleSample sample_triples(const DispersionLaw& law, const SamplingDomain& dom, std::size_t n,
                                   std::uint64_t seed, const SamplerOptions& opt = {})
{
    dom.validate();
    if (n < 1) throw ConfigError("sample size must be at least 1");
    // only w(0) = 0 is required to build the chart; other hypotheses are reported by the caller
    Chart::three_wave(law, Vec::Unit(law.d, 0) * dom.r_max, opt.chart);
    const int d = law.d;
    const std::size_t nchunks = (n + opt.chunk - 1) / opt.chunk;
    std::vector<TripleSample> parts(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        TripleSample& part = parts[c];
        const std::size_t quota = std::min(opt.chunk, n - c * opt.chunk);
        const auto budget = static_cast<std::size_t>(opt.attempt_factor * static_cast<double>(quota));
        part.stats.requested = quota;
        Stream rng(seed, c);
        while (part.items.size() < quota && part.stats.attempts < budget) {
            ++part.stats.attempts;
            Vec v = rng.annulus(d, dom.r_min, dom.r_max);
            std::optional<Chart> chart;
            try {
                chart.emplace(Chart::three_wave(law, v, opt.chart));
            } catch (const NumericalError&) {
                ++part.stats.gap_rejections;
                continue;
            }
            Vec sigma = rng.ball(d - 1, chart->trust_radius());
            ResonantTriple t;
            ChartPoint pt;
            try {
                pt = chart->solve(sigma);
                t.weight = chart->coarea_weight(pt);
            } catch (const Error&) {
                ++part.stats.chart_failures;
                continue;
            }
            t.vp = v;
            t.vpp = pt.psi;
            t.v = v + pt.psi;
            t.chart_volume = chart->chart_volume();
            t.tangential = pt.tangential;
            t.energy_residual = std::abs(law.value(t.v) - law.value(t.vp) - law.value(t.vpp));
            part.stats.tangential += pt.tangential;
            part.stats.max_energy_residual = std::max(part.stats.max_energy_residual, t.energy_residual);
            part.stats.max_momentum_residual = std::max(part.stats.max_momentum_residual, (t.v - (t.vp + t.vpp)).norm());
            part.items.push_back(std::move(t));
            ++part.stats.accepted;
        }
    });
    TripleSample out;
    for (auto& p : parts) {
        out.stats.merge(p.stats);
        for (auto& t : p.items) out.items.push_back(std::move(t));
    }
    return out;
}

} // namespace reslab
