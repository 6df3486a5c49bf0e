#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reslab/dispersion.hpp"
#include "reslab/error.hpp"
#include "reslab/expr.hpp"
#include "reslab/parallel.hpp"
#include "reslab/quadrature.hpp"
#include "reslab/random.hpp"
#include "reslab/resonance.hpp"

namespace reslab {

/// Guard in residual normalizations so the zero function stays well defined.
inline constexpr double kEps0 = 1e-30;

/// Residual bands: at or below kPassTol is a pass, at or above kFailTol a fail.
inline constexpr double kPassTol = 1e-8;
inline constexpr double kFailTol = 1e-2;

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "inconclusive";
    }
}

inline Verdict classify_residual(double rms, double pass_tol = kPassTol, double fail_tol = kFailTol)
{
    if (rms <= pass_tol) return Verdict::Pass;
    if (rms >= fail_tol) return Verdict::Fail;
    return Verdict::Inconclusive;
}

struct Residual {
    double rms = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

namespace detail {

inline constexpr std::size_t kScanChunk = 256;

template <class F>
void scan(std::size_t n, F&& per_item)
{
    parallel_for((n + kScanChunk - 1) / kScanChunk, [&](std::size_t c) {
        for (std::size_t k = c * kScanChunk; k < std::min(n, (c + 1) * kScanChunk); ++k) per_item(k);
    });
}

inline double sum(const std::vector<double>& x) { return pairwise_sum(x); }

/// Weighted RMS of delta over weighted RMS of norm; max is the largest |delta| on the same scale.
inline Residual normalized_residual(const std::vector<double>& mass, const std::vector<double>& delta,
                                    const std::vector<double>& norm)
{
    const std::size_t n = delta.size();
    std::vector<double> num(n), den(n);
    double big = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        num[k] = mass[k] * delta[k] * delta[k];
        den[k] = mass[k] * norm[k] * norm[k];
        big = std::max(big, std::abs(delta[k]));
    }
    double m = sum(mass);
    double scale = std::sqrt(sum(den) / m);
    Residual r;
    r.count = n;
    r.rms = std::sqrt(sum(num) / m) / scale;
    r.max = big / scale;
    return r;
}

inline double median(std::vector<double> x)
{
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Smallest singular value over largest, after scaling columns to unit norm.
inline double conditioning(const Eigen::MatrixXd& a)
{
    Eigen::VectorXd s(a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) s[c] = a.col(c).norm() > 0.0 ? 1.0 / a.col(c).norm() : 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(a * s.asDiagonal())};
    const auto& sv = svd.singularValues();
    return sv[0] > 0.0 ? sv[sv.size() - 1] / sv[0] : 0.0;
}

} // namespace detail

/// Per-quadruple defect g(v) + g(v*) - g(v') - g(v*').
inline std::vector<double> four_wave_defects(const Expr& g, std::span<const ResonantQuadruple> quads)
{
    std::vector<double> out(quads.size());
    detail::scan(quads.size(), [&](std::size_t k) {
        const auto& q = quads[k];
        out[k] = g.eval(q.v) + g.eval(q.vs) - g.eval(q.vp) - g.eval(q.vps);
    });
    return out;
}

inline Residual four_wave_residual(const Expr& g, std::span<const ResonantQuadruple> quads)
{
    if (quads.empty()) throw ConfigError("four-wave residual needs a nonempty sample");
    const std::size_t n = quads.size();
    std::vector<double> mass(n), delta(n), norm(n);
    detail::scan(n, [&](std::size_t k) {
        const auto& q = quads[k];
        double a = g.eval(q.v), b = g.eval(q.vs), c = g.eval(q.vp), e = g.eval(q.vps);
        mass[k] = q.mass();
        delta[k] = a + b - c - e;
        norm[k] = std::abs(a) + std::abs(b) + std::abs(c) + std::abs(e) + kEps0;
    });
    return detail::normalized_residual(mass, delta, norm);
}

/// Per-triple defect g(v') + g(v'') - g(v' + v'').
inline std::vector<double> three_wave_defects(const Expr& g, std::span<const ResonantTriple> triples)
{
    std::vector<double> out(triples.size());
    detail::scan(triples.size(), [&](std::size_t k) {
        const auto& t = triples[k];
        out[k] = g.eval(t.vp) + g.eval(t.vpp) - g.eval(t.v);
    });
    return out;
}

inline Residual three_wave_residual(const Expr& g, std::span<const ResonantTriple> triples)
{
    if (triples.empty()) throw ConfigError("three-wave residual needs a nonempty sample");
    const std::size_t n = triples.size();
    std::vector<double> mass(n), delta(n), norm(n);
    detail::scan(n, [&](std::size_t k) {
        const auto& t = triples[k];
        double a = g.eval(t.vp), b = g.eval(t.vpp), c = g.eval(t.v);
        mass[k] = t.mass();
        delta[k] = a + b - c;
        norm[k] = std::abs(a) + std::abs(b) + std::abs(c) + kEps0;
    });
    return detail::normalized_residual(mass, delta, norm);
}

struct PointPair {
    Vec v, vs;
};

/// Pairs drawn uniformly from the annulus. With `grad_gap_rel` > 0 a pair is kept
/// only if |grad w(v) - grad w(v*)| >= grad_gap_rel * max(|grad w(v)|, |grad w(v*)|, 1).
inline std::vector<PointPair> sample_pairs(const DispersionLaw& law, const SamplingDomain& dom, std::size_t n,
                                           std::uint64_t seed, double grad_gap_rel = 0.0)
{
    dom.validate();
    if (n < 1) throw ConfigError("sample size must be at least 1");
    const std::size_t nchunks = (n + detail::kScanChunk - 1) / detail::kScanChunk;
    std::vector<std::vector<PointPair>> parts(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        const std::size_t quota = std::min(detail::kScanChunk, n - c * detail::kScanChunk);
        Stream rng(seed, c);
        for (std::size_t attempt = 0; parts[c].size() < quota && attempt < 100 * quota; ++attempt) {
            PointPair p{rng.annulus(law.d, dom.r_min, dom.r_max), rng.annulus(law.d, dom.r_min, dom.r_max)};
            if (grad_gap_rel > 0.0) {
                Vec ga = law.grad(p.v).gradient, gb = law.grad(p.vs).gradient;
                if ((ga - gb).norm() < grad_gap_rel * std::max({ga.norm(), gb.norm(), 1.0})) continue;
            }
            parts[c].push_back(std::move(p));
        }
    });
    std::vector<PointPair> out;
    for (auto& p : parts)
        for (auto& x : p) out.push_back(std::move(x));
    if (out.empty()) throw NumericalError(NumericalError::Kind::Budget, "no pair with a gradient gap was found");
    return out;
}

/// Strong-form tangency check (grad w(v) - grad w(v*)) x (grad g(v) - grad g(v*)) = 0.
inline Residual cross_product_residual(const Expr& g, const DispersionLaw& law, std::span<const PointPair> pairs)
{
    if (pairs.empty()) throw ConfigError("cross-product residual needs pairs");
    const std::size_t n = pairs.size();
    std::vector<double> sq(n), val(n);
    detail::scan(n, [&](std::size_t k) {
        Vec dw = law.grad(pairs[k].v).gradient - law.grad(pairs[k].vs).gradient;
        Vec dg = g.eval_grad(pairs[k].v).gradient - g.eval_grad(pairs[k].vs).gradient;
        double cross;
        if (law.d == 2) {
            cross = std::abs(dw[0] * dg[1] - dw[1] * dg[0]);
        } else {
            Eigen::Vector3d a(dw[0], dw[1], dw[2]), b(dg[0], dg[1], dg[2]);
            cross = a.cross(b).norm();
        }
        val[k] = cross / (dw.norm() * (dg.norm() + kEps0));
        sq[k] = val[k] * val[k];
    });
    Residual r;
    r.count = n;
    r.rms = std::sqrt(detail::sum(sq) / static_cast<double>(n));
    r.max = *std::max_element(val.begin(), val.end());
    return r;
}

struct FitResult {
    double a = 0.0;
    Vec b;
    double c = 0.0;
    double value_residual_rms = 0.0;
    double grad_residual_rms = 0.0;
    Vec grad_b; ///< b from the gradient-space fit
    double grad_c = 0.0;
    std::size_t n = 0;
};

/// Least squares of g ~ a + b.v + c w (values) and grad g ~ b + c grad w (gradients).
inline FitResult fit_equilibrium(const Expr& g, const DispersionLaw& law, std::span<const Vec> samples)
{
    const int d = law.d;
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n < d + 2) throw ConfigError("fit needs at least d + 2 samples");

    Eigen::MatrixXd A(n, d + 2), G(n * d, d + 1);
    Eigen::VectorXd y(n), yg(n * d);
    detail::scan(samples.size(), [&](std::size_t kk) {
        const auto k = static_cast<Eigen::Index>(kk);
        const Vec& v = samples[kk];
        Grad1 w = law.grad(v);
        Grad1 gv = g.eval_grad(v);
        A(k, 0) = 1.0;
        for (int m = 0; m < d; ++m) A(k, 1 + m) = v[m];
        A(k, d + 1) = w.value;
        y[k] = gv.value;
        for (int m = 0; m < d; ++m) {
            const Eigen::Index r = k * d + m;
            G.row(r).setZero();
            G(r, m) = 1.0;
            G(r, d) = w.gradient[m];
            yg[r] = gv.gradient[m];
        }
    });
    if (detail::conditioning(A) < 1e-10)
        throw NumericalError(NumericalError::Kind::RankDeficient,
                             "fit: 1, v and w are linearly dependent on the samples (w affine there)");
    if (detail::conditioning(G) < 1e-10)
        throw NumericalError(NumericalError::Kind::RankDeficient, "fit: grad w is constant on the samples");

    Eigen::VectorXd x = A.colPivHouseholderQr().solve(y);
    Eigen::VectorXd xg = G.colPivHouseholderQr().solve(yg);
    FitResult f;
    f.n = samples.size();
    f.a = x[0];
    f.b = x.segment(1, d);
    f.c = x[d + 1];
    f.grad_b = xg.head(d);
    f.grad_c = xg[d];
    const double rn = std::sqrt(static_cast<double>(n));
    f.value_residual_rms = ((A * x - y).norm() / rn) / (y.norm() / rn + kEps0);
    f.grad_residual_rms = ((G * xg - yg).norm() / rn) / (yg.norm() / rn + kEps0);
    return f;
}

/// sigma_min / sqrt(n) of the rows [dp^2, dp dq, dq^2] (each normalized), with
/// dp, dq the differences of d_i w and d_j w across a pair. Null rows are dropped.
inline double quadratic_null_margin(const DispersionLaw& law, int i, int j, std::span<const PointPair> pairs)
{
    if (i == j || i < 0 || j < 0 || i >= law.d || j >= law.d) throw ConfigError("null margin: need distinct indices in range");
    const std::size_t n = pairs.size();
    std::vector<std::array<double, 3>> rows(n);
    std::vector<double> mag(n);
    detail::scan(n, [&](std::size_t k) {
        Vec dw = law.grad(pairs[k].v).gradient - law.grad(pairs[k].vs).gradient;
        double p = dw[i], q = dw[j];
        rows[k] = {p * p, p * q, q * q};
        mag[k] = std::sqrt(p * p * p * p + p * p * q * q + q * q * q * q);
    });
    double top = n ? *std::max_element(mag.begin(), mag.end()) : 0.0;
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < n; ++k)
        if (mag[k] > 1e-14 * std::max(top, 1.0)) keep.push_back(static_cast<Eigen::Index>(k));
    if (keep.empty())
        throw NumericalError(NumericalError::Kind::RankDeficient, "null margin: every pair has equal gradients");
    Eigen::MatrixXd D(static_cast<Eigen::Index>(keep.size()), 3);
    for (Eigen::Index r = 0; r < D.rows(); ++r) {
        const auto k = static_cast<std::size_t>(keep[r]);
        for (int c = 0; c < 3; ++c) D(r, c) = rows[k][c] / mag[k];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D);
    return svd.singularValues()[2] / std::sqrt(static_cast<double>(D.rows()));
}

struct GramSystem {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    double lambda_min = 0.0;          ///< smallest eigenvalue of M after unit-diagonal scaling
    std::array<double, 6> c{};        ///< c4 .. c9
    bool has_coefficients = false;
    double alpha_fit_residual = 0.0;  ///< relative residual of the least squares across the alpha family
    /// Mismatch between the solved u and u integrated directly from g and grad alpha.
    /// The identities behind M u = v hold only for invariants, so this is the
    /// defect that sees non-invariance which the c-relations miss by symmetry.
    double weak_form_residual = 0.0;
    std::size_t n_alpha = 0;

    double c4() const { return c[0]; }
    double c5() const { return c[1]; }
    double c6() const { return c[2]; }
    double c7() const { return c[3]; }
    double c8() const { return c[4]; }
    double c9() const { return c[5]; }
    double defect_c6() const { return std::abs(c[2]); }
    double defect_c8() const { return std::abs(c[4]); }
    double defect_c5_c9() const { return std::abs(c[1] - c[5]); }
    double max_defect() const { return std::max({defect_c6(), defect_c8(), defect_c5_c9()}); }
};

/// Radial weight (1 - s^2)^4 with s mapping [r_min, r_max] onto [-1, 1]. It
/// vanishes to third order on both rims, so boundary terms drop out.
inline std::string default_beta(const SamplingDomain& dom)
{
    using detail::fmt;
    return "(1-((2*norm(v)-" + fmt(dom.r_min + dom.r_max) + ")/" + fmt(dom.r_max - dom.r_min) + ")^2)^4";
}

/// Six bumps at mid radius, each times 1 and every coordinate.
inline std::vector<std::string> default_alpha_family(int d, const SamplingDomain& dom)
{
    using detail::fmt;
    const double rc = 0.5 * (dom.r_min + dom.r_max);
    const double rho = 0.45 * (dom.r_max - dom.r_min);
    std::vector<Vec> centers;
    if (d == 2) {
        for (int k = 0; k < 6; ++k) {
            double t = k * std::numbers::pi / 3.0;
            centers.push_back((Vec(2) << rc * std::cos(t), rc * std::sin(t)).finished());
        }
    } else {
        // two rings away from the poles, where the polar grid is singular
        for (int ring = 0; ring < 2; ++ring) {
            double th = (ring ? 2.0 : 1.0) * std::numbers::pi / 3.0;
            for (int k = 0; k < 3; ++k) {
                double ph = (2.0 * k + ring) * std::numbers::pi / 3.0;
                centers.push_back((Vec(3) << rc * std::sin(th) * std::cos(ph), rc * std::sin(th) * std::sin(ph),
                                   rc * std::cos(th))
                                      .finished());
            }
        }
    }
    std::vector<std::string> out;
    for (const Vec& c : centers) {
        std::string r2;
        for (int k = 0; k < d; ++k) {
            if (k) r2 += "+";
            r2 += "(v" + std::to_string(k + 1) + "-(" + fmt(c[k]) + "))^2";
        }
        std::string bump = "bump((" + r2 + ")/" + fmt(rho * rho) + ")";
        out.push_back(bump);
        for (int k = 0; k < d; ++k) out.push_back(bump + "*v" + std::to_string(k + 1));
    }
    return out;
}

namespace detail {

inline void check_indices(const DispersionLaw& law, int i, int j)
{
    if (i == j || i < 0 || j < 0 || i >= law.d || j >= law.d) throw ConfigError("gram: need distinct indices in range");
}

inline double scaled_lambda_min(const Eigen::Matrix3d& M)
{
    Eigen::Vector3d s;
    for (int a = 0; a < 3; ++a) s[a] = M(a, a) > 0.0 ? 1.0 / std::sqrt(M(a, a)) : 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.asDiagonal() * M * s.asDiagonal(), Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

/// Sums the columns of per-node terms in a fixed order.
template <std::size_t K>
std::array<double, K> column_sums(const std::vector<std::array<double, K>>& terms)
{
    std::array<double, K> s{};
    std::vector<double> col(terms.size());
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t k = 0; k < terms.size(); ++k) col[k] = terms[k][c];
        s[c] = pairwise_sum(col);
    }
    return s;
}

inline Eigen::Matrix3d gram_from(const std::array<double, 6>& s)
{
    Eigen::Matrix3d M;
    M << s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5];
    return M;
}

} // namespace detail

/// Gram matrix of {1, d_i w, d_j w} against the weight beta (i, j zero-based).
inline GramSystem assemble_gram(const DispersionLaw& law, const Expr& beta, int i, int j, const SamplingDomain& dom,
                                int n_quad = 20000)
{
    detail::check_indices(law, i, j);
    dom.validate();
    AnnulusRule q = AnnulusRule::with_size(law.d, dom.r_min, dom.r_max, n_quad);
    std::vector<std::array<double, 6>> terms(q.size());
    detail::scan(q.size(), [&](std::size_t k) {
        double b = beta.eval(q.nodes[k]);
        if (b < 0.0) throw ConfigError("gram: weight beta is negative on the annulus");
        Vec g = law.grad(q.nodes[k]).gradient;
        double w = q.weights[k] * b, p = g[i], r = g[j];
        terms[k] = {w, w * p, w * r, w * p * p, w * p * r, w * r * r};
    });
    GramSystem s;
    s.M = detail::gram_from(detail::column_sums(terms));
    s.lambda_min = detail::scaled_lambda_min(s.M);
    if (!std::isfinite(s.lambda_min)) throw NumericalError(NumericalError::Kind::SingularMatrix, "gram: non-finite entries");
    return s;
}

/// Solves the weak-form system M u = v for every test function alpha and extracts
/// c4..c9 of d_i g = c4 + c5 d_i w + c6 d_j w, d_j g = c7 + c8 d_i w + c9 d_j w.
/// All integrals share one quadrature grid.
inline GramSystem cramer_coefficients(const Expr& g, const DispersionLaw& law, const Expr& beta,
                                      std::span<const Expr> alphas, int i, int j, const SamplingDomain& dom,
                                      int n_quad = 0)
{
    if (n_quad <= 0) n_quad = law.d == 2 ? 50000 : 150000;
    detail::check_indices(law, i, j);
    dom.validate();
    if (alphas.size() < 6) throw ConfigError("cramer: the alpha family needs at least 6 test functions");
    AnnulusRule q = AnnulusRule::with_size(law.d, dom.r_min, dom.r_max, n_quad);
    const std::size_t n = q.size();

    // Rows k of M and R use gamma_k in {beta, beta d_i w, beta d_j w}.
    std::vector<std::array<double, 18>> terms(n);
    std::vector<std::array<double, 3>> basis(n); // w_k * {1, d_i w, d_j w}
    std::vector<double> beta_abs(n), g_val(n);
    std::vector<Mat> om_grad(n);
    detail::scan(n, [&](std::size_t k) {
        const Vec& x = q.nodes[k];
        Jet2 om = law.jet(x);
        Grad1 be = beta.eval_grad(x);
        if (be.value < 0.0) throw ConfigError("cramer: weight beta is negative on the annulus");
        beta_abs[k] = std::abs(be.value);
        double gv = g.eval(x);
        g_val[k] = gv;
        om_grad[k] = om.gradient;
        const double w = q.weights[k], p = om.gradient[i], r = om.gradient[j];
        std::array<double, 3> gam = {be.value, be.value * p, be.value * r};
        std::array<Vec, 3> dgam = {be.gradient, Vec(be.gradient * p + be.value * om.hessian.col(i)),
                                   Vec(be.gradient * r + be.value * om.hessian.col(j))};
        auto& t = terms[k];
        for (int row = 0; row < 3; ++row) {
            t[3 * row + 0] = w * gam[row];
            t[3 * row + 1] = w * gam[row] * p;
            t[3 * row + 2] = w * gam[row] * r;
            const double di = dgam[row][i], dj = dgam[row][j];
            t[9 + 3 * row + 0] = w * gv * (di * r - dj * p);
            t[9 + 3 * row + 1] = w * gv * dj;
            t[9 + 3 * row + 2] = -w * gv * di;
        }
        basis[k] = {w, w * p, w * r};
    });
    auto s = detail::column_sums(terms);

    // beta and its gradient must vanish on both rims for the integrations by parts
    {
        const double top = *std::max_element(beta_abs.begin(), beta_abs.end());
        Stream rng(0x7269u, 0);
        for (int k = 0; k < 64; ++k) {
            Vec u = rng.direction(law.d);
            for (double rad : {dom.r_min, dom.r_max}) {
                Grad1 be = beta.eval_grad(Vec(rad * u));
                if (std::abs(be.value) + std::abs(be.gradient.norm()) * (dom.r_max - dom.r_min) > 1e-8 * top)
                    throw ConfigError("cramer: weight beta must vanish with its gradient on the annulus rims");
            }
        }
    }

    GramSystem out;
    Eigen::Matrix3d R;
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) {
            out.M(row, col) = s[3 * row + col];
            R(row, col) = s[9 + 3 * row + col];
        }
    out.M = 0.5 * (out.M + out.M.transpose());
    out.lambda_min = detail::scaled_lambda_min(out.M);
    if (!(out.lambda_min > kLambdaThreshold))
        throw NumericalError(NumericalError::Kind::SingularMatrix,
                             "cramer: Gram matrix is singular (lambda_min " + detail::fmt(out.lambda_min) + ")");
    // M u + R a = 0 with a = (int alpha, int alpha d_i w, int alpha d_j w)
    Eigen::Matrix3d C = out.M.fullPivLu().solve(R);

    const auto na = static_cast<Eigen::Index>(alphas.size());
    Eigen::MatrixXd Amat(na, 3);
    Eigen::VectorXd yi(na), yj(na);
    std::vector<double> col(n);
    double mismatch = 0.0, direct_norm = 0.0;
    for (Eigen::Index a = 0; a < na; ++a) {
        const Expr& alpha = alphas[static_cast<std::size_t>(a)];
        std::vector<std::array<double, 4>> av(n); // alpha, and the three integrands of u
        detail::scan(n, [&](std::size_t k) {
            Grad1 al = alpha.eval_grad(q.nodes[k]);
            const double gw = g_val[k] * q.weights[k];
            const double di = al.gradient[i], dj = al.gradient[j];
            av[k] = {al.value, gw * (di * om_grad[k](j, 0) - dj * om_grad[k](i, 0)), gw * dj, -gw * di};
        });
        for (int c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < n; ++k) col[k] = basis[k][c] * av[k][0];
            Amat(a, c) = pairwise_sum(col);
        }
        Eigen::Vector3d direct;
        for (int c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < n; ++k) col[k] = av[k][c + 1];
            direct[c] = pairwise_sum(col);
        }
        // u = (int g (d_i alpha d_j w - d_j alpha d_i w), int g d_j alpha, -int g d_i alpha)
        Eigen::Vector3d u = -C * Amat.row(a).transpose();
        mismatch += (u - direct).squaredNorm();
        direct_norm += direct.squaredNorm();
        yi[a] = u[2];
        yj[a] = -u[1];
    }
    out.weak_form_residual = std::sqrt(mismatch) / (std::sqrt(direct_norm) + kEps0);
    if (detail::conditioning(Amat) < 1e-10)
        throw NumericalError(NumericalError::Kind::RankDeficient, "cramer: the alpha family has rank below 6");
    auto qr = Amat.colPivHouseholderQr();
    Eigen::Vector3d ci = qr.solve(yi), cj = qr.solve(yj);
    out.c = {ci[0], ci[1], ci[2], cj[0], cj[1], cj[2]};
    out.has_coefficients = true;
    out.n_alpha = alphas.size();
    double ynorm = std::sqrt(yi.squaredNorm() + yj.squaredNorm());
    double rnorm = std::sqrt((Amat * ci - yi).squaredNorm() + (Amat * cj - yj).squaredNorm());
    out.alpha_fit_residual = rnorm / (ynorm + kEps0);
    return out;
}

struct LevelStats {
    double level = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double range() const { return max - min; }
    double spread() const { return range() / (1.0 + std::abs(median)); }
};

struct LevelSetReport {
    std::vector<LevelStats> levels;
    double max_spread = 0.0;
    Vec grad_at_origin;
};

namespace detail {

/// Newton projection along grad w onto {w = a}, with step halving.
inline std::optional<Vec> project_to_level(const DispersionLaw& law, Vec v, double a)
{
    const double tol = 1e-13 * std::max(1.0, std::abs(a));
    try {
        Grad1 w = law.grad(v);
        for (int it = 0; it < 100; ++it) {
            double f = w.value - a;
            if (std::abs(f) <= tol) return v;
            double gg = w.gradient.squaredNorm();
            if (!(gg > 0.0)) return std::nullopt;
            Vec step = (f / gg) * w.gradient;
            double t = 1.0;
            bool moved = false;
            for (int h = 0; h < 30; ++h, t *= 0.5) {
                Vec y = v - t * step;
                if (law.origin_excluded && y.norm() < kOriginGuard) continue;
                Grad1 wy = law.grad(y);
                if (std::abs(wy.value - a) < std::abs(f)) {
                    v = y;
                    w = wy;
                    moved = true;
                    break;
                }
            }
            if (!moved) return std::nullopt;
        }
    } catch (const EvalError&) {
    }
    return std::nullopt;
}

} // namespace detail

/// Spread of g(v) - grad g(0).v over points of each level set {w = a}.
/// `grad_at_origin` replaces the automatic derivative when g is singular at 0.
inline LevelSetReport level_set_constancy(const Expr& g, const DispersionLaw& law, std::span<const double> levels,
                                          int pts_per_level, std::uint64_t seed, const SamplingDomain& dom = {},
                                          std::optional<Vec> grad_at_origin = std::nullopt)
{
    dom.validate();
    if (levels.empty() || pts_per_level < 2) throw ConfigError("level sets: need levels and at least 2 points per level");
    LevelSetReport rep;
    if (grad_at_origin) {
        if (grad_at_origin->size() != law.d) throw ConfigError("level sets: grad_at_origin has wrong dimension");
        rep.grad_at_origin = *grad_at_origin;
    } else {
        try {
            rep.grad_at_origin = g.eval_grad(Vec(Vec::Zero(law.d))).gradient;
        } catch (const EvalError& e) {
            throw EvalError(EvalError::Kind::NonDifferentiable,
                            std::string("level sets: g is not differentiable at the origin: ") + e.what());
        }
    }
    rep.levels.resize(levels.size());
    parallel_for(levels.size(), [&](std::size_t l) {
        const double a = levels[l];
        Stream rng(seed, l);
        std::vector<double> vals;
        int attempts = 0;
        while (static_cast<int>(vals.size()) < pts_per_level) {
            if (++attempts > 50 * pts_per_level)
                throw NumericalError(NumericalError::Kind::NewtonDivergence,
                                     "level sets: cannot find points on w = " + detail::fmt(a));
            auto v = detail::project_to_level(law, rng.annulus(law.d, dom.r_min, dom.r_max), a);
            if (!v) continue;
            vals.push_back(g.eval(*v) - rep.grad_at_origin.dot(*v));
        }
        LevelStats& st = rep.levels[l];
        st.level = a;
        st.min = *std::min_element(vals.begin(), vals.end());
        st.max = *std::max_element(vals.begin(), vals.end());
        st.median = detail::median(vals);
    });
    for (const auto& st : rep.levels) rep.max_spread = std::max(rep.max_spread, st.spread());
    return rep;
}

struct MuProfile {
    std::vector<std::pair<double, double>> table; ///< (a, mu(a))
    double c_fit = 0.0;
    double linearity_residual = 0.0;
    std::optional<double> mu_at_zero; ///< g(0); empty when g cannot be evaluated there
    double max_spread = 0.0;
};

/// mu(a) = common value of g(v) - grad g(0).v on {w = a}, and the fit mu(a) ~ c a.
inline MuProfile mu_profile(const Expr& g, const DispersionLaw& law, std::span<const double> levels, int pts_per_level,
                            std::uint64_t seed, const SamplingDomain& dom = {}, double spread_tol = kPassTol,
                            std::optional<Vec> grad_at_origin = std::nullopt)
{
    LevelSetReport rep = level_set_constancy(g, law, levels, pts_per_level, seed, dom, grad_at_origin);
    if (rep.max_spread > spread_tol)
        throw NumericalError(NumericalError::Kind::Precondition,
                             "mu profile: g is not constant on level sets (spread " + detail::fmt(rep.max_spread) + ")");
    MuProfile m;
    m.max_spread = rep.max_spread;
    double saa = 0.0, sam = 0.0, smm = 0.0;
    for (const auto& st : rep.levels) {
        m.table.emplace_back(st.level, st.median);
        saa += st.level * st.level;
        sam += st.level * st.median;
        smm += st.median * st.median;
    }
    m.c_fit = sam / saa;
    double res = 0.0;
    for (const auto& [a, mu] : m.table) res += (mu - m.c_fit * a) * (mu - m.c_fit * a);
    m.linearity_residual = std::sqrt(res) / (std::sqrt(smm) + kEps0);
    try {
        m.mu_at_zero = g.eval(Vec(Vec::Zero(law.d)));
    } catch (const EvalError&) {
    }
    return m;
}

struct PairMargins {
    int i = 0, j = 0;
    double independence = 0.0;
    std::optional<double> null_margin; ///< empty when every pair has equal gradients
};

struct DegeneracyReport {
    std::vector<PairMargins> pairs;
    SampleStats sampler;
    std::string verdict;
};

inline constexpr double kNullMarginMin = 1e-3;

inline DegeneracyReport degeneracy_report(const DispersionLaw& law, const SamplingDomain& dom = {},
                                          std::size_t n_samples = 2000, std::uint64_t seed = 1, int n_quad = 4096)
{
    DegeneracyReport rep;
    std::vector<PointPair> pairs = sample_pairs(law, dom, 1000, seed);
    bool independent = false, null_ok = false;
    for (int i = 0; i < law.d; ++i)
        for (int j = i + 1; j < law.d; ++j) {
            PairMargins pm{i, j, independence_margin(law, i, j, dom, n_quad), std::nullopt};
            try {
                pm.null_margin = quadratic_null_margin(law, i, j, pairs);
            } catch (const NumericalError&) {
            }
            if (pm.independence > kLambdaThreshold) {
                independent = true;
                if (pm.null_margin && *pm.null_margin > kNullMarginMin) null_ok = true;
            }
            rep.pairs.push_back(pm);
        }
    rep.sampler = sample_quadruples(law, dom, n_samples, seed).stats;

    if (rep.sampler.accepted > 0 && rep.sampler.trivial_fraction() >= 0.99)
        rep.verdict = "degenerate:trivial-manifold";
    else if (!independent)
        rep.verdict = "degenerate:dependent-gradients";
    else if (null_ok && !rep.sampler.near_total_rejection())
        rep.verdict = "nondegenerate";
    else
        rep.verdict = "inconclusive";
    return rep;
}

} // namespace reslab
