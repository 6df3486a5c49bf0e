#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "reslab/dispersion.hpp"

using namespace reslab;

namespace {

Vec vec2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

// Cyclic Jacobi eigenvalues of a symmetric 3x3 matrix (test oracle).
std::array<double, 3> jacobi_eigenvalues(std::array<std::array<double, 3>, 3> a)
{
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if (off < 1e-300) break;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) continue;
                double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < 3; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::array<double, 3> ev = {a[0][0], a[1][1], a[2][2]};
    std::sort(ev.begin(), ev.end());
    return ev;
}

// Independent Gram oracle: midpoint rule on a fine Cartesian grid clipped to the
// annulus, gradients by central differences of plain evaluations.
double oracle_margin(const DispersionLaw& law, int i, int j, double rmin, double rmax, int n)
{
    double h = 2 * rmax / n, hd = 1e-6;
    double s[3][3] = {};
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            Vec v = vec2(-rmax + (a + 0.5) * h, -rmax + (b + 0.5) * h);
            double r = v.norm();
            if (r < rmin || r > rmax) continue;
            auto partial = [&](int k) {
                Vec p = v, m = v;
                p[k] += hd;
                m[k] -= hd;
                return (law.omega.eval(p) - law.omega.eval(m)) / (2 * hd);
            };
            double f[3] = {1.0, partial(i), partial(j)};
            for (int x = 0; x < 3; ++x)
                for (int y = 0; y < 3; ++y) s[x][y] += f[x] * f[y];
        }
    std::array<std::array<double, 3>, 3> g{};
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y) {
            double nx = s[x][x] > 0 ? std::sqrt(s[x][x]) : 0, ny = s[y][y] > 0 ? std::sqrt(s[y][y]) : 0;
            g[x][y] = nx > 0 && ny > 0 ? s[x][y] / (nx * ny) : 0.0;
        }
    return jacobi_eigenvalues(g)[0];
}

} // namespace

TEST(Laws, BuiltinClosedForms)
{
    Stream rng(1, 0);
    DispersionLaw q = quadratic_law(2), rel = relativistic_law(3), pw = power_law(2, 1.5, 0.5);
    DispersionLaw gr = gravity_law(2, 2.0), ro = rossby_law(2);
    DispersionLaw sh = sheared_law(2, 0.5, -2.0, "exp(v1)");
    for (int k = 0; k < 50; ++k) {
        Vec v = rng.annulus(2, 0.5, 2.0);
        double r = v.norm();
        EXPECT_NEAR(q.value(v), r * r, 1e-14);
        EXPECT_NEAR(pw.value(v), 1.5 * std::sqrt(r), 1e-14);
        EXPECT_NEAR(gr.value(v), 2.0 * std::sqrt(r), 1e-14);
        EXPECT_NEAR(ro.value(v), v[0] / (1 + r * r), 1e-15);
        EXPECT_NEAR(sh.value(v), 0.5 * std::exp(v[0]) - 2.0 * v[1], 1e-14);
        Vec gpw = pw.jet(v).gradient;
        for (int c = 0; c < 2; ++c) EXPECT_NEAR(gpw[c], 1.5 * 0.5 * std::pow(r, -1.5) * v[c], 1e-13);
        Vec v3 = rng.annulus(3, 0.5, 2.0);
        Jet2 j = rel.jet(v3);
        double s = std::sqrt(1 + v3.squaredNorm());
        EXPECT_NEAR(j.value, s, 1e-15);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(j.gradient[c], v3[c] / s, 1e-15);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                EXPECT_NEAR(j.hessian(a, b), ((a == b ? 1.0 : 0.0) - v3[a] * v3[b] / (s * s)) / s, 1e-14);
    }
}

TEST(Laws, OmegaJetExamples)
{
    Jet2 j = omega_jet(quadratic_law(2), vec2(1, 2));
    EXPECT_EQ(j.value, 5.0);
    EXPECT_EQ(j.gradient[0], 2.0);
    EXPECT_EQ(j.gradient[1], 4.0);
    EXPECT_EQ(j.hessian, 2.0 * Mat::Identity(2, 2));

    Jet2 r = omega_jet(relativistic_law(3), Vec::Zero(3));
    EXPECT_EQ(r.value, 1.0);
    EXPECT_EQ(r.gradient.norm(), 0.0);
    EXPECT_NEAR((r.hessian - Mat::Identity(3, 3)).norm(), 0.0, 1e-15);

    EXPECT_THROW(omega_jet(power_law(2, 1.0, 0.5), Vec::Zero(2)), EvalError);
}

TEST(Laws, ParseLawSpecs)
{
    EXPECT_EQ(parse_law("quadratic", 3).d, 3);
    EXPECT_FALSE(parse_law("relativistic", 2).origin_excluded);
    DispersionLaw p = parse_law("power:C=2,alpha=0.25", 2);
    EXPECT_TRUE(p.origin_excluded);
    EXPECT_NEAR(p.value(vec2(16, 0)), 4.0, 1e-14);
    EXPECT_NEAR(parse_law("gravity:C=3", 2).value(vec2(0, 4)), 6.0, 1e-14);
    EXPECT_EQ(parse_law("rossby", 2).value(vec2(1, 0)), 0.5);
    DispersionLaw s = parse_law("sheared:alpha=2,beta=3,h=atan2(v1, 1)", 2);
    EXPECT_NEAR(s.value(vec2(1, 1)), 2 * std::atan2(1.0, 1.0) + 3, 1e-15);
    DispersionLaw e = parse_law("expr:atan2(v2,v1)+norm(v),singular_origin", 2);
    EXPECT_TRUE(e.origin_excluded);
    EXPECT_FALSE(parse_law("expr:v1", 2).origin_excluded);
    EXPECT_EQ(parse_law(" power ", 2).value(vec2(4, 0)), 2.0);

    EXPECT_THROW(parse_law("cubic", 2), ConfigError);
    EXPECT_THROW(parse_law("power:C=1,beta=2", 2), ConfigError);
    EXPECT_THROW(parse_law("power:C=abc", 2), ConfigError);
    EXPECT_THROW(parse_law("power:alpha=1.5", 2), ConfigError);
    EXPECT_THROW(parse_law("rossby", 3), ConfigError);
    EXPECT_THROW(parse_law("gravity", 3), ConfigError);
    EXPECT_THROW(parse_law("quadratic", 1), ConfigError);
    EXPECT_THROW(parse_law("quadratic", 4), ConfigError);
    EXPECT_THROW(parse_law("sheared:alpha=1", 2), ConfigError);
    EXPECT_THROW(parse_law("sheared:h=v2", 2), ConfigError);
    EXPECT_THROW(parse_law("expr:v1 +", 2), ConfigError);
    EXPECT_THROW(parse_law("quadratic:C=1", 2), ConfigError);
}

TEST(Domain, Validation)
{
    EXPECT_THROW((SamplingDomain{0.0, 1.0}.validate()), ConfigError);
    EXPECT_THROW((SamplingDomain{2.0, 1.0}.validate()), ConfigError);
    EXPECT_NO_THROW((SamplingDomain{0.5, 2.0}.validate()));
    EXPECT_NEAR((SamplingDomain{0.5, 2.0}.volume(2)), std::numbers::pi * (4 - 0.25), 1e-14);
}

TEST(Quadrature, AnnulusMomentsExact)
{
    for (int d : {2, 3}) {
        AnnulusRule q = AnnulusRule::with_size(d, 0.5, 2.0, 2000);
        double vol = 0, m2 = 0, m1 = 0, m4 = 0;
        for (std::size_t k = 0; k < q.size(); ++k) {
            vol += q.weights[k];
            m2 += q.weights[k] * q.nodes[k].squaredNorm();
            m1 += q.weights[k] * q.nodes[k][0];
            m4 += q.weights[k] * std::pow(q.nodes[k][0], 4);
        }
        double vol_exact = d == 2 ? std::numbers::pi * (4 - 0.25) : 4.0 / 3 * std::numbers::pi * (8 - 0.125);
        double m2_exact = d == 2 ? 2 * std::numbers::pi * (std::pow(2, 4) - std::pow(0.5, 4)) / 4
                                 : 4 * std::numbers::pi * (std::pow(2, 5) - std::pow(0.5, 5)) / 5;
        // <x^4> over the sphere is 3/8 (d=2, ring average) or 1/5 (d=3) of r^4
        double m4_exact = d == 2 ? 3.0 / 8 * 2 * std::numbers::pi * (std::pow(2, 6) - std::pow(0.5, 6)) / 6
                                 : 1.0 / 5 * 4 * std::numbers::pi * (std::pow(2, 7) - std::pow(0.5, 7)) / 7;
        EXPECT_NEAR(vol, vol_exact, 1e-12 * vol_exact);
        EXPECT_NEAR(m2, m2_exact, 1e-12 * m2_exact);
        EXPECT_NEAR(m4, m4_exact, 1e-12 * m4_exact);
        EXPECT_NEAR(m1, 0.0, 1e-12);
    }
}

TEST(Independence, QuadraticIsWellSeparated)
{
    SamplingDomain dom{0.5, 2.0};
    DispersionLaw q = quadratic_law(2);
    double m = independence_margin(q, 0, 1, dom, 4096);
    EXPECT_GT(m, 0.1);
    // {1, 2v1, 2v2} are orthogonal on the annulus, so the normalized Gram is the identity
    EXPECT_NEAR(m, 1.0, 1e-12);
    EXPECT_NEAR(oracle_margin(q, 0, 1, 0.5, 2.0, 600), m, 1e-3);
}

TEST(Independence, OracleAgreementOnCurvedLaws)
{
    SamplingDomain dom{0.5, 2.0};
    for (const char* spec : {"relativistic", "rossby", "gravity:C=1", "power:C=1,alpha=0.5"}) {
        DispersionLaw law = parse_law(spec, 2);
        double m = independence_margin(law, 0, 1, dom, 20000);
        EXPECT_GT(m, kLambdaThreshold) << spec;
        EXPECT_NEAR(oracle_margin(law, 0, 1, 0.5, 2.0, 800), m, 5e-3 * std::max(1.0, m)) << spec;
    }
}

TEST(Independence, DependentGradients)
{
    SamplingDomain dom{0.5, 2.0};
    EXPECT_LE(std::abs(independence_margin(parse_law("expr:v1", 2), 0, 1, dom, 1000)), 1e-10);
    EXPECT_LE(std::abs(independence_margin(sheared_law(2, 1.0, 1.0, "v1^3"), 0, 1, dom, 1000)), 1e-10);
    EXPECT_LE(std::abs(independence_margin(sheared_law(2, 1.0, 1.0, "exp(v1)"), 0, 1, dom, 1000)), 1e-10);
}

TEST(Independence, ScaleInvarianceAndPsd)
{
    SamplingDomain dom{0.5, 2.0};
    for (const char* text : {"sqrt(1+dot(v,v))", "v1/(1+dot(v,v))", "exp(v1)+v2^2"}) {
        DispersionLaw a = make_law(2, text, false, "a");
        DispersionLaw b = make_law(2, std::string("37.5*(") + text + ")", false, "b");
        IndependenceResult ra = independence_gram(a, 0, 1, dom, 2000);
        EXPECT_NEAR(ra.lambda_min, independence_margin(b, 0, 1, dom, 2000), 1e-10);
        EXPECT_GE(ra.lambda_min, -1e-12);
        EXPECT_EQ(ra.gram, ra.gram.transpose());
    }
}

TEST(Independence, ThresholdSeparatesAcrossAnnuli)
{
    for (auto [a, b] : {std::pair{0.5, 1.0}, std::pair{0.1, 5.0}, std::pair{1.0, 3.0}}) {
        SamplingDomain dom{a, b};
        EXPECT_GT(independence_margin(quadratic_law(2), 0, 1, dom, 500), kLambdaThreshold);
        EXPECT_LT(independence_margin(parse_law("expr:v1", 2), 0, 1, dom, 500), kLambdaThreshold);
    }
}

TEST(Independence, ArgumentChecks)
{
    SamplingDomain dom;
    EXPECT_THROW(independence_margin(quadratic_law(2), 0, 0, dom, 500), ConfigError);
    EXPECT_THROW(independence_margin(quadratic_law(2), 0, 1, dom, 50), ConfigError);
    EXPECT_THROW(independence_margin(quadratic_law(2), 0, 2, dom, 500), ConfigError);
}

TEST(ThreeWave, HypothesisChecks)
{
    SamplingDomain dom;
    ThreeWaveHypotheses q = check_three_wave_hypotheses(quadratic_law(2), dom);
    EXPECT_TRUE(q.all_hold());
    ThreeWaveHypotheses r = check_three_wave_hypotheses(rossby_law(2), dom);
    EXPECT_TRUE(r.omega_zero_at_origin);
    EXPECT_FALSE(*r.gradient_zero_at_origin);
    EXPECT_FALSE(r.positive_off_origin);
    ThreeWaveHypotheses p = check_three_wave_hypotheses(power_law(2, 1, 0.5), dom);
    EXPECT_TRUE(p.omega_zero_at_origin);
    EXPECT_FALSE(p.gradient_zero_at_origin.has_value());
    EXPECT_TRUE(p.positive_off_origin);
    ThreeWaveHypotheses rel = check_three_wave_hypotheses(relativistic_law(2), dom);
    EXPECT_FALSE(rel.omega_zero_at_origin);
}

TEST(Random, StreamsAreDeterministicAndInRange)
{
    Stream a(42, 3), b(42, 3), c(42, 4);
    bool differs = false;
    for (int k = 0; k < 1000; ++k) {
        Vec x = a.annulus(3, 0.5, 2.0), y = b.annulus(3, 0.5, 2.0), z = c.annulus(3, 0.5, 2.0);
        EXPECT_EQ(x, y);
        differs = differs || (x != z);
        EXPECT_GE(x.norm(), 0.5 - 1e-15);
        EXPECT_LE(x.norm(), 2.0 + 1e-15);
        Vec s = a.ball(2, 0.3);
        b.ball(2, 0.3);
        c.ball(2, 0.3);
        EXPECT_LE(s.norm(), 0.3);
    }
    EXPECT_TRUE(differs);
}
