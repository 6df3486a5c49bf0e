#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "reslab/expr.hpp"

using namespace reslab;

namespace {

Vec vec(std::initializer_list<double> xs)
{
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

Vec random_point(std::mt19937_64& rng, int d, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(d);
    for (int k = 0; k < d; ++k) v[k] = u(rng);
    return v;
}

// Smooth expressions exercised by the finite-difference suite; each is evaluated
// away from its singular set (origin) by sampling |v_k| in [0.3, 1.5].
const std::vector<std::pair<const char*, int>> kSmooth = {
    {"dot(v,v)", 2},
    {"sqrt(1+dot(v,v))", 3},
    {"norm(v)^0.5", 2},
    {"1.3*sqrt(norm(v))", 2},
    {"v1/(1+dot(v,v))", 2},
    {"exp(v1) + v2", 2},
    {"2*(v1^3) - 0.5*v2", 2},
    {"atan((v1*sqrt(3)+v2)/(v1^2+v2^2)) - arctan((-v1*sqrt(3)+v2)/(v1^2+v2^2))", 2},
    {"log(1+v1^2)*cos(v2) + sin(v1*v2)", 2},
    {"atan2(v2, v1) + abs(v1) * v3", 3},
    {"norm(v)^v1", 2},
    {"bump(dot(v,v)/4)", 2},
};

} // namespace

TEST(ExprParse, DotOfVWithItself)
{
    Expr e = parse("dot(v,v)", 2);
    EXPECT_EQ(e.eval(vec({1.0, 2.0})), 5.0);
    EXPECT_EQ(e.eval(vec({-3.0, 0.5})), 9.25);
}

TEST(ExprParse, RelativisticAtOrigin)
{
    EXPECT_EQ(parse("sqrt(1+dot(v,v))", 2).eval(vec({0.0, 0.0})), 1.0);
}

TEST(ExprParse, ComponentOutOfRange)
{
    try {
        parse("v3", 2);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseError::Kind::DimensionOutOfRange);
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(ExprParse, ErrorKindsAndOffsets)
{
    auto kind_of = [](const char* s) {
        try {
            parse(s, 2);
        } catch (const ParseError& e) {
            return std::make_pair(e.kind(), e.offset());
        }
        ADD_FAILURE() << "no error for " << s;
        return std::make_pair(ParseError::Kind::Syntax, std::size_t{0});
    };
    EXPECT_EQ(kind_of("1 + foo").first, ParseError::Kind::UnknownIdentifier);
    EXPECT_EQ(kind_of("1 + foo").second, 4u);
    EXPECT_EQ(kind_of("bar(v1)").first, ParseError::Kind::UnknownIdentifier);
    EXPECT_EQ(kind_of("atan2(v1)").first, ParseError::Kind::Arity);
    EXPECT_EQ(kind_of("dot(v)").first, ParseError::Kind::Arity);
    EXPECT_EQ(kind_of("sqrt(1, 2)").first, ParseError::Kind::Arity);
    EXPECT_EQ(kind_of("(v1 + 2").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("(v1 + 2").second, 7u);
    EXPECT_EQ(kind_of("2 v1").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("2 v1").second, 2u);
    EXPECT_EQ(kind_of("v + 1").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("dot(v1, v)").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("1..2").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("").first, ParseError::Kind::Syntax);
    EXPECT_EQ(kind_of("v0").first, ParseError::Kind::DimensionOutOfRange);
    EXPECT_EQ(kind_of("sqrt").first, ParseError::Kind::Syntax);
}

TEST(ExprParse, PrecedenceAndAssociativity)
{
    Vec p = vec({2.0, 3.0});
    EXPECT_EQ(parse("2^3^2", 2).eval(p), 512.0);
    EXPECT_EQ(parse("-v1^2", 2).eval(p), -4.0);
    EXPECT_EQ(parse("2^-1", 2).eval(p), 0.5);
    EXPECT_EQ(parse("1 - 2 - 3", 2).eval(p), -4.0);
    EXPECT_EQ(parse("12 / 3 / 2", 2).eval(p), 2.0);
    EXPECT_EQ(parse("1 + 2 * v2 ^ 2", 2).eval(p), 19.0);
    EXPECT_EQ(parse("+v1 * -v2", 2).eval(p), -6.0);
    EXPECT_NEAR(parse("pi", 2).eval(p), 3.141592653589793, 0.0);
    EXPECT_EQ(parse("1.5e1 + .5 + 2E-1", 2).eval(p), 15.7);
}

TEST(ExprEval, Examples)
{
    EXPECT_EQ(parse("dot(v,v)", 2).eval(vec({1.0, 2.0})), 5.0);
    EXPECT_EQ(parse("v1/(1+dot(v,v))", 2).eval(vec({1.0, 0.0})), 0.5);
    EXPECT_EQ(parse("norm(v)", 2).eval(vec({3.0, 4.0})), 5.0);
}

TEST(ExprEval, NonFiniteIsAnError)
{
    EXPECT_THROW(parse("log(v1)", 2).eval(vec({-1.0, 0.0})), EvalError);
    EXPECT_THROW(parse("1/v1", 2).eval(vec({0.0, 1.0})), EvalError);
    EXPECT_THROW(parse("sqrt(v1)", 2).eval(vec({-1.0, 0.0})), EvalError);
    EXPECT_THROW(parse("exp(v1)", 2).eval(vec({1000.0, 0.0})), EvalError);
    try {
        parse("log(v1)", 2).eval(vec({0.0, 0.0}));
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalError::Kind::NonFinite);
    }
}

TEST(ExprEval, WrongCoordinateCount)
{
    EXPECT_THROW(parse("v1", 2).eval(vec({1.0})), EvalError);
}

TEST(ExprJet, QuadraticClosedForm)
{
    Jet2 j = parse("dot(v,v)", 2).eval_jet(vec({1.0, 2.0}));
    EXPECT_EQ(j.value, 5.0);
    EXPECT_EQ(j.gradient[0], 2.0);
    EXPECT_EQ(j.gradient[1], 4.0);
    EXPECT_EQ(j.hessian(0, 0), 2.0);
    EXPECT_EQ(j.hessian(1, 1), 2.0);
    EXPECT_EQ(j.hessian(0, 1), 0.0);
    EXPECT_EQ(j.hessian(1, 0), 0.0);
}

TEST(ExprJet, RelativisticCriticalPoint)
{
    Jet2 j = parse("sqrt(1+dot(v,v))", 3).eval_jet(vec({0.0, 0.0, 0.0}));
    EXPECT_EQ(j.value, 1.0);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(j.gradient[k], 0.0);
    EXPECT_NEAR((j.hessian - Mat::Identity(3, 3)).norm(), 0.0, 1e-15);
}

TEST(ExprJet, KinksAreNonDifferentiable)
{
    try {
        parse("norm(v)", 2).eval_jet(vec({0.0, 0.0}));
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalError::Kind::NonDifferentiable);
    }
    EXPECT_THROW(parse("abs(v1)", 2).eval_jet(vec({1e-13, 1.0})), EvalError);
    EXPECT_NO_THROW(parse("abs(v1)", 2).eval_jet(vec({1e-6, 1.0})));
    // the value path stays defined at the kink
    EXPECT_EQ(parse("norm(v)", 2).eval(vec({0.0, 0.0})), 0.0);
    EXPECT_EQ(parse("abs(v1)", 2).eval(vec({0.0, 1.0})), 0.0);
}

TEST(ExprJet, RossbyHandDerivative)
{
    // d/dv1 of v1/(1+|v|^2) = (1+|v|^2 - 2 v1^2)/(1+|v|^2)^2
    Vec p = vec({0.7, -0.4});
    double s = 1 + p.squaredNorm();
    Jet2 j = parse("v1/(1+dot(v,v))", 2).eval_jet(p);
    EXPECT_NEAR(j.gradient[0], (s - 2 * p[0] * p[0]) / (s * s), 1e-15);
    EXPECT_NEAR(j.gradient[1], -2 * p[0] * p[1] / (s * s), 1e-15);
    EXPECT_NEAR(j.hessian(0, 1), -2 * p[1] / (s * s) + 8 * p[0] * p[0] * p[1] / (s * s * s), 1e-14);
}

TEST(ExprJet, GradientMatchesCentralDifferences)
{
    std::mt19937_64 rng(7);
    const double h = 1e-5;
    for (const auto& [text, d] : kSmooth) {
        Expr e = parse(text, d);
        for (int trial = 0; trial < 100; ++trial) {
            Vec p = random_point(rng, d, 0.3, 1.5);
            for (int k = 0; k < d; ++k)
                if (trial % 2) p[k] = -p[k];
            Jet2 j = e.eval_jet(p);
            for (int k = 0; k < d; ++k) {
                Vec a = p, b = p;
                a[k] += h;
                b[k] -= h;
                double fd = (e.eval(a) - e.eval(b)) / (2 * h);
                EXPECT_LE(std::abs(j.gradient[k] - fd), 1e-6 * (1 + j.gradient.norm())) << text;
            }
        }
    }
}

TEST(ExprJet, HessianMatchesDifferencesOfGradients)
{
    std::mt19937_64 rng(11);
    const double h = 1e-5;
    for (const auto& [text, d] : kSmooth) {
        Expr e = parse(text, d);
        for (int trial = 0; trial < 50; ++trial) {
            Vec p = random_point(rng, d, 0.3, 1.5);
            Jet2 j = e.eval_jet(p);
            for (int k = 0; k < d; ++k) {
                Vec a = p, b = p;
                a[k] += h;
                b[k] -= h;
                Vec col = (e.eval_grad(a).gradient - e.eval_grad(b).gradient) / (2 * h);
                for (int m = 0; m < d; ++m)
                    EXPECT_LE(std::abs(j.hessian(m, k) - col[m]), 1e-4 * (1 + j.hessian.norm())) << text;
            }
            EXPECT_EQ((j.hessian - j.hessian.transpose()).norm(), 0.0);
        }
    }
}

TEST(ExprJet, ValueIsBitIdenticalAcrossModes)
{
    std::mt19937_64 rng(3);
    for (const auto& [text, d] : kSmooth) {
        Expr e = parse(text, d);
        for (int trial = 0; trial < 100; ++trial) {
            Vec p = random_point(rng, d, 0.3, 1.5);
            double v = e.eval(p);
            EXPECT_EQ(v, e.eval_jet(p).value) << text;
            EXPECT_EQ(v, e.eval_grad(p).value) << text;
        }
    }
}

TEST(ExprPrint, RoundTripEvaluatesIdentically)
{
    std::mt19937_64 rng(5);
    std::vector<std::pair<std::string, int>> cases(kSmooth.begin(), kSmooth.end());
    cases.emplace_back("0.1 + 1/3 * v1 - -v2 ^ 2 ^ 0.5", 2);
    cases.emplace_back("1e-300 * v1 + 123456789.123456789", 2);
    for (const auto& [text, d] : cases) {
        Expr e = parse(text, d);
        Expr again = parse(e.str(), d);
        EXPECT_EQ(again.str(), e.str());
        for (int trial = 0; trial < 100; ++trial) {
            Vec p = random_point(rng, d, 0.3, 1.5);
            EXPECT_EQ(e.eval(p), again.eval(p)) << text << " -> " << e.str();
        }
    }
}

TEST(ExprGroups, SeveralVectorGroups)
{
    Expr w = Expr::parse("dot(v,vs) + vp1*vps2 + norm(vps)", 2, {"v", "vs", "vp", "vps"});
    EXPECT_EQ(w.n_vars(), 8);
    std::vector<double> x = {1, 2, 3, 4, 5, 6, 3, 4};
    EXPECT_EQ(w.eval(x), 1 * 3 + 2 * 4 + 5 * 4 + 5.0);
    EXPECT_EQ(w.group_offset("vp"), 4);
    EXPECT_THROW(Expr::parse("vq1", 2, {"v", "vs"}), ParseError);
}

TEST(ExprBump, CompactSupportAndSmoothness)
{
    Expr b = parse("bump(v1)", 1);
    Vec inside(1), outside(1);
    inside[0] = 0.0;
    outside[0] = 1.5;
    EXPECT_EQ(b.eval(inside), 1.0);
    EXPECT_EQ(b.eval(outside), 0.0);
    Jet2 j = b.eval_jet(outside);
    EXPECT_EQ(j.gradient[0], 0.0);
    Vec near(1);
    near[0] = 1.0 - 1e-3;
    EXPECT_LT(b.eval(near), 1e-300);
}
