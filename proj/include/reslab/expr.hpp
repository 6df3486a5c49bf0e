#pragma once

// Scalar expressions over one or more d-dimensional variable groups.
//
// A group named "v" contributes components v1..vd; "dot(v,w)" and "norm(v)"
// take whole groups. Expressions compile to a postfix program that can be run
// on plain doubles, first-order duals or nested duals, so values agree bit for
// bit across the three evaluation modes.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reslab/dual.hpp"
#include "reslab/error.hpp"
#include "reslab/types.hpp"

namespace reslab {

namespace detail {

enum class Fn { Sqrt, Exp, Log, Sin, Cos, Atan, Atan2, Abs, Bump, Dot, Norm };

struct FnInfo {
    const char* name;
    Fn fn;
    int arity;
    bool vector_args;
};

inline constexpr FnInfo kFunctions[] = {
    {"sqrt", Fn::Sqrt, 1, false},  {"exp", Fn::Exp, 1, false},   {"log", Fn::Log, 1, false},
    {"sin", Fn::Sin, 1, false},    {"cos", Fn::Cos, 1, false},   {"atan", Fn::Atan, 1, false},
    {"arctan", Fn::Atan, 1, false}, {"atan2", Fn::Atan2, 2, false}, {"abs", Fn::Abs, 1, false},
    {"bump", Fn::Bump, 1, false},  {"dot", Fn::Dot, 2, true},    {"norm", Fn::Norm, 1, true},
};

inline const FnInfo* find_function(std::string_view name)
{
    for (const auto& f : kFunctions)
        if (name == f.name) return &f;
    return nullptr;
}

inline const char* canonical_name(Fn fn)
{
    for (const auto& f : kFunctions)
        if (f.fn == fn) return f.name;
    return "?";
}

struct Node {
    enum class Kind { Num, Pi, Var, Group, Neg, Add, Sub, Mul, Div, Pow, Call };
    Kind kind;
    double num = 0.0;
    int index = 0; // Var: flat variable index; Group: group index
    Fn fn = Fn::Sqrt;
    std::vector<std::shared_ptr<const Node>> kids;
};

using NodePtr = std::shared_ptr<const Node>;

enum class Op {
    Const, Var, Neg, Add, Sub, Mul, Div, PowConst, Pow,
    Sqrt, Exp, Log, Sin, Cos, Atan, Atan2, Abs, Bump, Dot, Norm,
};

struct Instr {
    Op op;
    double c = 0.0;
    int a = 0;
    int b = 0;
};

inline constexpr double kKinkRadius = 1e-12;

class Parser {
public:
    Parser(std::string_view text, int d, const std::vector<std::string>& groups)
        : s_(text), d_(d), groups_(groups) {}

    NodePtr run()
    {
        NodePtr e = expr();
        skip_ws();
        if (pos_ < s_.size()) fail(ParseError::Kind::Syntax, "unexpected '" + std::string(1, s_[pos_]) + "'");
        if (e->kind == Node::Kind::Group)
            throw ParseError(ParseError::Kind::Syntax, 0, "vector '" + groups_[e->index] + "' used as a scalar");
        return e;
    }

private:
    std::string_view s_;
    int d_;
    const std::vector<std::string>& groups_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(ParseError::Kind k, const std::string& msg, std::size_t at) const
    {
        throw ParseError(k, at, msg);
    }
    [[noreturn]] void fail(ParseError::Kind k, const std::string& msg) const { fail(k, msg, pos_); }

    void skip_ws()
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            std::string got = pos_ < s_.size() ? "'" + std::string(1, s_[pos_]) + "'" : "end of input";
            fail(ParseError::Kind::Syntax, std::string("expected '") + c + "', got " + got);
        }
    }

    static NodePtr make(Node::Kind k, std::vector<NodePtr> kids = {})
    {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->kids = std::move(kids);
        return n;
    }

    NodePtr scalar(NodePtr n, std::size_t at) const
    {
        if (n->kind == Node::Kind::Group)
            fail(ParseError::Kind::Syntax, "vector '" + groups_[n->index] + "' used as a scalar", at);
        return n;
    }

    NodePtr expr()
    {
        skip_ws();
        std::size_t at = pos_;
        NodePtr lhs = term();
        for (;;) {
            skip_ws();
            std::size_t op_at = pos_;
            if (accept('+')) {
                NodePtr rhs = term();
                lhs = make(Node::Kind::Add, {scalar(lhs, at), scalar(rhs, op_at + 1)});
            } else if (accept('-')) {
                NodePtr rhs = term();
                lhs = make(Node::Kind::Sub, {scalar(lhs, at), scalar(rhs, op_at + 1)});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term()
    {
        skip_ws();
        std::size_t at = pos_;
        NodePtr lhs = unary();
        for (;;) {
            skip_ws();
            std::size_t op_at = pos_;
            if (accept('*')) {
                NodePtr rhs = unary();
                lhs = make(Node::Kind::Mul, {scalar(lhs, at), scalar(rhs, op_at + 1)});
            } else if (accept('/')) {
                NodePtr rhs = unary();
                lhs = make(Node::Kind::Div, {scalar(lhs, at), scalar(rhs, op_at + 1)});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary()
    {
        skip_ws();
        std::size_t at = pos_;
        if (accept('-')) return make(Node::Kind::Neg, {scalar(unary(), at + 1)});
        if (accept('+')) return scalar(unary(), at + 1);
        return power();
    }

    NodePtr power()
    {
        skip_ws();
        std::size_t at = pos_;
        NodePtr base = primary();
        skip_ws();
        std::size_t op_at = pos_;
        if (accept('^')) {
            NodePtr ex = unary();
            return make(Node::Kind::Pow, {scalar(base, at), scalar(ex, op_at + 1)});
        }
        return base;
    }

    NodePtr number()
    {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double x = 0.0;
        auto [end, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, x);
        if (ec == std::errc::result_out_of_range)
            fail(ParseError::Kind::Syntax, "number out of range", start);
        if (ec != std::errc() || end != s_.data() + pos_)
            fail(ParseError::Kind::Syntax, "malformed number '" + std::string(s_.substr(start, pos_ - start)) + "'", start);
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Num;
        n->num = x;
        return n;
    }

    NodePtr identifier()
    {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string_view id = s_.substr(start, pos_ - start);

        skip_ws();
        bool call = pos_ < s_.size() && s_[pos_] == '(';
        if (call) {
            const FnInfo* f = find_function(id);
            if (!f) fail(ParseError::Kind::UnknownIdentifier, "unknown function '" + std::string(id) + "'", start);
            return call_args(*f, start);
        }
        if (find_function(id))
            fail(ParseError::Kind::Syntax, "function '" + std::string(id) + "' needs an argument list", start);
        if (id == "pi") return make(Node::Kind::Pi);

        for (std::size_t g = 0; g < groups_.size(); ++g) {
            const std::string& name = groups_[g];
            if (id == name) {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Group;
                n->index = static_cast<int>(g);
                return n;
            }
            if (id.size() > name.size() && id.substr(0, name.size()) == name) {
                std::string_view rest = id.substr(name.size());
                if (!std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
                    continue;
                int k = 0;
                auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
                if (ec != std::errc() || k < 1 || k > d_)
                    fail(ParseError::Kind::DimensionOutOfRange,
                         "component '" + std::string(id) + "' out of range for dimension " + std::to_string(d_), start);
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Var;
                n->index = static_cast<int>(g) * d_ + (k - 1);
                return n;
            }
        }
        fail(ParseError::Kind::UnknownIdentifier, "unknown identifier '" + std::string(id) + "'", start);
    }

    NodePtr call_args(const FnInfo& f, std::size_t start)
    {
        expect('(');
        std::vector<NodePtr> args;
        std::vector<std::size_t> arg_pos;
        skip_ws();
        if (!accept(')')) {
            do {
                skip_ws();
                arg_pos.push_back(pos_);
                args.push_back(expr());
            } while (accept(','));
            expect(')');
        }
        if (static_cast<int>(args.size()) != f.arity)
            fail(ParseError::Kind::Arity,
                 std::string(f.name) + " expects " + std::to_string(f.arity) + " argument(s), got " +
                     std::to_string(args.size()),
                 start);
        for (std::size_t k = 0; k < args.size(); ++k) {
            bool is_group = args[k]->kind == Node::Kind::Group;
            if (f.vector_args && !is_group)
                fail(ParseError::Kind::Syntax, std::string(f.name) + " expects vector arguments such as 'v'", arg_pos[k]);
            if (!f.vector_args && is_group)
                fail(ParseError::Kind::Syntax, "vector '" + groups_[args[k]->index] + "' used as a scalar", arg_pos[k]);
        }
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Call;
        n->fn = f.fn;
        n->kids = std::move(args);
        return n;
    }

    NodePtr primary()
    {
        skip_ws();
        if (pos_ >= s_.size()) fail(ParseError::Kind::Syntax, "unexpected end of input");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (accept('(')) {
            NodePtr e = expr();
            expect(')');
            return e;
        }
        fail(ParseError::Kind::Syntax, "unexpected '" + std::string(1, c) + "'");
    }
};

inline bool depends_on_vars(const Node& n)
{
    if (n.kind == Node::Kind::Var || n.kind == Node::Kind::Group) return true;
    return std::any_of(n.kids.begin(), n.kids.end(), [](const NodePtr& k) { return depends_on_vars(*k); });
}

} // namespace detail

class Expr {
public:
    Expr() = default;

    /// Parses `text` over the given variable groups, each of dimension `d`.
    static Expr parse(std::string_view text, int d, std::vector<std::string> groups = {"v"})
    {
        if (d < 1) throw ConfigError("dimension must be positive");
        Expr e;
        e.text_ = std::string(text);
        e.d_ = d;
        e.groups_ = std::move(groups);
        detail::Parser p(text, d, e.groups_);
        e.root_ = p.run();
        e.compile(*e.root_);
        int depth = 0;
        for (const auto& in : e.prog_) {
            depth += stack_delta(in.op);
            e.max_depth_ = std::max(e.max_depth_, depth);
        }
        return e;
    }

    int dim() const { return d_; }
    int n_vars() const { return d_ * static_cast<int>(groups_.size()); }
    const std::string& source() const { return text_; }
    bool empty() const { return !root_; }

    /// Index of `group` in the flat variable layout, or -1.
    int group_offset(std::string_view group) const
    {
        for (std::size_t g = 0; g < groups_.size(); ++g)
            if (groups_[g] == group) return static_cast<int>(g) * d_;
        return -1;
    }
    const std::vector<std::string>& groups() const { return groups_; }

    /// Fully parenthesized text that parses back to an equivalent tree.
    std::string str() const { return root_ ? print(*root_) : std::string(); }

    double eval(std::span<const double> x) const
    {
        check_arity(x.size());
        return run<double>(x.data());
    }

    Grad1 eval_grad(std::span<const double> x) const
    {
        check_arity(x.size());
        check_jet_size();
        const int n = n_vars();
        std::array<Dual<double>, kMaxDim> xs{};
        for (int k = 0; k < n; ++k) {
            xs[k].v = x[k];
            xs[k].d[k] = 1.0;
        }
        Dual<double> r = run<Dual<double>>(xs.data());
        Grad1 g;
        g.value = r.v;
        g.gradient.resize(n);
        for (int k = 0; k < n; ++k) g.gradient[k] = r.d[k];
        return g;
    }

    Jet2 eval_jet(std::span<const double> x) const
    {
        check_arity(x.size());
        check_jet_size();
        using D1 = Dual<double>;
        using D2 = Dual<D1>;
        const int n = n_vars();
        std::array<D2, kMaxDim> xs{};
        for (int k = 0; k < n; ++k) {
            xs[k].v.v = x[k];
            xs[k].v.d[k] = 1.0;
            xs[k].d[k].v = 1.0;
        }
        D2 r = run<D2>(xs.data());
        Jet2 j;
        j.value = r.v.v;
        j.gradient.resize(n);
        j.hessian.resize(n, n);
        for (int a = 0; a < n; ++a) {
            j.gradient[a] = r.v.d[a];
            for (int b = 0; b < n; ++b) j.hessian(a, b) = r.d[a].d[b];
        }
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                double s = 0.5 * (j.hessian(a, b) + j.hessian(b, a));
                j.hessian(a, b) = s;
                j.hessian(b, a) = s;
            }
        return j;
    }

    double eval(const Vec& x) const { return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); }
    Grad1 eval_grad(const Vec& x) const
    {
        return eval_grad(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }
    Jet2 eval_jet(const Vec& x) const
    {
        return eval_jet(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

private:
    using Node = detail::Node;
    using Op = detail::Op;

    std::string text_;
    int d_ = 0;
    std::vector<std::string> groups_;
    detail::NodePtr root_;
    std::vector<detail::Instr> prog_;
    int max_depth_ = 0;

    void check_arity(std::size_t n) const
    {
        if (!root_) throw EvalError(EvalError::Kind::Domain, "evaluating an empty expression");
        if (n != static_cast<std::size_t>(n_vars()))
            throw EvalError(EvalError::Kind::Domain, "expected " + std::to_string(n_vars()) + " coordinates, got " +
                                                         std::to_string(n));
    }

    void check_jet_size() const
    {
        if (n_vars() > kMaxDim)
            throw EvalError(EvalError::Kind::Domain, "derivatives are limited to " + std::to_string(kMaxDim) + " variables");
    }

    static int stack_delta(Op op)
    {
        switch (op) {
        case Op::Const:
        case Op::Var:
        case Op::Dot:
        case Op::Norm: return 1;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow:
        case Op::Atan2: return -1;
        default: return 0;
        }
    }

    void emit(Op op, double c = 0.0, int a = 0, int b = 0) { prog_.push_back({op, c, a, b}); }

    void compile(const Node& n)
    {
        using K = Node::Kind;
        switch (n.kind) {
        case K::Num: emit(Op::Const, n.num); return;
        case K::Pi: emit(Op::Const, std::numbers::pi); return;
        case K::Var: emit(Op::Var, 0.0, n.index); return;
        case K::Group: throw EvalError(EvalError::Kind::Domain, "vector used as scalar");
        case K::Neg: compile(*n.kids[0]); emit(Op::Neg); return;
        case K::Add: compile(*n.kids[0]); compile(*n.kids[1]); emit(Op::Add); return;
        case K::Sub: compile(*n.kids[0]); compile(*n.kids[1]); emit(Op::Sub); return;
        case K::Mul: compile(*n.kids[0]); compile(*n.kids[1]); emit(Op::Mul); return;
        case K::Div: compile(*n.kids[0]); compile(*n.kids[1]); emit(Op::Div); return;
        case K::Pow:
            compile(*n.kids[0]);
            if (!detail::depends_on_vars(*n.kids[1])) {
                Expr sub;
                sub.d_ = d_;
                sub.groups_ = groups_;
                sub.root_ = n.kids[1];
                sub.compile(*n.kids[1]);
                sub.max_depth_ = static_cast<int>(sub.prog_.size());
                emit(Op::PowConst, sub.run<double>(nullptr));
            } else {
                compile(*n.kids[1]);
                emit(Op::Pow);
            }
            return;
        case K::Call: break;
        }
        using detail::Fn;
        switch (n.fn) {
        case Fn::Dot:
            emit(Op::Dot, 0.0, n.kids[0]->index * d_, n.kids[1]->index * d_);
            return;
        case Fn::Norm: emit(Op::Norm, 0.0, n.kids[0]->index * d_); return;
        default: break;
        }
        for (const auto& k : n.kids) compile(*k);
        switch (n.fn) {
        case Fn::Sqrt: emit(Op::Sqrt); break;
        case Fn::Exp: emit(Op::Exp); break;
        case Fn::Log: emit(Op::Log); break;
        case Fn::Sin: emit(Op::Sin); break;
        case Fn::Cos: emit(Op::Cos); break;
        case Fn::Atan: emit(Op::Atan); break;
        case Fn::Atan2: emit(Op::Atan2); break;
        case Fn::Abs: emit(Op::Abs); break;
        case Fn::Bump: emit(Op::Bump); break;
        default: break;
        }
    }

    static const char* op_name(Op op)
    {
        switch (op) {
        case Op::Const: return "constant";
        case Op::Var: return "variable";
        case Op::Neg: return "negation";
        case Op::Add: return "addition";
        case Op::Sub: return "subtraction";
        case Op::Mul: return "multiplication";
        case Op::Div: return "division";
        case Op::PowConst:
        case Op::Pow: return "power";
        case Op::Sqrt: return "sqrt";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Atan: return "atan";
        case Op::Atan2: return "atan2";
        case Op::Abs: return "abs";
        case Op::Bump: return "bump";
        case Op::Dot: return "dot";
        case Op::Norm: return "norm";
        }
        return "?";
    }

    template <class T>
    T run(const T* x) const
    {
        using std::atan;
        using std::atan2;
        using std::cos;
        using std::exp;
        using std::log;
        using std::pow;
        using std::sin;
        using std::sqrt;
        constexpr bool jet = is_dual_v<T>;

        std::vector<T> st;
        st.reserve(static_cast<std::size_t>(std::max(max_depth_, 1)));
        for (const auto& in : prog_) {
            switch (in.op) {
            case Op::Const: st.push_back(T(in.c)); break;
            case Op::Var: st.push_back(x[in.a]); break;
            case Op::Neg: st.back() = -st.back(); break;
            case Op::Add: { T r = st.back(); st.pop_back(); st.back() = st.back() + r; break; }
            case Op::Sub: { T r = st.back(); st.pop_back(); st.back() = st.back() - r; break; }
            case Op::Mul: { T r = st.back(); st.pop_back(); st.back() = st.back() * r; break; }
            case Op::Div: { T r = st.back(); st.pop_back(); st.back() = st.back() / r; break; }
            case Op::Pow: { T r = st.back(); st.pop_back(); st.back() = pow(st.back(), r); break; }
            case Op::PowConst: st.back() = pow(st.back(), in.c); break;
            case Op::Sqrt: st.back() = sqrt(st.back()); break;
            case Op::Exp: st.back() = exp(st.back()); break;
            case Op::Log: st.back() = log(st.back()); break;
            case Op::Sin: st.back() = sin(st.back()); break;
            case Op::Cos: st.back() = cos(st.back()); break;
            case Op::Atan: st.back() = atan(st.back()); break;
            case Op::Atan2: { T xx = st.back(); st.pop_back(); st.back() = atan2(st.back(), xx); break; }
            case Op::Abs:
                if constexpr (jet) {
                    if (std::abs(scalar_value(st.back())) <= detail::kKinkRadius)
                        throw EvalError(EvalError::Kind::NonDifferentiable, "abs is not differentiable at its kink");
                    st.back() = abs(st.back());
                } else {
                    st.back() = std::abs(st.back());
                }
                break;
            case Op::Bump:
                if (scalar_value(st.back()) >= 1.0) {
                    st.back() = T(0.0);
                } else {
                    st.back() = exp(T(1.0) - T(1.0) / (T(1.0) - st.back()));
                }
                break;
            case Op::Dot: {
                T acc = x[in.a] * x[in.b];
                for (int k = 1; k < d_; ++k) acc = acc + x[in.a + k] * x[in.b + k];
                st.push_back(acc);
                break;
            }
            case Op::Norm: {
                T acc = x[in.a] * x[in.a];
                for (int k = 1; k < d_; ++k) acc = acc + x[in.a + k] * x[in.a + k];
                if constexpr (jet) {
                    if (std::sqrt(scalar_value(acc)) <= detail::kKinkRadius)
                        throw EvalError(EvalError::Kind::NonDifferentiable, "norm is not differentiable at the origin");
                }
                st.push_back(sqrt(acc));
                break;
            }
            }
            if (!all_finite(st.back()))
                throw EvalError(EvalError::Kind::NonFinite, std::string("non-finite result in ") + op_name(in.op) +
                                                                 " while evaluating '" + text_ + "'");
        }
        return st.back();
    }

    std::string print(const Node& n) const
    {
        using K = Node::Kind;
        switch (n.kind) {
        case K::Num: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.num);
            return buf;
        }
        case K::Pi: return "pi";
        case K::Var: {
            int g = n.index / d_;
            return groups_[static_cast<std::size_t>(g)] + std::to_string(n.index % d_ + 1);
        }
        case K::Group: return groups_[static_cast<std::size_t>(n.index)];
        case K::Neg: return "(-" + print(*n.kids[0]) + ")";
        case K::Add: return "(" + print(*n.kids[0]) + " + " + print(*n.kids[1]) + ")";
        case K::Sub: return "(" + print(*n.kids[0]) + " - " + print(*n.kids[1]) + ")";
        case K::Mul: return "(" + print(*n.kids[0]) + " * " + print(*n.kids[1]) + ")";
        case K::Div: return "(" + print(*n.kids[0]) + " / " + print(*n.kids[1]) + ")";
        case K::Pow: return "(" + print(*n.kids[0]) + " ^ " + print(*n.kids[1]) + ")";
        case K::Call: {
            std::string s = detail::canonical_name(n.fn);
            s += "(";
            for (std::size_t k = 0; k < n.kids.size(); ++k) {
                if (k) s += ", ";
                s += print(*n.kids[k]);
            }
            return s + ")";
        }
        }
        return {};
    }
};

inline Expr parse(std::string_view text, int d) { return Expr::parse(text, d); }
inline double eval(const Expr& e, const Vec& v) { return e.eval(v); }
inline Jet2 eval_jet(const Expr& e, const Vec& v) { return e.eval_jet(v); }

} // namespace reslab
