#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reslab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    enum class Kind { Syntax, UnknownIdentifier, Arity, DimensionOutOfRange };

    ParseError(Kind kind, std::size_t offset, const std::string& msg)
        : Error(msg + " (at byte " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

class EvalError : public Error {
public:
    enum class Kind { NonFinite, NonDifferentiable, Domain };

    EvalError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Invalid user input detected before any computation (law spec, options, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed: Newton divergence, singular systems, chart exits.
class NumericalError : public Error {
public:
    enum class Kind {
        NotInA,
        NewtonDivergence,
        PivotDegenerate,
        LeftDomain,
        RankDeficient,
        SingularMatrix,
        Hypothesis,
        Positivity,
        Budget,
        Precondition,
    };

    NumericalError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace reslab
