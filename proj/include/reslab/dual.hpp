#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
// Nesting Dual<Dual<double>> gives exact second derivatives.

#include <array>
#include <cmath>

namespace reslab {

inline constexpr int kMaxDim = 3;

template <class T>
struct Dual {
    T v{};
    std::array<T, kMaxDim> d{};

    Dual() = default;
    Dual(double c) : v(c) {} // NOLINT: constants promote implicitly
    Dual(const T& value, const std::array<T, kMaxDim>& tangent) : v(value), d(tangent) {}
};

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};
template <class T> inline constexpr bool is_dual_v = is_dual<T>::value;

inline double scalar_value(double x) { return x; }
template <class T> double scalar_value(const Dual<T>& x) { return scalar_value(x.v); }

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T> bool all_finite(const Dual<T>& x)
{
    if (!all_finite(x.v)) return false;
    for (const auto& t : x.d)
        if (!all_finite(t)) return false;
    return true;
}

template <class T>
Dual<T> chain(const Dual<T>& a, const T& value, const T& slope)
{
    Dual<T> r;
    r.v = value;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = slope * a.d[k];
    return r;
}

template <class T> Dual<T> operator-(const Dual<T>& a)
{
    Dual<T> r;
    r.v = -a.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = -a.d[k];
    return r;
}

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b)
{
    Dual<T> r;
    r.v = a.v + b.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = a.d[k] + b.d[k];
    return r;
}

template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b)
{
    Dual<T> r;
    r.v = a.v - b.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = a.d[k] - b.d[k];
    return r;
}

template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b)
{
    Dual<T> r;
    r.v = a.v * b.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    return r;
}

template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b)
{
    Dual<T> r;
    r.v = a.v / b.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = (a.d[k] - r.v * b.d[k]) / b.v;
    return r;
}

template <class T> Dual<T> sqrt(const Dual<T>& a)
{
    using std::sqrt;
    T s = sqrt(a.v);
    T slope = T(0.5) / s;
    return chain(a, s, slope);
}

template <class T> Dual<T> exp(const Dual<T>& a)
{
    using std::exp;
    T e = exp(a.v);
    return chain(a, e, e);
}

template <class T> Dual<T> log(const Dual<T>& a)
{
    using std::log;
    return chain(a, log(a.v), T(1.0) / a.v);
}

template <class T> Dual<T> sin(const Dual<T>& a)
{
    using std::cos;
    using std::sin;
    return chain(a, sin(a.v), cos(a.v));
}

template <class T> Dual<T> cos(const Dual<T>& a)
{
    using std::cos;
    using std::sin;
    return chain(a, cos(a.v), -sin(a.v));
}

template <class T> Dual<T> atan(const Dual<T>& a)
{
    using std::atan;
    return chain(a, atan(a.v), T(1.0) / (T(1.0) + a.v * a.v));
}

template <class T> Dual<T> atan2(const Dual<T>& y, const Dual<T>& x)
{
    using std::atan2;
    Dual<T> r;
    r.v = atan2(y.v, x.v);
    T den = x.v * x.v + y.v * y.v;
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = (x.v * y.d[k] - y.v * x.d[k]) / den;
    return r;
}

/// |a| with the sign taken from the innermost scalar; callers reject the kink.
template <class T> Dual<T> abs(const Dual<T>& a)
{
    return scalar_value(a) < 0.0 ? -a : a;
}

template <class T> Dual<T> pow(const Dual<T>& a, double c)
{
    using std::pow;
    T value = pow(a.v, c);
    T slope = T(c) * pow(a.v, c - 1.0);
    return chain(a, value, slope);
}

template <class T> Dual<T> pow(const Dual<T>& a, const Dual<T>& b)
{
    using std::log;
    using std::pow;
    Dual<T> r;
    r.v = pow(a.v, b.v);
    T da = b.v * pow(a.v, b.v - T(1.0));
    T db = r.v * log(a.v);
    for (int k = 0; k < kMaxDim; ++k) r.d[k] = da * a.d[k] + db * b.d[k];
    return r;
}

} // namespace reslab
