#pragma once

// Seeded streams with platform-independent output. std::mt19937_64 is fully
// specified by the standard; the standard distributions are not, so the
// uniform and normal transforms are spelled out here.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "reslab/types.hpp"

namespace reslab {

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t chunk)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32), 0x5eedu};
        gen_.seed(seq);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    Vec direction(int d)
    {
        Vec u(d);
        double n = 0.0;
        do {
            for (int k = 0; k < d; ++k) u[k] = normal();
            n = u.norm();
        } while (n < 1e-12);
        return u / n;
    }

    /// Uniform point of the ball of radius `rho` in dimension `m`.
    Vec ball(int m, double rho)
    {
        if (m == 1) {
            Vec s(1);
            s[0] = uniform(-rho, rho);
            return s;
        }
        Vec u = direction(m);
        return u * (rho * std::pow(uniform(), 1.0 / m));
    }

    /// Uniform point of the annulus r_min <= |v| <= r_max in dimension d.
    Vec annulus(int d, double r_min, double r_max)
    {
        Vec u = direction(d);
        double a = std::pow(r_min, d), b = std::pow(r_max, d);
        return u * std::pow(a + uniform() * (b - a), 1.0 / d);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline double ball_volume(int m, double rho)
{
    switch (m) {
    case 0: return 1.0;
    case 1: return 2.0 * rho;
    case 2: return std::numbers::pi * rho * rho;
    case 3: return 4.0 / 3.0 * std::numbers::pi * rho * rho * rho;
    default: return std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0 + 1.0) * std::pow(rho, m);
    }
}

} // namespace reslab
