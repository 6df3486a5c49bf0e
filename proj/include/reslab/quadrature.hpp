#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "reslab/types.hpp"

namespace reslab {

struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
};

/// n-point Gauss–Legendre rule on [a, b].
inline Rule1D gauss_legendre(int n, double a, double b)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double wt = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = mid - half * z;
        r.x[n - 1 - i] = mid + half * z;
        r.w[i] = r.w[n - 1 - i] = half * wt;
    }
    return r;
}

/// Product rule on the annulus r_min <= |v| <= r_max. Radial Gauss–Legendre,
/// uniform azimuth, and (d = 3) Gauss–Legendre in the polar cosine.
struct AnnulusRule {
    std::vector<Vec> nodes;
    std::vector<double> weights;

    static AnnulusRule make(int d, double r_min, double r_max, int n_radial, int n_angular)
    {
        AnnulusRule q;
        Rule1D rad = gauss_legendre(n_radial, r_min, r_max);
        if (d == 2) {
            const double dt = 2.0 * std::numbers::pi / n_angular;
            for (int a = 0; a < n_radial; ++a)
                for (int b = 0; b < n_angular; ++b) {
                    double t = dt * (b + 0.5);
                    Vec v(2);
                    v << rad.x[a] * std::cos(t), rad.x[a] * std::sin(t);
                    q.nodes.push_back(v);
                    q.weights.push_back(rad.w[a] * rad.x[a] * dt);
                }
        } else if (d == 3) {
            Rule1D mu = gauss_legendre(n_angular, -1.0, 1.0);
            const int n_phi = 2 * n_angular;
            const double dp = 2.0 * std::numbers::pi / n_phi;
            for (int a = 0; a < n_radial; ++a)
                for (int b = 0; b < n_angular; ++b) {
                    double s = std::sqrt(1.0 - mu.x[b] * mu.x[b]);
                    for (int c = 0; c < n_phi; ++c) {
                        double p = dp * (c + 0.5);
                        Vec v(3);
                        v << rad.x[a] * s * std::cos(p), rad.x[a] * s * std::sin(p), rad.x[a] * mu.x[b];
                        q.nodes.push_back(v);
                        q.weights.push_back(rad.w[a] * rad.x[a] * rad.x[a] * mu.w[b] * dp);
                    }
                }
        } else {
            throw std::invalid_argument("annulus rule: dimension must be 2 or 3");
        }
        return q;
    }

    /// A rule with at least roughly n nodes, angular resolution about four times radial.
    static AnnulusRule with_size(int d, double r_min, double r_max, int n)
    {
        if (d == 2) {
            int nr = std::max(4, static_cast<int>(std::ceil(std::sqrt(n / 4.0))));
            int na = std::max(8, static_cast<int>(std::ceil(static_cast<double>(n) / nr)));
            return make(d, r_min, r_max, nr, na);
        }
        int nr = std::max(4, static_cast<int>(std::ceil(std::cbrt(n / 8.0))));
        int na = std::max(4, static_cast<int>(std::ceil(std::sqrt(n / (2.0 * nr)))));
        return make(d, r_min, r_max, nr, na);
    }

    std::size_t size() const { return nodes.size(); }
};

} // namespace reslab
