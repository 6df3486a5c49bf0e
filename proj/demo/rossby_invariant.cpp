// Three-wave residuals on the Rossby law: the arctan invariant against a few
// functions that are not invariants.

#include <cstdio>

#include "reslab/invariants.hpp"

using namespace reslab;

int main(int argc, char** argv)
{
    const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 1000;
    const DispersionLaw law = rossby_law(2);
    const SamplingDomain dom{0.5, 2.0};
    TripleSample s = sample_triples(law, dom, n, 2024);
    std::printf("rossby law: %zu triples, rejection rate %.3f, max energy residual %.2e\n", s.items.size(),
                s.stats.rejection_rate(), s.stats.max_energy_residual);

    const char* candidates[] = {
        "arctan((v1*sqrt(3)+v2)/(v1^2+v2^2)) - arctan((-v1*sqrt(3)+v2)/(v1^2+v2^2))",
        "v1",
        "v1*v2/(v1^2+v2^2)",
        "v1^2",
        "dot(v,v)",
    };
    std::printf("%-12s %-12s %-13s %s\n", "rms", "max", "verdict", "g");
    for (const char* text : candidates) {
        Residual r = three_wave_residual(Expr::parse(text, 2), s.items);
        std::printf("%-12.3e %-12.3e %-13s %s\n", r.rms, r.max, to_string(classify_residual(r.rms)), text);
    }
}
