// Resums the q-Euler series sum (-1)^n q^{n(n-1)/2} t^n and compares the
// result with the direct q-Laplace sum of 1/(1+xi).
#include <cmath>
#include <cstdio>
#include <vector>

#include <qsum/qsum.hpp>

int main() {
    using namespace qsum;
    const Equation eq = parse_equation("q=2; delta=1; m=1; d=0; eq: t*S^1(X) + S^0(X) = 1", Window{41, 1});
    const StructureAnalysis A = analyze(eq);
    const FormalSolution sol = solve_formal(eq, 40);
    const SpiralGrid grid = continue_spiral(borel_equation(eq, A.m0()), borel(sol), 1.0);

    std::printf("%-24s %-24s %-24s %s\n", "t", "W(t)", "closed-form sum", "residual");
    const std::vector<Complex> ts{0.1, Complex(0.05, 0.05), Complex(-0.03, 0.08), 0.02};
    const ResidualCheck rc = residual_check(eq, grid, ts);
    for (const auto& s : rc.samples) {
        Complex direct = 0.0;
        for (int m = -60; m <= 60; ++m) {
            const double xi = std::pow(2.0, m);
            direct += 1.0 / (1.0 + xi) / to_complex(theta(xi / s.t, 2.0), 2.0);
        }
        std::printf("(%9.4f,%9.4f)   (%10.7f,%10.7f)  (%10.7f,%10.7f)  %.2e\n", s.t.real(), s.t.imag(), s.W.real(),
                    s.W.imag(), direct.real(), direct.imag(), s.residual);
    }
    return 0;
}
