#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "errors.hpp"
#include "series.hpp"

namespace qsum {

struct RootOptions {
    int max_iterations = 500;
    double tolerance = 1e-13; // relative step size
};

// Horner evaluation, coefficients in ascending order.
inline Complex poly_eval(std::span<const Complex> c, Complex x) {
    Complex acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it)
        acc = acc * x + *it;
    return acc;
}

// All roots of sum c_i x^i by Durand-Kerner simultaneous iteration.
// The leading coefficient must be nonzero.
inline std::vector<Complex> durand_kerner(std::span<const Complex> coeffs, RootOptions opt = {}) {
    std::vector<Complex> c(coeffs.begin(), coeffs.end());
    while (!c.empty() && c.back() == 0.0)
        c.pop_back();
    if (c.size() < 2)
        throw NumericalError("polynomial of degree < 1 has no roots to find");
    const std::size_t n = c.size() - 1;
    const Complex lead = c.back();
    for (auto& v : c)
        v /= lead;
    if (n == 1)
        return {-c[0]};

    // Cauchy bound sets the scale of the starting circle.
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        bound = std::max(bound, std::abs(c[i]));
    bound += 1.0;
    std::vector<Complex> z(n);
    const Complex seed(0.4, 0.9);
    Complex p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = p * (bound / 2.0);
        p *= seed;
    }

    bool converged = false;
    for (int it = 0; it < opt.max_iterations && !converged; ++it) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Complex denom = 1.0;
            for (std::size_t k = 0; k < n; ++k)
                if (k != i)
                    denom *= z[i] - z[k];
            if (denom == 0.0)
                denom = 1e-300;
            const Complex step = poly_eval(c, z[i]) / denom;
            z[i] -= step;
            worst = std::max(worst, std::abs(step) / std::max(std::abs(z[i]), 1e-300));
        }
        converged = worst < opt.tolerance;
    }
    if (!converged)
        throw NumericalError("Durand-Kerner iteration did not converge in " + std::to_string(opt.max_iterations) +
                             " iterations");

    // A few Newton steps; harmless once converged and they clean up
    // rounding in the last simultaneous update.
    std::vector<Complex> dc(n);
    for (std::size_t i = 1; i <= n; ++i)
        dc[i - 1] = c[i] * static_cast<double>(i);
    for (auto& r : z) {
        for (int k = 0; k < 3; ++k) {
            const Complex d = poly_eval(dc, r);
            if (d == 0.0)
                break;
            const Complex step = poly_eval(c, r) / d;
            if (!is_finite(step))
                break;
            r -= step;
        }
    }
    return z;
}

} // namespace qsum
