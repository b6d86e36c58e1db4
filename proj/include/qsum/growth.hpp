#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "formal.hpp"
#include "scaled.hpp"
#include "series.hpp"

// Coefficient decay |a_n| <= A H^n q^{-n(n-1)/2} against entire growth
// |f(t)| <= M exp((ln|t|)^2 / (2 ln q) + alpha ln|t|), checked both ways.
namespace qsum {

struct CoeffBound {
    double A = 0.0;
    double H = 1.0;
    bool divergent = false;    // the H sequence grows without settling
    std::vector<double> log_h; // ln(|a_n| q^{n(n-1)/2}) / n, index n (0 unused)

    bool certificate_holds(std::span<const Complex> coeffs, double q) const {
        const double lq = std::log(q);
        for (std::size_t n = 0; n < coeffs.size(); ++n) {
            if (coeffs[n] == 0.0)
                continue;
            const double lhs = std::log(std::abs(coeffs[n]));
            const double rhs = std::log(A) + n * std::log(H) - 0.5 * n * (n - 1.0) * lq;
            if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(rhs)))
                return false;
        }
        return true;
    }
};

inline CoeffBound fit_coeff_bound(std::span<const Complex> coeffs, double q) {
    if (coeffs.size() < 3)
        throw NumericalError("coefficient bound fit needs at least 3 coefficients");
    CoeffBound b;
    const double lq = std::log(q);
    const int count = static_cast<int>(coeffs.size()) - 1;
    std::vector<double> lb; // ln(|a_n| q^{n(n-1)/2})
    for (int n = 0; n <= count; ++n) {
        const Complex c = coeffs[static_cast<std::size_t>(n)];
        lb.push_back(c == 0.0 ? -std::numeric_limits<double>::infinity()
                              : std::log(std::abs(c)) + 0.5 * n * (n - 1.0) * lq);
        b.log_h.push_back(n == 0 ? 0.0 : lb.back() / n);
    }
    if (std::all_of(lb.begin(), lb.end(), [](double v) { return std::isinf(v); }))
        return b;
    const auto [first, last] = stabilized_window(count);
    double log_H = -std::numeric_limits<double>::infinity();
    std::vector<double> window;
    for (int n = first; n <= last; ++n)
        if (std::isfinite(b.log_h[static_cast<std::size_t>(n)])) {
            log_H = std::max(log_H, b.log_h[static_cast<std::size_t>(n)]);
            window.push_back(b.log_h[static_cast<std::size_t>(n)]);
        }
    if (!std::isfinite(log_H))
        log_H = 0.0;
    b.H = std::exp(log_H);
    double log_A = -std::numeric_limits<double>::infinity();
    for (int n = 0; n <= count; ++n)
        log_A = std::max(log_A, lb[static_cast<std::size_t>(n)] - n * log_H);
    b.A = std::exp(log_A);
    bool increasing = window.size() >= 2;
    for (std::size_t i = 1; i < window.size(); ++i)
        increasing = increasing && window[i] > window[i - 1];
    b.divergent = increasing && std::exp(window.back() - window.front()) > 2.0;
    return b;
}

// Sum of a_n t^n for coefficients decaying like q^{-n(n-1)/2}, in the log
// domain, with the tail bounded geometrically from the last term.
struct EntireSeries {
    std::vector<Complex> coeffs;
    double q = 2.0;
    double tail_tol = 1e-12;

    Complex operator()(Complex t) const {
        std::vector<QValue> parts;
        for (std::size_t n = 0; n < coeffs.size(); ++n)
            if (coeffs[n] != 0.0)
                parts.push_back(qmul(to_qvalue(coeffs[n], q), qpow(t, static_cast<int>(n), q), q));
        const QValue s = qsum_values(parts, q);
        // Ratio of consecutive terms at the end of the stored range.
        const std::size_t K = coeffs.size();
        if (K >= 2 && coeffs[K - 1] != 0.0 && coeffs[K - 2] != 0.0 && t != 0.0) {
            const double r = std::abs(coeffs[K - 1] / coeffs[K - 2]) * std::abs(t);
            const double last = log_abs(parts.back(), q);
            const double tail = r < 1.0 ? std::exp(last) * r / (1.0 - r) : std::numeric_limits<double>::infinity();
            const double mag = std::exp(log_abs(s, q));
            if (!(tail <= tail_tol * std::max(mag, 1e-300)))
                throw NumericalError("truncated series does not resolve |t| = " + std::to_string(std::abs(t)) +
                                     " to the tail tolerance");
        }
        return to_complex(s, q);
    }
};

struct GrowthBound {
    double M = 0.0;
    double alpha = 0.0;
};

inline double growth_log_envelope(double M, double alpha, double q, double abs_t) {
    const double l = std::log(abs_t);
    return std::log(M) + l * l / (2.0 * std::log(q)) + alpha * l;
}

struct GrowthCheck {
    bool passed = true;
    double worst_margin = -std::numeric_limits<double>::infinity(); // max ln|f| - ln bound
    double worst_at = 0.0;
    double min_abs_t = 0.0;
    double max_abs_t = 0.0;
};

using Evaluator = std::function<Complex(Complex)>;

inline GrowthCheck check_growth_bound(const Evaluator& f, double q, double M, double alpha,
                                      std::span<const Complex> samples) {
    GrowthCheck r;
    r.min_abs_t = std::numeric_limits<double>::infinity();
    for (const Complex t : samples) {
        if (t == 0.0)
            throw ConditionError("growth samples must be nonzero");
        const double v = std::abs(f(t));
        const double margin = (v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(v)) -
                              growth_log_envelope(M, alpha, q, std::abs(t));
        if (margin > r.worst_margin) {
            r.worst_margin = margin;
            r.worst_at = std::abs(t);
        }
        r.min_abs_t = std::min(r.min_abs_t, std::abs(t));
        r.max_abs_t = std::max(r.max_abs_t, std::abs(t));
    }
    r.passed = r.worst_margin <= 1e-12;
    return r;
}

// Least squares of ln|f| - (ln|t|)^2/(2 ln q) on ln|t|, over the samples
// with |t| >= 1 when they span a decade; M is then raised until the
// envelope covers every sample.
inline GrowthBound fit_growth(const Evaluator& f, double q, std::span<const Complex> samples) {
    if (samples.size() < 10)
        throw ConditionError("growth fit needs at least 10 samples");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Complex t : samples) {
        if (t == 0.0)
            throw ConditionError("growth samples must be nonzero");
        lo = std::min(lo, std::abs(t));
        hi = std::max(hi, std::abs(t));
    }
    if (hi / lo < 1e3)
        throw ConditionError("growth samples must span at least 3 decades of |t|");
    const double lq = std::log(q);
    std::vector<double> xs, ys, all_x, all_y;
    for (const Complex t : samples) {
        const double v = std::abs(f(t));
        if (v == 0.0)
            continue;
        const double x = std::log(std::abs(t));
        const double y = std::log(v) - x * x / (2.0 * lq);
        all_x.push_back(x);
        all_y.push_back(y);
    }
    if (all_x.size() < 2)
        throw ConditionError("growth fit needs nonzero function values");
    const bool large_side = hi >= 10.0;
    for (std::size_t i = 0; i < all_x.size(); ++i)
        if (!large_side || all_x[i] >= 0.0) {
            xs.push_back(all_x[i]);
            ys.push_back(all_y[i]);
        }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double den = n * sxx - sx * sx;
    if (!(den > 0.0))
        throw ConditionError("degenerate sample spread for the growth fit");
    GrowthBound g;
    g.alpha = (n * sxy - sx * sy) / den;
    double log_M = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < all_x.size(); ++i)
        log_M = std::max(log_M, all_y[i] - g.alpha * all_x[i]);
    g.M = std::exp(log_M);
    return g;
}

// Log-spaced moduli on a few rays.
inline std::vector<Complex> log_spaced_samples(double lo, double hi, int count, int rays = 3) {
    std::vector<Complex> out;
    for (int k = 0; k < rays; ++k) {
        const double angle = 0.3 + k * 2.0 * std::numbers::pi / rays;
        for (int i = 0; i < count; ++i) {
            const double r = lo * std::pow(hi / lo, count > 1 ? static_cast<double>(i) / (count - 1) : 0.0);
            out.push_back(std::polar(r, angle));
        }
    }
    return out;
}

} // namespace qsum
