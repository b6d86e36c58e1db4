#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "scaled.hpp"
#include "series.hpp"

namespace qsum {

// No unique formal solution at this order: the diagonal coefficient c_n
// vanishes at z = 0.
class ResonanceError : public ConditionError {
public:
    explicit ResonanceError(int n)
        : ConditionError("c_" + std::to_string(n) + "(0) = 0: no unique formal solution at order " +
                         std::to_string(n)),
          n_(n) {}
    int order() const noexcept { return n_; }

private:
    int n_;
};

// One t-power of one coefficient: a_{j,alpha,p}(z) t^p sigma^j d^alpha.
struct TermPiece {
    int j = 0;
    int p = 0;
    std::vector<int> alpha;
    TruncatedSeries zcoef; // Kt = 1
    bool derivative = false;
};

inline std::vector<TermPiece> expand_terms(const Equation& eq) {
    std::vector<TermPiece> pieces;
    for (const auto& t : eq.terms) {
        const int deg = t.coeff.t_degree();
        for (int p = 0; p <= deg; ++p) {
            TruncatedSeries c = t_coefficient(t.coeff, p);
            if (c.is_zero())
                continue;
            pieces.push_back(TermPiece{t.j, p, t.alpha, std::move(c), t.has_derivative()});
        }
    }
    return pieces;
}

// Largest j with a_{j,0}(0,z) not identically zero; the q^{jn} growth of
// the diagonal coefficient c_n is divided out with it. Equals m0 whenever
// the polygon has the expected shape.
inline int dominant_shift(const std::vector<TermPiece>& pieces) {
    int jd = -1;
    for (const auto& pc : pieces)
        if (pc.p == 0 && !pc.derivative)
            jd = std::max(jd, pc.j);
    return jd;
}

struct FormalOptions {
    int kz = std::numeric_limits<int>::max(); // z-window cap
    double R1 = 0.0;                         // <= 0: half the data radius
    double zero_tol = 1e-12;
};

// X_n(z) = v_n(z) q^{n(n-1)/2}; only v_n is stored. The v_n are also the
// coefficients of the formal Borel transform.
struct FormalSolution {
    double q = 2.0;
    std::size_t d = 0;
    int count = 0; // highest computed order
    int shift = 0; // dominant shift used for scaling
    double R1 = 0.5;
    std::vector<TruncatedSeries> scaled;

    // X_n as a scaled series (mantissa v_n, exponent n(n-1)/2 in base q).
    ScaledSeries coefficient(int n) const { return make_scaled(scaled.at(n), 0.5 * n * (n - 1), q); }

    double log_norm(int n) const {
        const double v = z_norm(scaled.at(n), R1);
        return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(v);
    }
};

namespace formal_detail {

// Scaled weight of a piece at order n:
// q^{(j-p)(n-p) - p(p-1)/2 - shift*n}
inline double piece_weight(const TermPiece& pc, int n, int shift, double lq) {
    const double e = static_cast<double>(pc.j - pc.p) * (n - pc.p) - 0.5 * pc.p * (pc.p - 1) -
                     static_cast<double>(shift) * n;
    return std::exp(e * lq);
}

inline double rhs_weight(int n, int shift, double lq) {
    return std::exp((-0.5 * n * (n - 1) - static_cast<double>(shift) * n) * lq);
}

} // namespace formal_detail

// Coefficient recursion on the scaled unknowns. Matching t^n in the
// equation gives sum a_{j,alpha,p} q^{j(n-p)} d^alpha X_{n-p} = F_n; dividing
// by q^{n(n-1)/2 + shift*n} turns every factor into the weight above, all of
// moderate size on a polygon-constrained support.
inline FormalSolution solve_formal(const Equation& eq, int n_max, FormalOptions opt = {}) {
    if (n_max < 0)
        throw ConditionError("number of orders must be nonnegative");
    const auto pieces = expand_terms(eq);
    for (const auto& pc : pieces)
        if (pc.p == 0 && pc.derivative)
            throw ConditionError("derivative term " + describe_term(pc.j, pc.alpha) +
                                 " has a nonzero t^0 coefficient; the recursion would be implicit");
    const int shift = dominant_shift(pieces);
    if (shift < 0)
        throw ResonanceError(0);

    FormalSolution sol;
    sol.q = eq.q;
    sol.d = eq.d;
    sol.count = n_max;
    sol.shift = shift;
    sol.R1 = opt.R1 > 0.0 ? opt.R1 : 0.5 * eq.R;
    const int kz = std::min(opt.kz, eq.window.kz);
    const double lq = std::log(eq.q);
    const double tol = opt.zero_tol * std::max(1.0, [&] {
        double s = 0.0;
        for (const auto& pc : pieces)
            if (pc.p == 0)
                s = std::max(s, pc.zcoef.max_abs());
        return s;
    }());

    for (int n = 0; n <= n_max; ++n) {
        TruncatedSeries diag(eq.d, 1, kz);
        for (const auto& pc : pieces)
            if (pc.p == 0)
                diag = add(diag, scale(pc.zcoef, std::exp(static_cast<double>(pc.j - shift) * n * lq)));
        if (std::abs(diag.constant_term()) <= tol)
            throw ResonanceError(n);

        TruncatedSeries acc = scale(t_coefficient(eq.rhs, n), formal_detail::rhs_weight(n, shift, lq)).restricted(1, kz);
        for (const auto& pc : pieces) {
            if (pc.p == 0 || pc.p > n)
                continue;
            const TruncatedSeries& prev = sol.scaled[static_cast<std::size_t>(n - pc.p)];
            TruncatedSeries contrib = mul(pc.zcoef, pc.derivative ? dz_multi(prev, pc.alpha) : prev);
            acc = sub(acc, scale(contrib, formal_detail::piece_weight(pc, n, shift, lq)));
        }
        sol.scaled.push_back(mul(invert(diag), acc));
        if (sol.scaled.back().kz() < 1)
            throw NumericalError("z-truncation exhausted at order " + std::to_string(n) + "; increase Kz");
    }
    return sol;
}

struct ResidualReport {
    std::vector<double> residual; // per order, relative to the largest contribution
    std::vector<int> flagged;
    double max_residual = 0.0;
    double tolerance = 1e-10;

    bool passed() const noexcept { return flagged.empty(); }
};

// Substitutes the scaled solution back into the equation order by order.
inline ResidualReport verify_formal(const Equation& eq, const FormalSolution& sol, double tolerance = 1e-10) {
    ResidualReport r;
    r.tolerance = tolerance;
    const auto pieces = expand_terms(eq);
    const double lq = std::log(eq.q);
    for (int n = 0; n <= sol.count; ++n) {
        const double w = formal_detail::rhs_weight(n, sol.shift, lq);
        TruncatedSeries sum = negate(scale(t_coefficient(eq.rhs, n), w));
        double biggest = z_norm(sum, sol.R1);
        for (const auto& pc : pieces) {
            if (pc.p > n)
                continue;
            const TruncatedSeries& v = sol.scaled[static_cast<std::size_t>(n - pc.p)];
            TruncatedSeries c = scale(mul(pc.zcoef, pc.derivative ? dz_multi(v, pc.alpha) : v),
                                      formal_detail::piece_weight(pc, n, sol.shift, lq));
            biggest = std::max(biggest, z_norm(c, sol.R1));
            sum = add(sum, c);
        }
        const double res = biggest > 0.0 ? z_norm(sum, sol.R1) / biggest : 0.0;
        r.residual.push_back(res);
        r.max_residual = std::max(r.max_residual, res);
        if (!(res <= tolerance))
            r.flagged.push_back(n);
    }
    return r;
}

// ||X_n|| <= A h^n q^{n(n-1)/2} on the polydisc of radius R1.
struct GevreyFit {
    double A = 0.0;
    double h = 1.0;
    std::vector<double> log_norms; // ln M_n, M_n = sup-norm bound of X_n
    std::vector<double> g;         // (ln M_n - n(n-1)/2 ln q)/n, n >= 1; g[0] unused

    // Post-hoc check of the bound at every computed order.
    bool certificate_holds(double q) const {
        if (A == 0.0)
            return std::all_of(log_norms.begin(), log_norms.end(), [](double v) { return std::isinf(v); });
        const double lq = std::log(q);
        for (std::size_t n = 0; n < log_norms.size(); ++n) {
            const double bound = std::log(A) + n * std::log(h) + 0.5 * n * (n - 1.0) * lq;
            if (log_norms[n] > bound + 1e-12 * std::max(1.0, std::abs(bound)))
                return false;
        }
        return true;
    }
};

// Index range [first, last] of the last third of 1..count.
inline std::pair<int, int> stabilized_window(int count) {
    const int first = std::max(1, (2 * count + 2) / 3);
    return {first, count};
}

inline GevreyFit gevrey_fit(const FormalSolution& sol) {
    if (sol.count + 1 < 5)
        throw NumericalError("Gevrey fit needs at least 5 computed coefficients");
    GevreyFit fit;
    const double lq = std::log(sol.q);
    std::vector<double> lv; // ln ||v_n||
    for (int n = 0; n <= sol.count; ++n) {
        lv.push_back(sol.log_norm(n));
        fit.log_norms.push_back(lv.back() + 0.5 * n * (n - 1) * lq);
        fit.g.push_back(n == 0 ? 0.0 : lv.back() / n);
    }
    const bool all_zero = std::all_of(lv.begin(), lv.end(), [](double v) { return std::isinf(v); });
    if (all_zero)
        return fit;

    double log_h = -std::numeric_limits<double>::infinity();
    const auto [first, last] = stabilized_window(sol.count);
    for (int n = first; n <= last; ++n)
        log_h = std::max(log_h, fit.g[static_cast<std::size_t>(n)]);
    if (!std::isfinite(log_h))
        log_h = 0.0; // window vanishes identically; any h works
    fit.h = std::exp(log_h);
    double log_A = -std::numeric_limits<double>::infinity();
    for (int n = 0; n <= sol.count; ++n)
        log_A = std::max(log_A, lv[static_cast<std::size_t>(n)] - n * log_h);
    fit.A = std::exp(log_A);
    return fit;
}

} // namespace qsum
