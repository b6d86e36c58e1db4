#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "formal.hpp"
#include "newton.hpp"
#include "qborel.hpp"
#include "series.hpp"

// Substitution t -> t^2. A function of t^2 shifted by q equals the
// substituted function shifted by q^{1/2} = q1^2 with q1 = q^{1/4}, so the
// rewritten equation is again of the same form with base q1, shift powers
// 2j, weighted order 2m and delta 2*delta.
namespace qsum {

struct SquaredEquation {
    Equation eq; // base q1, shifts 2j
    double q1 = 1.0;
    int m_doubled = 0;
};

// F(t,z) = f(t^2,z).
inline TruncatedSeries square_t(const TruncatedSeries& f) {
    TruncatedSeries out(f.dims(), 2 * f.kt() - 1, f.kz());
    for (const auto& [k, c] : f.terms())
        out.set(Monomial{2 * k.n, k.beta}, c);
    if (f.truncated_nonzero())
        out.mark_truncated();
    return out;
}

inline SquaredEquation substitute_square(const Equation& eq) {
    SquaredEquation sq;
    sq.q1 = std::pow(eq.q, 0.25);
    sq.m_doubled = 2 * eq.m;
    Equation& e = sq.eq;
    e.q = sq.q1;
    e.delta = Rational(2 * eq.delta.num, eq.delta.den);
    e.m = 2 * eq.m;
    e.d = eq.d;
    e.window = Window{2 * eq.window.kt - 1, eq.window.kz};
    e.R = eq.R;
    for (const auto& t : eq.terms)
        e.add_term(Term{2 * t.j, t.alpha, square_t(t.coeff)});
    e.rhs = square_t(eq.rhs);
    return sq;
}

// The squared equation satisfies ord_t(A_{j,0}) >= max(0, 2j-2m0) and
// ord_t(A_{j,alpha}) >= max(2, 2j-2m0+2); the latter is the strong
// derivative-order condition for the squared equation. Indices j refer to
// the original shifts.
struct SquaredOrderReport {
    CheckReport doubled_bounds;
    CheckReport strong_order; // strong condition for the squared equation with 2*m0
    CheckReport doubling;     // ord_t(A) = 2 ord_t(a) termwise
};

inline SquaredOrderReport check_squared_order_bounds(const Equation& original, const SquaredEquation& sq, int m0) {
    SquaredOrderReport rep;
    bool any = false;
    for (const auto& t : sq.eq.terms) {
        const TOrder o = ord_t(t.coeff);
        if (o.infinite())
            continue;
        any = true;
        const int j = t.j / 2;
        const int need = t.has_derivative() ? std::max(2, 2 * j - 2 * m0 + 2) : std::max(0, 2 * j - 2 * m0);
        if (*o.value < need) {
            rep.doubled_bounds.verdict = Verdict::Fail;
            rep.doubled_bounds.offenders.push_back(describe_term(t.j, t.alpha) + ": ord_t=" + std::to_string(*o.value) +
                                                   " < " + std::to_string(need));
        }
    }
    rep.doubled_bounds.detail = rep.doubled_bounds.passed()
                                    ? (any ? "doubled order bounds hold" : "vacuous: all coefficients vanish")
                                    : "doubled order bounds fail";
    rep.strong_order = check_strong_derivative_order(sq.eq, 2 * m0);
    for (const auto& t : original.terms) {
        const TOrder a = ord_t(t.coeff);
        const TOrder A = ord_t(sq.eq.coefficient(2 * t.j, t.alpha));
        const bool same = a.infinite() ? A.infinite() : (!A.infinite() && *A.value == 2 * *a.value);
        if (!same) {
            rep.doubling.verdict = Verdict::Fail;
            rep.doubling.offenders.push_back(describe_term(t.j, t.alpha));
        }
    }
    rep.doubling.detail = rep.doubling.passed() ? "ord_t doubles termwise" : "ord_t does not double";
    return rep;
}

// Direction for the squared equation whose even grid indices reproduce
// the original spiral: u1(rho q1^{2m}) = u(q^{-1/4} rho^2 q^m) = u(lambda q^m).
inline Complex squared_direction(Complex lambda, double q) { return std::pow(q, 0.125) * std::sqrt(lambda); }

struct IdentityReport {
    std::vector<double> errors; // relative, per sample
    double max_error = 0.0;
    double tolerance = 1e-10;

    bool passed() const noexcept { return max_error <= tolerance; }
};

namespace square_detail {

inline void add_sample(IdentityReport& r, Complex lhs, Complex rhs) {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    const double e = scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
    r.errors.push_back(e);
    r.max_error = std::max(r.max_error, e);
}

inline Complex sum_at(const BorelFunction& u, Complex xi, std::span<const Complex> z0) {
    const DirectSum ds = direct_sum(u, to_qvalue(xi, u.q));
    if (xi != 0.0 && !(ds.tail_rel <= 1e-12))
        throw ConditionError("sample xi = (" + std::to_string(xi.real()) + "," + std::to_string(xi.imag()) +
                             ") lies outside the usable convergence region");
    return evaluate(ds.value.mantissa, 0.0, z0) * std::exp(ds.value.qexp * std::log(u.q));
}

} // namespace square_detail

// u1(xi, z) = u(q^{-1/4} xi^2, z) at each sample.
inline IdentityReport check_borel_square_identity(const BorelFunction& u, const BorelFunction& u1,
                                                  std::span<const Complex> xis, std::span<const Complex> z0,
                                                  double tolerance = 1e-10) {
    IdentityReport r;
    r.tolerance = tolerance;
    const double q = u.q;
    for (const Complex xi : xis) {
        const Complex lhs = square_detail::sum_at(u1, xi, z0);
        const Complex rhs = square_detail::sum_at(u, std::pow(q, -0.25) * xi * xi, z0);
        square_detail::add_sample(r, lhs, rhs);
    }
    return r;
}

// P1(rho, z) = q^{-m0/4} P(q^{-1/4} rho^2, z) at each sample.
inline IdentityReport check_charpoly_square_identity(const CharPoly& P, const CharPoly& P1, int m0, double q,
                                                     std::span<const Complex> rhos, std::span<const Complex> z0,
                                                     double tolerance = 1e-10) {
    IdentityReport r;
    r.tolerance = tolerance;
    for (const Complex rho : rhos) {
        const Complex lhs = P1.evaluate_at(rho, z0);
        const Complex rhs = std::pow(q, -0.25 * m0) * P.evaluate_at(std::pow(q, -0.25) * rho * rho, z0);
        square_detail::add_sample(r, lhs, rhs);
    }
    return r;
}

// Each root rho of P1 squares onto q^{1/4} times a root of P.
inline IdentityReport check_root_correspondence(const DirectionSet& S, const DirectionSet& S1, double q,
                                                double tolerance = 1e-10) {
    IdentityReport r;
    r.tolerance = tolerance;
    for (const Complex rho : S1.roots) {
        const Complex target = std::pow(q, -0.25) * rho * rho;
        double best = std::numeric_limits<double>::infinity();
        for (const Complex tau : S.roots)
            best = std::min(best, std::abs(target - tau) / std::abs(tau));
        r.errors.push_back(best);
        r.max_error = std::max(r.max_error, best);
    }
    return r;
}

// f(q^k t^2, z) against F(q^{k/2} t, z) with F(t,z) = f(t^2,z).
inline double square_shift_error(const TruncatedSeries& f, int k, double q, Complex t, std::span<const Complex> z) {
    const TruncatedSeries F = square_t(f);
    const Complex lhs = evaluate(f, std::pow(q, k) * t * t, z);
    const Complex rhs = evaluate(F, std::pow(q, 0.5 * k) * t, z);
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    return std::abs(lhs - rhs) / scale;
}

} // namespace qsum
