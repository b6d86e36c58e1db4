#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "formal.hpp"
#include "newton.hpp"
#include "roots.hpp"
#include "scaled.hpp"
#include "series.hpp"

// Formal q-Borel transform u(xi,z) = sum_k X_k(z) q^{-k(k-1)/2} xi^k, the
// functional equation it satisfies, and its continuation along the
// geometric grid lambda*q^m.
//
// Transform rule: B[t^p sigma^j X](xi) = xi^p q^{-p(p-1)/2} u(q^{j-p} xi).
// Every term of the equation therefore becomes a shifted copy of u with
// shift s = j - p; the largest shift is m0 and its coefficient is the
// leading symbol L(xi,z). Solving for the largest shift gives an explicit
// step from the grid values below to the next one.
namespace qsum {

class RadiusTooSmall : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct BorelFunction {
    double q = 2.0;
    std::size_t d = 0;
    double R1 = 0.5;
    std::vector<TruncatedSeries> coeffs; // u_k, identical to FormalSolution::scaled
    double radius_est = std::numeric_limits<double>::infinity();
};

inline BorelFunction borel(const FormalSolution& sol) {
    BorelFunction u;
    u.q = sol.q;
    u.d = sol.d;
    u.R1 = sol.R1;
    u.coeffs = sol.scaled;
    // Root test over the last third of the orders.
    double worst = -std::numeric_limits<double>::infinity();
    const auto [first, last] = stabilized_window(sol.count);
    for (int k = first; k <= last && k >= 1; ++k) {
        const double ln = sol.log_norm(k);
        if (std::isfinite(ln))
            worst = std::max(worst, ln / k);
    }
    u.radius_est = std::isfinite(worst) ? std::exp(-worst) : std::numeric_limits<double>::infinity();
    return u;
}

struct BorelTerm {
    int s = 0; // q-shift of the argument
    int p = 0; // power of xi
    std::vector<int> alpha;
    TruncatedSeries coeffz; // Kt = 1
    double scale = 1.0;     // q^{-p(p-1)/2}
    bool derivative = false;
};

struct BorelEquation {
    double q = 2.0;
    std::size_t d = 0;
    int m0 = 0;
    int reach = 1; // m0 + largest t-power: how far back one step looks
    std::vector<BorelTerm> terms;
    TruncatedSeries rhsB;  // g(xi,z) as a series in xi (stored in the t slot)
    TruncatedSeries leadL; // L(xi,z) as a series in xi

    int lead_degree() const { return std::max(leadL.t_degree(), 0); }
};

inline BorelEquation borel_equation(const Equation& eq, int m0) {
    BorelEquation be;
    be.q = eq.q;
    be.d = eq.d;
    be.m0 = m0;
    const double lq = std::log(eq.q);
    int pmax = 0;
    for (auto& pc : expand_terms(eq)) {
        BorelTerm bt;
        bt.s = pc.j - pc.p;
        bt.p = pc.p;
        bt.alpha = pc.alpha;
        bt.derivative = pc.derivative;
        bt.scale = std::exp(-0.5 * pc.p * (pc.p - 1) * lq);
        bt.coeffz = std::move(pc.zcoef);
        if (bt.s > m0)
            throw OrderBoundViolation("term " + describe_term(pc.j, pc.alpha) + " with t^" + std::to_string(pc.p) +
                                      " has shift " + std::to_string(bt.s) + " above m0=" + std::to_string(m0));
        if (bt.s == m0 && bt.derivative)
            throw OrderBoundViolation("derivative term " + describe_term(pc.j, pc.alpha) +
                                      " reaches the leading shift; the input violates the order bounds");
        pmax = std::max(pmax, pc.p);
        be.terms.push_back(std::move(bt));
    }
    be.reach = std::max(1, m0 + pmax);

    be.rhsB = TruncatedSeries(eq.d, eq.rhs.kt(), eq.rhs.kz());
    for (const auto& [k, c] : eq.rhs.terms())
        be.rhsB.set(k, c * std::exp(-0.5 * k.n * (k.n - 1) * lq));

    be.leadL = TruncatedSeries(eq.d, pmax + 1, eq.window.kz);
    for (const auto& bt : be.terms)
        if (bt.s == m0)
            be.leadL = add(be.leadL, place_at_t(scale(bt.coeffz, bt.scale), bt.p, pmax + 1));
    if (be.leadL.constant_term() == 0.0 && be.leadL.is_zero())
        throw ConditionError("leading symbol vanishes identically");
    return be;
}

// Roots of L(xi, 0).
inline std::vector<Complex> leading_symbol_roots(const BorelEquation& be) {
    std::vector<Complex> c;
    for (int p = 0; p <= be.lead_degree(); ++p)
        c.push_back(t_coefficient(be.leadL, p).constant_term());
    while (!c.empty() && c.back() == 0.0)
        c.pop_back();
    if (c.size() < 2)
        return {};
    return durand_kerner(c);
}

namespace borel_detail {

// Series in xi (t slot) evaluated at a scaled point, as a scaled z-series.
inline ScaledSeries evaluate_xi(const TruncatedSeries& s, const QValue& xi, double q) {
    std::vector<ScaledSeries> parts;
    const int deg = s.t_degree();
    for (int n = 0; n <= deg; ++n) {
        TruncatedSeries c = t_coefficient(s, n);
        if (c.is_zero())
            continue;
        const double phase = n * std::arg(xi.mantissa);
        const double e = n * (xi.qexp + std::log(std::abs(xi.mantissa)) / std::log(q));
        parts.push_back(make_scaled(scale(c, std::polar(1.0, phase)), e, q));
    }
    if (parts.empty())
        return ScaledSeries{TruncatedSeries(s.dims(), 1, s.kz()), 0.0};
    return scaled_sum(parts, q);
}

inline double log_q_abs(const QValue& v, double q) { return v.qexp + std::log(std::abs(v.mantissa)) / std::log(q); }

} // namespace borel_detail

// Direct summation of the Borel series at xi with an estimate of the
// neglected tail, both relative to the sum.
struct DirectSum {
    ScaledSeries value;
    double tail_rel = 0.0;
};

inline DirectSum direct_sum(const BorelFunction& u, const QValue& xi) {
    DirectSum out;
    const double q = u.q;
    if (xi.is_zero()) {
        if (u.coeffs.empty())
            throw NumericalError("Borel function has no coefficients");
        out.value = make_scaled(u.coeffs.front(), 0.0, q);
        return out;
    }
    const double lq = std::log(q);
    const double log_abs_xi = borel_detail::log_q_abs(xi, q) * lq; // natural log |xi|
    std::vector<ScaledSeries> parts;
    double top_log = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < u.coeffs.size(); ++k) {
        const double phase = static_cast<double>(k) * std::arg(xi.mantissa);
        parts.push_back(make_scaled(scale(u.coeffs[k], std::polar(1.0, phase)),
                                    static_cast<double>(k) * borel_detail::log_q_abs(xi, q), q));
    }
    out.value = scaled_sum(parts, q);
    const double sum_log = log_norm(out.value, u.R1, q);
    // Geometric majorant of the tail from the last few stored terms.
    const std::size_t K = u.coeffs.size();
    const double rho = std::isfinite(u.radius_est) ? std::exp(log_abs_xi) / u.radius_est : 0.0;
    if (K == 0)
        return out;
    if (rho >= 1.0) {
        out.tail_rel = std::numeric_limits<double>::infinity();
        return out;
    }
    for (std::size_t k = K >= 3 ? K - 3 : 0; k < K; ++k) {
        const double n = z_norm(u.coeffs[k], u.R1);
        if (n == 0.0)
            continue;
        top_log = std::max(top_log, std::log(n) + static_cast<double>(k) * log_abs_xi);
    }
    if (!std::isfinite(top_log))
        return out;
    const double tail_log = top_log + std::log(std::max(rho, 1e-300)) - std::log1p(-rho);
    out.tail_rel = std::isfinite(sum_log) ? std::exp(tail_log - sum_log) : std::numeric_limits<double>::infinity();
    return out;
}

struct SpiralOptions {
    int m_max = 40;
    std::optional<int> m_min;                // default: -m_max
    int kz = std::numeric_limits<int>::max(); // z-window cap for stored values
    double seed_tol = 1e-14;
    double singular_tol = 1e-10;
    double min_clearance = 1e-9;
};

struct SpiralGrid {
    double q = 2.0;
    Complex lambda = 1.0;
    int m_min = 0;
    int m_max = 0;
    int m_start = 0; // last directly summed index; the march starts above it
    double theta_budget = std::numbers::pi;
    double R1 = 0.5;
    double lower_log_majorant = 0.0; // ln sup |u| on |xi| <= |lambda q^{m_min}|
    std::vector<ScaledSeries> values;  // index m - m_min

    const ScaledSeries& at(int m) const { return values.at(static_cast<std::size_t>(m - m_min)); }
    bool covers(int m) const { return m >= m_min && m <= m_max; }
    QValue point(int m) const { return make_qvalue(lambda, static_cast<double>(m), q); }
};

inline double clearance_from_roots(const std::vector<Complex>& roots, Complex lambda) {
    double best = std::numbers::pi;
    for (const auto& r : roots)
        if (r != 0.0)
            best = std::min(best, angular_distance(std::arg(r), std::arg(lambda)));
    return best;
}

inline SpiralGrid continue_spiral(const BorelEquation& be, const BorelFunction& u, Complex lambda,
                                  SpiralOptions opt = {}) {
    if (lambda == 0.0)
        throw ConditionError("direction lambda must be nonzero");
    const double q = be.q;
    const double lq = std::log(q);
    SpiralGrid g;
    g.q = q;
    g.lambda = lambda;
    g.R1 = u.R1;
    g.theta_budget = clearance_from_roots(leading_symbol_roots(be), lambda);
    if (g.theta_budget < opt.min_clearance)
        throw SingularDirectionError("direction arg(lambda)=" + std::to_string(std::arg(lambda)) +
                                     " lies on a singular ray");

    const int m_min_req = opt.m_min.value_or(-opt.m_max);
    const double log_q_lambda = std::log(std::abs(lambda)) / lq;

    // Seed: the largest index whose direct sum meets the tail tolerance
    // inside half the estimated radius.
    int start = opt.m_max;
    if (std::isfinite(u.radius_est))
        start = std::min(start, static_cast<int>(std::floor(std::log(u.radius_est / 2.0) / lq - log_q_lambda)));
    const int floor_index = std::min(m_min_req, start) - 400;
    std::optional<DirectSum> seed;
    for (; start >= floor_index; --start) {
        DirectSum ds = direct_sum(u, make_qvalue(lambda, start, q));
        if (ds.tail_rel <= opt.seed_tol) {
            seed = std::move(ds);
            break;
        }
    }
    if (!seed)
        throw RadiusTooSmall("no grid point reaches the seed tail tolerance " + std::to_string(opt.seed_tol) +
                             " with " + std::to_string(u.coeffs.size()) + " Borel coefficients");
    g.m_start = start;
    g.m_min = std::min(m_min_req, start - be.reach + 1);
    g.m_max = std::max(opt.m_max, g.m_min);

    for (int m = g.m_min; m <= std::min(start, g.m_max); ++m) {
        ScaledSeries v = m == start ? seed->value : direct_sum(u, make_qvalue(lambda, m, q)).value;
        g.values.push_back(ScaledSeries{v.mantissa.restricted(1, opt.kz), v.qexp});
    }

    // |u(xi)| <= sum ||u_k|| |xi|^k on the small disk below the grid.
    {
        const double lx = std::log(std::abs(lambda)) + g.m_min * lq;
        double top = -std::numeric_limits<double>::infinity();
        std::vector<double> logs;
        for (std::size_t k = 0; k < u.coeffs.size(); ++k) {
            const double n = z_norm(u.coeffs[k], u.R1);
            if (n > 0.0)
                logs.push_back(std::log(n) + k * lx);
        }
        for (double l : logs)
            top = std::max(top, l);
        double s = 0.0;
        for (double l : logs)
            s += std::exp(l - top);
        g.lower_log_majorant = std::isfinite(top) ? top + std::log(s) : -std::numeric_limits<double>::infinity();
    }

    const double lead_scale = [&] {
        double s = 0.0;
        for (const auto& [k, c] : be.leadL.terms())
            if (k.z_degree() == 0)
                s = std::max(s, std::abs(c));
        return s;
    }();
    const int deg = be.lead_degree();

    for (int M = start + 1; M <= g.m_max; ++M) {
        const QValue xi = make_qvalue(lambda, static_cast<double>(M - be.m0), q);
        const double lxi = borel_detail::log_q_abs(xi, q);
        const double phase = std::arg(xi.mantissa);

        std::vector<ScaledSeries> parts;
        ScaledSeries g_at = borel_detail::evaluate_xi(be.rhsB, xi, q);
        parts.push_back(g_at);
        for (const auto& bt : be.terms) {
            if (bt.s == be.m0)
                continue;
            const ScaledSeries& prev = g.at(M - be.m0 + bt.s);
            TruncatedSeries body = bt.derivative ? dz_multi(prev.mantissa, bt.alpha) : prev.mantissa;
            body = mul(bt.coeffz, body);
            const Complex rot = -std::polar(1.0, bt.p * phase) * bt.scale;
            parts.push_back(make_scaled(scale(body, rot), prev.qexp + bt.p * lxi, q));
        }
        ScaledSeries numer = scaled_sum(parts, q);
        ScaledSeries lead = borel_detail::evaluate_xi(be.leadL, xi, q);

        const double lead0 = std::abs(lead.mantissa.constant_term());
        const double guard_log = std::log(opt.singular_tol * std::max(lead_scale, 1e-300)) +
                                 std::max(0.0, deg * lxi * lq);
        if (lead0 == 0.0 || std::log(lead0) + lead.qexp * lq < guard_log)
            throw SingularDirectionError("leading symbol nearly vanishes at grid index " + std::to_string(M), M);

        TruncatedSeries val = mul(numer.mantissa, invert(lead.mantissa)).restricted(1, opt.kz);
        if (val.kz() < 1)
            throw NumericalError("z-truncation exhausted at grid index " + std::to_string(M) + "; increase Kz");
        g.values.push_back(make_scaled(val, numer.qexp - lead.qexp, q));
    }
    return g;
}

// |u*(lambda q^m, z)| <= C H^m q^{m^2/2} on the polydisc, m = 0..m_max.
struct SpiralBoundFit {
    double C = 0.0;
    double H = 1.0;
    std::vector<double> log_norms;  // index m
    std::vector<double> diagnostic; // (ln||u*_m|| - m^2/2 ln q)/m, index m (0 unused)

    bool certificate_holds(double q) const {
        if (C == 0.0)
            return std::all_of(log_norms.begin(), log_norms.end(), [](double v) { return std::isinf(v); });
        const double lq = std::log(q);
        for (std::size_t m = 0; m < log_norms.size(); ++m) {
            const double bound = std::log(C) + m * std::log(H) + 0.5 * m * m * lq;
            if (log_norms[m] > bound + 1e-12 * std::max(1.0, std::abs(bound)))
                return false;
        }
        return true;
    }
};

// C anchored at m = 0, then the smallest H that covers every later index.
inline SpiralBoundFit fit_spiral_bound(const SpiralGrid& g) {
    if (!g.covers(0))
        throw NumericalError("spiral grid must cover m = 0");
    SpiralBoundFit fit;
    const double lq = std::log(g.q);
    std::vector<double> a; // ln||u*_m|| - m^2/2 ln q
    for (int m = 0; m <= g.m_max; ++m) {
        const double ln = log_norm(g.at(m), g.R1, g.q);
        fit.log_norms.push_back(ln);
        a.push_back(ln - 0.5 * m * m * lq);
        fit.diagnostic.push_back(m == 0 ? 0.0 : a.back() / m);
    }
    if (std::all_of(fit.log_norms.begin(), fit.log_norms.end(), [](double v) { return std::isinf(v); }))
        return fit;
    double logC = a[0];
    if (!std::isfinite(logC))
        logC = *std::max_element(a.begin(), a.end());
    double logH = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m < a.size(); ++m)
        if (std::isfinite(a[m]))
            logH = std::max(logH, (a[m] - logC) / static_cast<double>(m));
    fit.C = std::exp(logC);
    fit.H = std::isfinite(logH) ? std::exp(logH) : 1.0;
    return fit;
}

} // namespace qsum
