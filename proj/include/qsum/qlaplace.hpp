#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "formal.hpp"
#include "newton.hpp"
#include "qborel.hpp"
#include "scaled.hpp"
#include "series.hpp"

// Jacobi theta kernel, the pole spiral and its disk neighborhoods, the
// discrete q-Laplace sum W(t,z) = sum_m u*(lambda q^m, z) / theta(lambda q^m / t),
// and checks that W solves the equation and has the formal solution as its
// q-Gevrey asymptotic expansion.
namespace qsum {

class GridTooShort : public NumericalError {
public:
    GridTooShort(const std::string& msg, int needed_min, int needed_max)
        : NumericalError(msg), needed_min_(needed_min), needed_max_(needed_max) {}
    int needed_min() const noexcept { return needed_min_; }
    int needed_max() const noexcept { return needed_max_; }

private:
    int needed_min_;
    int needed_max_;
};

// The evaluation point sits on or next to a pole of W.
class PoleProximity : public ConditionError {
public:
    using ConditionError::ConditionError;
};

using ThetaValue = QValue;

// theta_q(x) = sum_{n in Z} q^{-n(n-1)/2} x^n with x = q^{lq_abs} e^{i phase}.
// Terms peak near n = lq_abs + 1/2 and decay like a Gaussian on both sides;
// summation runs outward from the peak until both sides fall below 1e-18
// of it.
inline ThetaValue theta_polar(double lq_abs, double phase, double q) {
    if (!(q > 1.0))
        throw ConditionError("theta needs q > 1");
    if (!std::isfinite(lq_abs))
        throw ConditionError("theta is undefined at x = 0");
    const double lq = std::log(q);
    const auto expo = [&](double n) { return -0.5 * n * (n - 1.0) + n * lq_abs; };
    const double center = std::round(lq_abs + 0.5);
    const double top = expo(center);
    const double cut = std::log(1e-18) / lq;
    Complex acc = 0.0;
    const auto term = [&](double n) { return std::polar(std::exp((expo(n) - top) * lq), n * phase); };
    acc += term(center);
    for (double k = 1.0;; k += 1.0) {
        const double lo = center - k, hi = center + k;
        const bool lo_live = expo(lo) - top > cut;
        const bool hi_live = expo(hi) - top > cut;
        if (!lo_live && !hi_live)
            break;
        if (hi_live)
            acc += term(hi);
        if (lo_live)
            acc += term(lo);
    }
    return make_qvalue(acc, top, q);
}

inline ThetaValue theta(Complex x, double q) {
    if (x == 0.0)
        throw ConditionError("theta is undefined at x = 0");
    return theta_polar(std::log(std::abs(x)) / std::log(q), std::arg(x), q);
}

struct SpiralGeometry {
    Complex lambda = 1.0;
    double epsilon = 0.3;
    double q = 2.0;

    // Below this radius the disks |1 + lambda q^m / t| <= eps are pairwise
    // disjoint.
    double disjointness_threshold() const { return (q - 1.0) / (q + 1.0); }
    bool disjoint() const { return epsilon < disjointness_threshold(); }
};

enum class Zone { Outside, Inside, NearBoundary };

inline const char* to_string(Zone z) {
    switch (z) {
    case Zone::Outside:
        return "outside";
    case Zone::Inside:
        return "inside";
    case Zone::NearBoundary:
        return "near-boundary";
    }
    return "?";
}

struct ZoneResult {
    Zone zone = Zone::Outside;
    int m = 0;              // witnessing index when not outside
    double distance = 0.0;  // min_m |1 + lambda q^m / t|
};

inline ZoneResult zone_membership(const SpiralGeometry& g, Complex t, double boundary_tol = 1e-9) {
    if (t == 0.0)
        throw ConditionError("zone membership needs t != 0");
    const double lq = std::log(g.q);
    const double center = std::log(std::abs(t) / std::abs(g.lambda)) / lq;
    const double spread = g.epsilon < 1.0 ? std::log(1.0 / (1.0 - g.epsilon)) / lq + 2.0 : 60.0;
    ZoneResult best;
    best.distance = std::numeric_limits<double>::infinity();
    for (int m = static_cast<int>(std::floor(center - spread)); m <= static_cast<int>(std::ceil(center + spread)); ++m) {
        const double dist = std::abs(1.0 + g.lambda * std::pow(g.q, m) / t);
        if (dist < best.distance) {
            best.distance = dist;
            best.m = m;
        }
    }
    if (best.distance <= g.epsilon * (1.0 - boundary_tol))
        best.zone = Zone::Inside;
    else if (best.distance <= g.epsilon * (1.0 + boundary_tol))
        best.zone = Zone::NearBoundary;
    else
        best.zone = Zone::Outside;
    return best;
}

struct LaplaceOptions {
    double epsilon = 0.0;      // reject t inside the eps-disks; 0 checks poles only
    double pole_tol = 1e-8;
    double tail_tol = 1e-12;   // both tails relative to the partial sum
    double negligible = 1e-20; // grid terms below this fraction are left out
    int tail_steps = 400;
};

struct LaplaceResult {
    ScaledSeries value; // W(t, .)
    double upper_tail = 0.0; // relative majorants
    double lower_tail = 0.0;
    double dropped = 0.0;    // relative size of grid terms left out
};

namespace laplace_detail {

inline ThetaValue kernel_theta(const SpiralGrid& g, Complex t, int m) {
    const double lq = std::log(g.q);
    const double la = std::log(std::abs(g.lambda)) / lq + m - std::log(std::abs(t)) / lq;
    return theta_polar(la, std::arg(g.lambda) - std::arg(t), g.q);
}

inline double log_abs_theta(const ThetaValue& th, double q) { return log_abs(th, q); }

// ln of a^{...} sum of exp(logs), ignoring -inf entries.
inline double log_sum_exp(const std::vector<double>& logs) {
    double top = -std::numeric_limits<double>::infinity();
    for (double l : logs)
        top = std::max(top, l);
    if (!std::isfinite(top))
        return top;
    double s = 0.0;
    for (double l : logs)
        s += std::exp(l - top);
    return top + std::log(s);
}

} // namespace laplace_detail

// Local envelope of ||u*_m|| over the top third of the grid, used to bound
// the terms beyond m_max: N_{ma} H^{m-ma} q^{(m^2 - ma^2)/2}.
struct TopEnvelope {
    int anchor = 0;
    double log_anchor = -std::numeric_limits<double>::infinity();
    double log_H = 0.0;
};

inline TopEnvelope top_envelope(const SpiralGrid& g) {
    const double lq = std::log(g.q);
    TopEnvelope env;
    const int lo = std::max(g.m_min, g.m_max - std::max(2, (g.m_max - g.m_min + 1) / 3));
    env.anchor = lo;
    const auto a = [&](int m) { return log_norm(g.at(m), g.R1, g.q) - 0.5 * m * m * lq; };
    env.log_anchor = log_norm(g.at(lo), g.R1, g.q);
    const double a0 = a(lo);
    env.log_H = -std::numeric_limits<double>::infinity();
    for (int m = lo + 1; m <= g.m_max; ++m) {
        const double am = a(m);
        if (std::isfinite(am) && std::isfinite(a0))
            env.log_H = std::max(env.log_H, (am - a0) / (m - lo));
        else if (std::isfinite(am))
            env.log_H = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(env.log_H) && env.log_H < 0)
        env.log_H = 0.0;
    return env;
}

inline LaplaceResult q_laplace_series(const SpiralGrid& g, Complex t, LaplaceOptions opt = {}) {
    if (t == 0.0)
        throw PoleProximity("the q-Laplace sum is not evaluated at t = 0");
    const double q = g.q;
    const double lq = std::log(q);
    {
        SpiralGeometry geo{g.lambda, std::max(opt.epsilon, opt.pole_tol), q};
        const ZoneResult z = zone_membership(geo, t);
        if (z.zone != Zone::Outside)
            throw PoleProximity("t = (" + std::to_string(t.real()) + "," + std::to_string(t.imag()) +
                                ") lies within the excluded disk around the pole -lambda q^" + std::to_string(z.m));
    }

    // Grid terms u*_m / theta_m in scaled form.
    std::vector<ScaledSeries> terms;
    std::vector<double> logs;
    for (int m = g.m_min; m <= g.m_max; ++m) {
        const ThetaValue th = laplace_detail::kernel_theta(g, t, m);
        if (th.is_zero())
            throw PoleProximity("theta vanishes at grid index " + std::to_string(m));
        const ScaledSeries& v = g.at(m);
        ScaledSeries s{scale(v.mantissa, 1.0 / th.mantissa), v.qexp - th.qexp};
        logs.push_back(log_norm(s, g.R1, q));
        terms.push_back(std::move(s));
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    LaplaceResult out;
    if (!std::isfinite(top)) {
        out.value = ScaledSeries{TruncatedSeries(g.values.front().mantissa.dims(), 1, g.values.front().mantissa.kz()), 0.0};
        return out;
    }
    std::vector<ScaledSeries> kept;
    std::vector<double> dropped_logs;
    const double cut = top + std::log(opt.negligible);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (logs[i] >= cut)
            kept.push_back(terms[i]);
        else
            dropped_logs.push_back(logs[i]);
    }
    out.value = scaled_sum(kept, q);
    double partial_log = log_norm(out.value, g.R1, q);
    if (!std::isfinite(partial_log))
        partial_log = top;
    out.dropped = std::exp(laplace_detail::log_sum_exp(dropped_logs) - partial_log);

    // Upper tail: envelope of the top of the grid against theta growth.
    const TopEnvelope env = top_envelope(g);
    std::vector<double> up;
    int needed_max = g.m_max;
    if (std::isfinite(env.log_anchor)) {
        if (!std::isfinite(env.log_H))
            throw GridTooShort("grid values vanish and reappear near m_max; the upper tail cannot be bounded",
                               g.m_min, g.m_max + opt.tail_steps);
        double prev = std::numeric_limits<double>::infinity();
        bool converged = false;
        for (int m = g.m_max + 1; m <= g.m_max + opt.tail_steps; ++m) {
            const double lb = env.log_anchor + (m - env.anchor) * env.log_H +
                              0.5 * (static_cast<double>(m) * m - static_cast<double>(env.anchor) * env.anchor) * lq;
            const double lt = lb - laplace_detail::log_abs_theta(laplace_detail::kernel_theta(g, t, m), q);
            up.push_back(lt);
            if (lt < partial_log + std::log(1e-30) && lt < prev) {
                converged = true;
                break;
            }
            prev = lt;
        }
        if (!converged)
            throw GridTooShort("upper-tail majorant of the kernel sum does not decay", g.m_min,
                               g.m_max + opt.tail_steps);
        out.upper_tail = std::exp(laplace_detail::log_sum_exp(up) - partial_log);
        // Smallest extension after which the remaining tail meets the tolerance.
        for (std::size_t k = 0; k < up.size(); ++k) {
            std::vector<double> rest(up.begin() + static_cast<std::ptrdiff_t>(k), up.end());
            if (std::exp(laplace_detail::log_sum_exp(rest) - partial_log) <= opt.tail_tol) {
                needed_max = g.m_max + static_cast<int>(k);
                break;
            }
        }
    }

    // Lower tail: sup |u| on the small disk against theta growth.
    std::vector<double> low;
    int needed_min = g.m_min;
    if (std::isfinite(g.lower_log_majorant)) {
        double prev = std::numeric_limits<double>::infinity();
        bool converged = false;
        for (int m = g.m_min - 1; m >= g.m_min - opt.tail_steps; --m) {
            const double lt =
                g.lower_log_majorant - laplace_detail::log_abs_theta(laplace_detail::kernel_theta(g, t, m), q);
            low.push_back(lt);
            if (lt < partial_log + std::log(1e-30) && lt < prev) {
                converged = true;
                break;
            }
            prev = lt;
        }
        if (!converged)
            throw GridTooShort("lower-tail majorant of the kernel sum does not decay", g.m_min - opt.tail_steps,
                               g.m_max);
        out.lower_tail = std::exp(laplace_detail::log_sum_exp(low) - partial_log);
        for (std::size_t k = 0; k < low.size(); ++k) {
            std::vector<double> rest(low.begin() + static_cast<std::ptrdiff_t>(k), low.end());
            if (std::exp(laplace_detail::log_sum_exp(rest) - partial_log) <= opt.tail_tol) {
                needed_min = g.m_min - static_cast<int>(k);
                break;
            }
        }
    }

    if (out.upper_tail > opt.tail_tol || out.lower_tail > opt.tail_tol)
        throw GridTooShort("kernel sum tails exceed " + std::to_string(opt.tail_tol) + " of the partial sum; grid range [" +
                               std::to_string(needed_min) + ", " + std::to_string(needed_max) + "] is needed",
                           needed_min, needed_max);
    return out;
}

inline Complex q_laplace(const SpiralGrid& g, Complex t, std::span<const Complex> z0, LaplaceOptions opt = {}) {
    const LaplaceResult r = q_laplace_series(g, t, opt);
    return evaluate(r.value.mantissa, 0.0, z0) * std::exp(r.value.qexp * std::log(g.q));
}

inline Complex q_laplace(const SpiralGrid& g, Complex t, LaplaceOptions opt = {}) {
    const std::vector<Complex> z0(g.values.front().mantissa.dims(), 0.0);
    return q_laplace(g, t, z0, opt);
}

// Runs f(i) for i in [0, n) on up to `jobs` threads; each index writes only
// its own output slot.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers)
                    f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

struct ResidualSample {
    Complex t;
    Complex W;
    double residual = 0.0;
};

struct ResidualCheck {
    std::vector<ResidualSample> samples;
    double max_residual = 0.0;
};

// sum a_{j,alpha}(t,z) d^alpha W(q^j t, z) - F(t,z) at z = z0.
inline ResidualCheck residual_check(const Equation& eq, const SpiralGrid& g, std::span<const Complex> samples,
                                    std::span<const Complex> z0, LaplaceOptions opt = {}, int jobs = 1) {
    if (z0.size() != eq.d)
        throw DimensionMismatch("evaluation point has the wrong dimension");
    ResidualCheck rc;
    rc.samples.resize(samples.size());
    const double lq = std::log(eq.q);
    parallel_for(samples.size(), jobs, [&](std::size_t i) {
        const Complex t = samples[i];
        std::map<int, TruncatedSeries> W; // shift j -> W(q^j t, .)
        for (const auto& term : eq.terms)
            if (!W.contains(term.j)) {
                const LaplaceResult r = q_laplace_series(g, t * std::pow(eq.q, term.j), opt);
                W.emplace(term.j, scale(r.value.mantissa, std::exp(r.value.qexp * lq)));
            }
        Complex lhs = 0.0;
        for (const auto& term : eq.terms) {
            const TruncatedSeries a = evaluate_t(term.coeff, t);
            const TruncatedSeries body = term.has_derivative() ? dz_multi(W.at(term.j), term.alpha) : W.at(term.j);
            lhs += evaluate(mul(a, body), 0.0, z0);
        }
        const Complex f = evaluate(eq.rhs, t, z0);
        ResidualSample s;
        s.t = t;
        s.W = W.contains(0) ? evaluate(W.at(0), 0.0, z0) : q_laplace(g, t, z0, opt);
        s.residual = std::abs(lhs - f);
        rc.samples[i] = s;
    });
    for (const auto& s : rc.samples)
        rc.max_residual = std::max(rc.max_residual, s.residual);
    return rc;
}

inline ResidualCheck residual_check(const Equation& eq, const SpiralGrid& g, std::span<const Complex> samples,
                                    LaplaceOptions opt = {}, int jobs = 1) {
    const std::vector<Complex> z0(eq.d, 0.0);
    return residual_check(eq, g, samples, z0, opt, jobs);
}

struct AsymptoticOptions {
    double epsilon = 0.3;
    int N_max = 12;
    double r = 0.1;
    int rays = 8;
    int radii = 12;
    std::vector<Complex> z0;        // default origin
    Complex offset = 0.0;            // added to W; fault injection
    double growth_factor = 1.5;      // rho growth over the last third that counts as divergence
    double slope_fraction = 0.5;     // E_N must scale at least like |t|^{fraction * N}
    int jobs = 1;
    LaplaceOptions laplace{};
};

struct ResumReport {
    double epsilon = 0.0;
    std::vector<Complex> samples;
    std::vector<Complex> W;
    std::vector<std::vector<double>> EN; // [N][sample]
    std::vector<double> rho;             // index N; rho[0] = eps * max E_0
    std::vector<double> slopes;          // pooled log-log slope of E_N vs |t|, index N (0 unused)
    double M = 0.0;
    double H = 0.0;
    Verdict verdict = Verdict::Skipped;
    std::string detail;
    int failed_at = -1;

    // E_N bound (M H^N / eps) q^{N(N-1)/2} |t|^N; row N, sample k.
    double bound(int N, std::size_t k, double q) const {
        return M * std::pow(H, N) / epsilon * std::exp(0.5 * N * (N - 1.0) * std::log(q)) *
               std::pow(std::abs(samples[k]), N);
    }
};

// Sample rays avoid the exact negative axis; radii are geometric in
// [r/20, r]; points in the eps-disks are dropped.
inline std::vector<Complex> asymptotic_samples(const SpiralGeometry& geo, double r, int rays, int radii) {
    std::vector<Complex> out;
    for (int k = 0; k < rays; ++k) {
        const double angle = -std::numbers::pi + (k + 0.5) * 2.0 * std::numbers::pi / rays;
        for (int i = 0; i < radii; ++i) {
            const double rad = r * std::pow(1.0 / 20.0, radii > 1 ? static_cast<double>(i) / (radii - 1) : 0.0);
            const Complex t = std::polar(rad, angle);
            if (zone_membership(geo, t).zone == Zone::Outside)
                out.push_back(t);
        }
    }
    return out;
}

inline ResumReport asymptotic_check(const FormalSolution& sol, const SpiralGrid& g, AsymptoticOptions opt = {}) {
    if (opt.N_max > sol.count)
        throw ConditionError("N_max exceeds the computed formal order");
    if (opt.N_max < 1)
        throw ConditionError("N_max must be at least 1");
    const double q = sol.q;
    const double lq = std::log(q);
    SpiralGeometry geo{g.lambda, opt.epsilon, q};
    if (!geo.disjoint())
        throw ConditionError("epsilon " + std::to_string(opt.epsilon) + " is not below the disjointness threshold " +
                             std::to_string(geo.disjointness_threshold()));
    std::vector<Complex> z0 = opt.z0.empty() ? std::vector<Complex>(sol.d, 0.0) : opt.z0;

    ResumReport rep;
    rep.epsilon = opt.epsilon;
    rep.samples = asymptotic_samples(geo, opt.r, opt.rays, opt.radii);
    if (rep.samples.empty())
        throw ConditionError("every sample point falls inside the excluded disks");
    const std::size_t S = rep.samples.size();
    rep.W.resize(S);
    LaplaceOptions lo = opt.laplace;
    lo.epsilon = 0.0;
    parallel_for(S, opt.jobs, [&](std::size_t k) { rep.W[k] = q_laplace(g, rep.samples[k], z0, lo) + opt.offset; });

    // X_n(z0) t^n, from scaled coefficients in the log domain.
    std::vector<Complex> v0;
    for (int n = 0; n <= opt.N_max; ++n)
        v0.push_back(evaluate(sol.scaled[static_cast<std::size_t>(n)], 0.0, z0));
    rep.EN.assign(static_cast<std::size_t>(opt.N_max + 1), std::vector<double>(S, 0.0));
    for (std::size_t k = 0; k < S; ++k) {
        const Complex t = rep.samples[k];
        Complex partial = 0.0;
        for (int N = 0; N <= opt.N_max; ++N) {
            rep.EN[N][k] = std::abs(rep.W[k] - partial);
            if (v0[N] != 0.0) {
                const double lmag = std::log(std::abs(v0[N])) + 0.5 * N * (N - 1.0) * lq + N * std::log(std::abs(t));
                partial += std::polar(std::exp(lmag), std::arg(v0[N]) + N * std::arg(t));
            }
        }
    }

    // M from N = 0, then the smallest H covering every row.
    double e0 = 0.0;
    for (double e : rep.EN[0])
        e0 = std::max(e0, e);
    rep.M = opt.epsilon * e0;
    rep.rho.assign(static_cast<std::size_t>(opt.N_max + 1), 0.0);
    rep.rho[0] = rep.M;
    double logH = -std::numeric_limits<double>::infinity();
    for (int N = 1; N <= opt.N_max; ++N) {
        double lr = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < S; ++k) {
            const double e = rep.EN[N][k];
            if (e <= 0.0)
                continue;
            const double l =
                (std::log(e * opt.epsilon) - 0.5 * N * (N - 1.0) * lq - N * std::log(std::abs(rep.samples[k]))) / N;
            lr = std::max(lr, l);
        }
        rep.rho[N] = std::exp(lr);
        if (rep.M > 0.0)
            logH = std::max(logH, lr - std::log(rep.M) / N);
    }
    rep.H = std::isfinite(logH) ? std::exp(logH) : (rep.M > 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (rep.M == 0.0) {
        // W and the partial sums vanish identically only for the zero solution.
        const bool all_zero = std::all_of(rep.EN.begin(), rep.EN.end(), [](const std::vector<double>& row) {
            return std::all_of(row.begin(), row.end(), [](double e) { return e == 0.0; });
        });
        rep.H = all_zero ? 0.0 : std::numeric_limits<double>::infinity();
    }

    // Remainder scaling: pooled least-squares slope of ln E_N against ln|t|.
    rep.slopes.assign(static_cast<std::size_t>(opt.N_max + 1), 0.0);
    for (int N = 1; N <= opt.N_max; ++N) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t k = 0; k < S; ++k) {
            const double e = rep.EN[N][k];
            if (e <= 0.0)
                continue;
            const double x = std::log(std::abs(rep.samples[k]));
            const double y = std::log(e);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        const double den = cnt * sxx - sx * sx;
        rep.slopes[N] = (cnt >= 2 && den > 0.0) ? (cnt * sxy - sx * sy) / den : std::numeric_limits<double>::infinity();
    }

    rep.verdict = Verdict::Pass;
    rep.detail = "remainders satisfy the q-Gevrey bound on all samples";
    if (!std::isfinite(rep.H)) {
        rep.verdict = Verdict::Fail;
        rep.detail = "no finite envelope (M, H) exists";
        return rep;
    }
    for (int N = 1; N <= opt.N_max; ++N)
        if (rep.slopes[N] < opt.slope_fraction * N) {
            rep.verdict = Verdict::Fail;
            rep.failed_at = N;
            rep.detail = "remainder does not scale as |t|^" + std::to_string(N) + " (fitted exponent " +
                         std::to_string(rep.slopes[N]) + ")";
            return rep;
        }
    const auto [first, last] = stabilized_window(opt.N_max);
    bool increasing = last > first;
    for (int N = first + 1; N <= last; ++N)
        increasing = increasing && rep.rho[N] > rep.rho[N - 1];
    if (increasing && rep.rho[last] > opt.growth_factor * rep.rho[first]) {
        rep.verdict = Verdict::Fail;
        rep.failed_at = last;
        rep.detail = "normalized remainders grow monotonically over the last third of N";
    }
    return rep;
}

} // namespace qsum
