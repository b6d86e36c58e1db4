#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <compare>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace qsum {

using Complex = std::complex<double>;

inline bool is_finite(Complex c) noexcept { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

// Exponent of a monomial t^n z^beta.
struct Monomial {
    int n = 0;
    std::vector<int> beta;

    int z_degree() const noexcept { return std::accumulate(beta.begin(), beta.end(), 0); }

    friend auto operator<=>(const Monomial&, const Monomial&) = default;
    friend bool operator==(const Monomial&, const Monomial&) = default;
};

// Result of ord_t. An empty value means the series vanishes identically.
// `truncation_limited` is set when the series is zero on its window but
// nonzero content was discarded to get there; the value is then Kt, a lower
// bound only.
struct TOrder {
    std::optional<int> value;
    bool truncation_limited = false;

    bool infinite() const noexcept { return !value.has_value(); }
};

// Truncated power series in t and z_1..z_d with complex coefficients.
//
// The window is n < Kt and |beta| < Kz. Coefficients outside the window are
// unknown, not zero: every operation works on the intersection of its
// inputs' windows and never extrapolates. Storage is sparse and ordered
// lexicographically by (n, beta) so iteration is deterministic.
class TruncatedSeries {
public:
    using Map = std::map<Monomial, Complex>;

    TruncatedSeries() = default;
    TruncatedSeries(std::size_t d, int kt, int kz) : d_(d), kt_(std::max(kt, 0)), kz_(std::max(kz, 0)) {}

    static TruncatedSeries constant(std::size_t d, int kt, int kz, Complex c) {
        TruncatedSeries s(d, kt, kz);
        s.set(Monomial{0, std::vector<int>(d, 0)}, c);
        return s;
    }

    static TruncatedSeries monomial(std::size_t d, int kt, int kz, int n, std::vector<int> beta, Complex c = 1.0) {
        TruncatedSeries s(d, kt, kz);
        s.set(Monomial{n, std::move(beta)}, c);
        return s;
    }

    // z_axis is 1-based.
    static TruncatedSeries z_variable(std::size_t d, int kt, int kz, std::size_t axis) {
        std::vector<int> beta(d, 0);
        beta.at(axis - 1) = 1;
        return monomial(d, kt, kz, 0, std::move(beta));
    }

    std::size_t dims() const noexcept { return d_; }
    int kt() const noexcept { return kt_; }
    int kz() const noexcept { return kz_; }
    const Map& terms() const noexcept { return coeffs_; }
    bool truncated_nonzero() const noexcept { return lost_; }
    bool is_zero() const noexcept { return coeffs_.empty(); }

    bool in_window(const Monomial& k) const noexcept { return k.n >= 0 && k.n < kt_ && k.z_degree() < kz_; }

    // Stores c at k. Out-of-window nonzero values are dropped and remembered
    // in the truncation flag; exact zeros are pruned.
    void set(Monomial k, Complex c) {
        if (k.beta.size() != d_)
            throw DimensionMismatch("monomial has " + std::to_string(k.beta.size()) + " z-exponents, series has d=" +
                                    std::to_string(d_));
        if (!is_finite(c))
            throw NumericalError("non-finite coefficient at t^" + std::to_string(k.n));
        if (!in_window(k)) {
            if (c != 0.0)
                lost_ = true;
            return;
        }
        if (c == 0.0)
            coeffs_.erase(k);
        else
            coeffs_[std::move(k)] = c;
    }

    void accumulate(const Monomial& k, Complex c) {
        if (c == 0.0)
            return;
        if (!in_window(k)) {
            lost_ = true;
            return;
        }
        auto [it, inserted] = coeffs_.try_emplace(k, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0)
                coeffs_.erase(it);
        }
    }

    Complex coeff(int n, std::span<const int> beta) const {
        auto it = coeffs_.find(Monomial{n, std::vector<int>(beta.begin(), beta.end())});
        return it == coeffs_.end() ? Complex{} : it->second;
    }
    Complex coeff(const Monomial& k) const {
        auto it = coeffs_.find(k);
        return it == coeffs_.end() ? Complex{} : it->second;
    }
    Complex constant_term() const { return coeff(0, std::vector<int>(d_, 0)); }

    void mark_truncated() noexcept { lost_ = true; }

    // Same content, smaller (or equal) window.
    TruncatedSeries restricted(int kt, int kz) const {
        TruncatedSeries out(d_, std::min(kt, kt_), std::min(kz, kz_));
        out.lost_ = lost_;
        for (const auto& [k, c] : coeffs_)
            out.accumulate(k, c);
        return out;
    }

    // Highest t-exponent present, -1 for the zero series.
    int t_degree() const noexcept {
        int deg = -1;
        for (const auto& [k, c] : coeffs_)
            deg = std::max(deg, k.n);
        return deg;
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (const auto& [k, c] : coeffs_)
            m = std::max(m, std::abs(c));
        return m;
    }

    friend bool operator==(const TruncatedSeries& a, const TruncatedSeries& b) {
        return a.d_ == b.d_ && a.kt_ == b.kt_ && a.kz_ == b.kz_ && a.coeffs_ == b.coeffs_;
    }

private:
    std::size_t d_ = 0;
    int kt_ = 0;
    int kz_ = 0;
    Map coeffs_;
    bool lost_ = false;
};

namespace detail {

inline void require_same_d(const TruncatedSeries& a, const TruncatedSeries& b) {
    if (a.dims() != b.dims())
        throw DimensionMismatch("series dimensions differ: d=" + std::to_string(a.dims()) + " vs d=" +
                                std::to_string(b.dims()));
}

} // namespace detail

inline TruncatedSeries add(const TruncatedSeries& a, const TruncatedSeries& b) {
    detail::require_same_d(a, b);
    TruncatedSeries out(a.dims(), std::min(a.kt(), b.kt()), std::min(a.kz(), b.kz()));
    if (a.truncated_nonzero() || b.truncated_nonzero())
        out.mark_truncated();
    for (const auto& [k, c] : a.terms())
        out.accumulate(k, c);
    for (const auto& [k, c] : b.terms())
        out.accumulate(k, c);
    return out;
}

inline TruncatedSeries scale(const TruncatedSeries& a, Complex s) {
    TruncatedSeries out(a.dims(), a.kt(), a.kz());
    if (a.truncated_nonzero())
        out.mark_truncated();
    if (s == 0.0)
        return out;
    for (const auto& [k, c] : a.terms())
        out.set(k, c * s);
    return out;
}

inline TruncatedSeries negate(const TruncatedSeries& a) { return scale(a, -1.0); }

inline TruncatedSeries sub(const TruncatedSeries& a, const TruncatedSeries& b) { return add(a, negate(b)); }

// Cauchy product on the common window.
inline TruncatedSeries mul(const TruncatedSeries& a, const TruncatedSeries& b) {
    detail::require_same_d(a, b);
    TruncatedSeries out(a.dims(), std::min(a.kt(), b.kt()), std::min(a.kz(), b.kz()));
    if (a.truncated_nonzero() || b.truncated_nonzero())
        out.mark_truncated();
    Monomial k{0, std::vector<int>(a.dims(), 0)};
    for (const auto& [ka, ca] : a.terms()) {
        if (!out.in_window(Monomial{ka.n, ka.beta})) {
            if (!b.is_zero())
                out.mark_truncated();
            continue;
        }
        for (const auto& [kb, cb] : b.terms()) {
            k.n = ka.n + kb.n;
            for (std::size_t i = 0; i < k.beta.size(); ++i)
                k.beta[i] = ka.beta[i] + kb.beta[i];
            out.accumulate(k, ca * cb);
        }
    }
    return out;
}

// Partial derivative of the given order along z_axis (1-based). The z-window
// shrinks by `order`: the top coefficients of the result would need data
// beyond the input window.
inline TruncatedSeries dz(const TruncatedSeries& a, std::size_t axis, int order = 1) {
    if (axis < 1 || axis > a.dims())
        throw DimensionMismatch("dz axis " + std::to_string(axis) + " outside 1.." + std::to_string(a.dims()));
    TruncatedSeries out(a.dims(), a.kt(), a.kz() - order);
    if (a.truncated_nonzero())
        out.mark_truncated();
    for (const auto& [k, c] : a.terms()) {
        int e = k.beta[axis - 1];
        if (e < order)
            continue;
        double falling = 1.0;
        for (int i = 0; i < order; ++i)
            falling *= static_cast<double>(e - i);
        Monomial nk = k;
        nk.beta[axis - 1] -= order;
        out.accumulate(nk, c * falling);
    }
    return out;
}

// Applies d^alpha for a full multi-index.
inline TruncatedSeries dz_multi(const TruncatedSeries& a, std::span<const int> alpha) {
    TruncatedSeries out = a;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] > 0)
            out = dz(out, i + 1, alpha[i]);
    return out;
}

namespace detail {

// Every key of the window in lexicographic order of (n, beta).
inline std::vector<Monomial> window_keys(std::size_t d, int kt, int kz) {
    std::vector<Monomial> keys;
    if (kt <= 0 || kz <= 0)
        return keys;
    std::vector<std::vector<int>> betas;
    std::vector<int> beta(d, 0);
    // Lexicographic enumeration of beta with |beta| < kz.
    auto rec = [&](auto&& self, std::size_t pos, int budget) -> void {
        if (pos == d) {
            betas.push_back(beta);
            return;
        }
        for (int e = 0; e <= budget; ++e) {
            beta[pos] = e;
            self(self, pos + 1, budget - e);
        }
        beta[pos] = 0;
    };
    rec(rec, 0, kz - 1);
    keys.reserve(static_cast<std::size_t>(kt) * betas.size());
    for (int n = 0; n < kt; ++n)
        for (const auto& b : betas)
            keys.push_back(Monomial{n, b});
    return keys;
}

} // namespace detail

// Multiplicative inverse on the full window. Solves a*b = 1 key by key in
// lexicographic order; every proper divisor of a key precedes it.
inline TruncatedSeries invert(const TruncatedSeries& a) {
    const Complex a0 = a.constant_term();
    if (a0 == 0.0 || a.kt() == 0 || a.kz() == 0)
        throw NotAUnit("series has vanishing constant term");
    TruncatedSeries out(a.dims(), a.kt(), a.kz());
    if (a.truncated_nonzero() || a.terms().size() > 1)
        out.mark_truncated();
    const Complex inv0 = 1.0 / a0;
    std::vector<std::pair<Monomial, Complex>> nonconst;
    for (const auto& [k, c] : a.terms())
        if (k.n != 0 || k.z_degree() != 0)
            nonconst.emplace_back(k, c);

    Monomial diff{0, std::vector<int>(a.dims(), 0)};
    for (const auto& key : detail::window_keys(a.dims(), a.kt(), a.kz())) {
        if (key.n == 0 && key.z_degree() == 0) {
            out.set(key, inv0);
            continue;
        }
        Complex acc = 0.0;
        for (const auto& [ka, ca] : nonconst) {
            if (ka.n > key.n)
                continue;
            bool divides = true;
            diff.n = key.n - ka.n;
            for (std::size_t i = 0; i < diff.beta.size(); ++i) {
                diff.beta[i] = key.beta[i] - ka.beta[i];
                if (diff.beta[i] < 0) {
                    divides = false;
                    break;
                }
            }
            if (divides)
                acc += ca * out.coeff(diff);
        }
        out.accumulate(key, -acc * inv0);
    }
    return out;
}

// Finite sum of the stored truncation; no tail estimate.
inline Complex evaluate(const TruncatedSeries& a, Complex t0, std::span<const Complex> z0) {
    if (z0.size() != a.dims())
        throw DimensionMismatch("evaluation point has " + std::to_string(z0.size()) + " z-coordinates, series has d=" +
                                std::to_string(a.dims()));
    Complex sum = 0.0;
    for (const auto& [k, c] : a.terms()) {
        Complex term = c * std::pow(t0, k.n);
        for (std::size_t i = 0; i < k.beta.size(); ++i)
            if (k.beta[i] > 0)
                term *= std::pow(z0[i], k.beta[i]);
        sum += term;
    }
    return sum;
}

inline Complex evaluate(const TruncatedSeries& a, Complex t0) {
    std::vector<Complex> zero(a.dims(), 0.0);
    return evaluate(a, t0, zero);
}

inline TOrder ord_t(const TruncatedSeries& a) {
    if (a.is_zero()) {
        if (a.truncated_nonzero())
            return TOrder{a.kt(), true};
        return TOrder{};
    }
    return TOrder{a.terms().begin()->first.n, false};
}

// z-series (Kt = 1) holding the coefficient of t^n.
inline TruncatedSeries t_coefficient(const TruncatedSeries& a, int n) {
    TruncatedSeries out(a.dims(), 1, a.kz());
    if (n >= a.kt()) {
        out.mark_truncated();
        return out;
    }
    for (const auto& [k, c] : a.terms())
        if (k.n == n)
            out.set(Monomial{0, k.beta}, c);
    return out;
}

// Series whose t^n coefficient is the z-series a_n; used to assemble
// results from per-order pieces.
inline TruncatedSeries place_at_t(const TruncatedSeries& zseries, int n, int kt) {
    TruncatedSeries out(zseries.dims(), kt, zseries.kz());
    for (const auto& [k, c] : zseries.terms())
        out.set(Monomial{n + k.n, k.beta}, c);
    return out;
}

// Exact division by t^k; returns nullopt when a stored coefficient below
// t^k is nonzero.
inline std::optional<TruncatedSeries> divide_by_t_power(const TruncatedSeries& a, int k) {
    TruncatedSeries out(a.dims(), a.kt() - k, a.kz());
    if (a.truncated_nonzero())
        out.mark_truncated();
    for (const auto& [key, c] : a.terms()) {
        if (key.n < k)
            return std::nullopt;
        out.set(Monomial{key.n - k, key.beta}, c);
    }
    return out;
}

// Coefficient-sum bound sum |c| R^{|beta|}, an upper bound of the sup-norm
// on the closed polydisc of radius R (for fixed t-exponent content).
inline double z_norm(const TruncatedSeries& a, double radius) {
    double s = 0.0;
    for (const auto& [k, c] : a.terms())
        s += std::abs(c) * std::pow(radius, k.z_degree());
    return s;
}

// Evaluates the t-variable at t0, leaving a z-series (Kt = 1).
inline TruncatedSeries evaluate_t(const TruncatedSeries& a, Complex t0) {
    TruncatedSeries out(a.dims(), 1, a.kz());
    if (a.truncated_nonzero())
        out.mark_truncated();
    for (const auto& [k, c] : a.terms())
        out.accumulate(Monomial{0, k.beta}, c * std::pow(t0, k.n));
    return out;
}

// Evaluates the z-variables, leaving a series in t only (d = 0).
inline TruncatedSeries evaluate_z(const TruncatedSeries& a, std::span<const Complex> z0) {
    TruncatedSeries out(0, a.kt(), a.kz());
    for (const auto& [k, c] : a.terms()) {
        Complex term = c;
        for (std::size_t i = 0; i < k.beta.size(); ++i)
            if (k.beta[i] > 0)
                term *= std::pow(z0[i], k.beta[i]);
        out.accumulate(Monomial{k.n, {}}, term);
    }
    return out;
}

// Root-test estimate of the z-convergence radius from the degree shells of
// the stored coefficients. Infinite for polynomial data.
inline double estimate_z_radius(const TruncatedSeries& a) {
    std::map<int, double> shells;
    for (const auto& [k, c] : a.terms())
        shells[k.z_degree()] += std::abs(c);
    if (shells.empty())
        return INFINITY;
    int top = shells.rbegin()->first;
    if (top < 4 || top + 1 < a.kz())
        return INFINITY;
    double r = INFINITY;
    for (const auto& [deg, norm] : shells)
        if (deg >= top / 2 && deg > 0 && norm > 0.0)
            r = std::min(r, std::pow(norm, -1.0 / deg));
    return r;
}

} // namespace qsum
