#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "series.hpp"

namespace qsum {

// Exact rational, used for delta so that j + delta*|alpha| <= m is decided
// without floating-point ties.
struct Rational {
    std::int64_t num = 1;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
        if (den == 0)
            throw ParseError("rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

    friend bool operator==(const Rational&, const Rational&) = default;
};

// Truncation window applied to every coefficient at construction.
struct Window {
    int kt = 41;
    int kz = 8;

    friend bool operator==(const Window&, const Window&) = default;
};

// a_{j,alpha}(t,z) (sigma_q)^j d_z^alpha
struct Term {
    int j = 0;
    std::vector<int> alpha;
    TruncatedSeries coeff;

    int alpha_order() const { return std::accumulate(alpha.begin(), alpha.end(), 0); }
    bool has_derivative() const { return alpha_order() > 0; }

    friend bool operator==(const Term&, const Term&) = default;
};

inline std::string describe_term(int j, const std::vector<int>& alpha) {
    std::string s = "S^" + std::to_string(j);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] > 0)
            s += " Dz" + std::to_string(i + 1) + "^" + std::to_string(alpha[i]);
    return s + "(X)";
}

// sum a_{j,alpha}(t,z) (sigma_q)^j d_z^alpha X = F(t,z)
struct Equation {
    double q = 2.0;
    Rational delta{1, 1};
    int m = 1;
    std::size_t d = 0;
    std::vector<Term> terms; // sorted by (j, alpha), unique
    TruncatedSeries rhs;
    double R = 1.0; // polydisc radius of the z-data
    Window window;

    const Term* find(int j, const std::vector<int>& alpha) const {
        for (const auto& t : terms)
            if (t.j == j && t.alpha == alpha)
                return &t;
        return nullptr;
    }

    // Zero series on the equation's window when (j, alpha) is absent.
    TruncatedSeries coefficient(int j, const std::vector<int>& alpha) const {
        const Term* t = find(j, alpha);
        return t ? t->coeff : TruncatedSeries(d, window.kt, window.kz);
    }

    // Inserts a term, merging coefficients with an existing (j, alpha).
    void add_term(Term t) {
        for (auto& existing : terms) {
            if (existing.j == t.j && existing.alpha == t.alpha) {
                existing.coeff = add(existing.coeff, t.coeff);
                return;
            }
        }
        terms.push_back(std::move(t));
        std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
            return a.j != b.j ? a.j < b.j : a.alpha < b.alpha;
        });
    }

    // Largest t-exponent stored in any coefficient.
    int max_t_degree() const {
        int deg = 0;
        for (const auto& t : terms)
            deg = std::max(deg, t.coeff.t_degree());
        return deg;
    }

    int max_alpha_order() const {
        int a = 0;
        for (const auto& t : terms)
            if (!t.coeff.is_zero())
                a = std::max(a, t.alpha_order());
        return a;
    }

    bool weighted_order_ok(const Term& t) const {
        // j + (num/den)|alpha| <= m  <=>  j*den + num*|alpha| <= m*den
        return static_cast<std::int64_t>(t.j) * delta.den + delta.num * t.alpha_order() <=
               static_cast<std::int64_t>(m) * delta.den;
    }

    friend bool operator==(const Equation&, const Equation&) = default;
};

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return violations.empty(); }
};

inline ValidationReport validate(const Equation& eq) {
    ValidationReport r;
    if (!(eq.q > 1.0) || !std::isfinite(eq.q))
        r.violations.push_back("q must exceed 1 (got " + std::to_string(eq.q) + ")");
    if (eq.delta.num <= 0)
        r.violations.push_back("delta must be positive (got " + eq.delta.str() + ")");
    if (eq.m < 1)
        r.violations.push_back("m must be a positive integer (got " + std::to_string(eq.m) + ")");
    for (const auto& t : eq.terms) {
        if (t.j < 0)
            r.violations.push_back("negative shift power in " + describe_term(t.j, t.alpha));
        if (t.alpha.size() != eq.d)
            r.violations.push_back("multi-index size differs from d in " + describe_term(t.j, t.alpha));
        if (std::any_of(t.alpha.begin(), t.alpha.end(), [](int a) { return a < 0; }))
            r.violations.push_back("negative derivative order in " + describe_term(t.j, t.alpha));
        if (t.coeff.dims() != eq.d)
            r.violations.push_back("coefficient dimension differs from d in " + describe_term(t.j, t.alpha));
        if (!eq.weighted_order_ok(t))
            r.violations.push_back("weighted order j+delta|alpha| = " + std::to_string(t.j) + "+" + eq.delta.str() +
                                   "*" + std::to_string(t.alpha_order()) + " exceeds m=" + std::to_string(eq.m) +
                                   " in " + describe_term(t.j, t.alpha));
        if (ord_t(t.coeff).truncation_limited)
            r.warnings.push_back("coefficient of " + describe_term(t.j, t.alpha) +
                                 " vanishes on the truncation window; ord_t is truncation-limited");
    }
    if (eq.rhs.dims() != eq.d)
        r.violations.push_back("right-hand side dimension differs from d");
    const bool no_terms =
        std::all_of(eq.terms.begin(), eq.terms.end(), [](const Term& t) { return t.coeff.is_zero(); });
    if (no_terms && eq.rhs.is_zero())
        r.warnings.push_back("degenerate equation: no nonzero terms and zero right-hand side");
    return r;
}

// Radius of the z-polydisc on which the data are trusted: the smallest
// root-test radius of any coefficient or the right-hand side, capped at 1.
inline double estimate_data_radius(const Equation& eq) {
    double r = 1.0;
    for (const auto& t : eq.terms)
        r = std::min(r, estimate_z_radius(t.coeff));
    r = std::min(r, estimate_z_radius(eq.rhs));
    return r;
}

} // namespace qsum
