#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "roots.hpp"
#include "series.hpp"

// t-Newton polygon of an equation, the structural conditions built on it,
// the characteristic polynomial and the singular directions.
namespace qsum {

class IndeterminatePolygon : public ConditionError {
public:
    using ConditionError::ConditionError;
};

class OrderBoundViolation : public ConditionError {
public:
    using ConditionError::ConditionError;
};

enum class Verdict { Pass, Fail, Skipped };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass:
        return "pass";
    case Verdict::Fail:
        return "fail";
    case Verdict::Skipped:
        return "skipped";
    }
    return "?";
}

struct CheckReport {
    Verdict verdict = Verdict::Pass;
    std::string detail;
    std::vector<std::string> offenders;

    bool passed() const noexcept { return verdict == Verdict::Pass; }
};

struct SupportPoint {
    int j = 0;
    int ord = 0;
    std::vector<int> alpha;
};

struct LatticePoint {
    int x = 0;
    int y = 0;
    friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

// Slope of a boundary piece; `infinite` marks the closing vertical half-line.
struct Slope {
    Rational value{0, 1};
    bool infinite = false;
};

// Region {x <= x_max, y >= phi(x)} with phi the convex, nondecreasing,
// piecewise-linear function through `vertices` (constant left of the first).
struct NewtonPolygon {
    std::vector<SupportPoint> support;
    std::vector<LatticePoint> vertices;
    std::vector<Slope> slopes;
    std::optional<int> m0;
    int m = 0;

    bool empty() const noexcept { return vertices.empty(); }
    int x_max() const { return vertices.back().x; }

    // phi(x) * den compared exactly: returns sign of (y - phi(x)) for x a
    // rational num/den with x <= x_max.
    int compare_to_boundary(std::int64_t xnum, std::int64_t xden, std::int64_t y) const {
        const auto& v = vertices;
        // y*den vs phi(x)*den
        if (xnum <= static_cast<std::int64_t>(v.front().x) * xden) {
            const std::int64_t lhs = y, rhs = v.front().y;
            return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
        }
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            if (xnum <= static_cast<std::int64_t>(v[i + 1].x) * xden) {
                // phi(x) = y_i + (x - x_i)(y_{i+1}-y_i)/(x_{i+1}-x_i)
                const std::int64_t dx = v[i + 1].x - v[i].x, dy = v[i + 1].y - v[i].y;
                const std::int64_t lhs = y * xden * dx;
                const std::int64_t rhs = static_cast<std::int64_t>(v[i].y) * xden * dx + (xnum - v[i].x * xden) * dy;
                return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
            }
        }
        return -2; // right of x_max
    }

    bool contains(int x, int y) const {
        if (empty() || x > x_max())
            return false;
        return compare_to_boundary(x, 1, y) >= 0;
    }

    bool interior(int x, int y) const {
        if (empty() || x >= x_max())
            return false;
        return compare_to_boundary(x, 1, y) > 0;
    }
};

inline NewtonPolygon polygon(const Equation& eq) {
    NewtonPolygon p;
    p.m = eq.m;
    std::map<int, int> lowest; // j -> min ord
    for (const auto& t : eq.terms) {
        const TOrder o = ord_t(t.coeff);
        if (o.truncation_limited)
            throw IndeterminatePolygon("ord_t of the coefficient of " + describe_term(t.j, t.alpha) +
                                       " is not determined within the truncation window");
        if (o.infinite())
            continue;
        p.support.push_back(SupportPoint{t.j, *o.value, t.alpha});
        auto [it, inserted] = lowest.try_emplace(t.j, *o.value);
        if (!inserted)
            it->second = std::min(it->second, *o.value);
    }
    if (lowest.empty())
        return p;

    // A corner of the staircase min_{j' >= x} ord is a point strictly lower
    // than everything to its right; only those can be hull vertices.
    std::vector<LatticePoint> corners;
    int running = INT32_MAX;
    for (auto it = lowest.rbegin(); it != lowest.rend(); ++it) {
        if (it->second < running) {
            corners.push_back(LatticePoint{it->first, it->second});
            running = it->second;
        }
    }
    std::reverse(corners.begin(), corners.end());

    // Lower convex chain, left to right.
    auto cross = [](const LatticePoint& o, const LatticePoint& a, const LatticePoint& b) {
        return static_cast<std::int64_t>(a.x - o.x) * (b.y - o.y) - static_cast<std::int64_t>(a.y - o.y) * (b.x - o.x);
    };
    for (const auto& pt : corners) {
        while (p.vertices.size() >= 2 && cross(p.vertices[p.vertices.size() - 2], p.vertices.back(), pt) <= 0)
            p.vertices.pop_back();
        p.vertices.push_back(pt);
    }

    p.slopes.push_back(Slope{Rational(0, 1), false});
    for (std::size_t i = 0; i + 1 < p.vertices.size(); ++i)
        p.slopes.push_back(Slope{Rational(p.vertices[i + 1].y - p.vertices[i].y, p.vertices[i + 1].x - p.vertices[i].x),
                                 false});
    p.slopes.push_back(Slope{Rational(0, 1), true});
    return p;
}

struct ShapeResult {
    std::optional<int> m0;
    std::string detail;

    bool passed() const noexcept { return m0.has_value(); }
};

// The region must be {x <= m, y >= max(0, x - m0)} for some 0 <= m0 < m.
inline ShapeResult check_polygon_shape(NewtonPolygon& p) {
    ShapeResult r;
    if (p.empty()) {
        r.detail = "empty polygon: the equation has no nonzero terms";
        return r;
    }
    const auto& v = p.vertices;
    if (v.size() != 2) {
        r.detail = "polygon has " + std::to_string(v.size()) + " vertices; expected exactly (m0,0) and (m,m-m0)";
        return r;
    }
    if (v[0].y != 0) {
        r.detail = "horizontal edge at y=" + std::to_string(v[0].y) + "; expected y=0 (a_{j,0}(0,z) must not vanish for some j)";
        return r;
    }
    if (v[1].x != p.m) {
        r.detail = "rightmost vertex at x=" + std::to_string(v[1].x) + "; expected x=m=" + std::to_string(p.m);
        return r;
    }
    const int m0 = v[0].x;
    if (m0 < 0 || m0 >= p.m || v[1].y != p.m - m0) {
        r.detail = "sloped edge from (" + std::to_string(v[0].x) + ",0) to (" + std::to_string(v[1].x) + "," +
                   std::to_string(v[1].y) + ") does not have slope 1";
        return r;
    }
    r.m0 = m0;
    p.m0 = m0;
    r.detail = "m0=" + std::to_string(m0);
    return r;
}

// Support points of derivative terms must lie in the open interior.
inline CheckReport check_interior_derivatives(const NewtonPolygon& p) {
    CheckReport r;
    bool any = false;
    for (const auto& s : p.support) {
        if (std::all_of(s.alpha.begin(), s.alpha.end(), [](int a) { return a == 0; }))
            continue;
        any = true;
        if (!p.interior(s.j, s.ord)) {
            r.verdict = Verdict::Fail;
            r.offenders.push_back(describe_term(s.j, s.alpha) + " at (" + std::to_string(s.j) + "," +
                                  std::to_string(s.ord) + ") is not interior");
        }
    }
    r.detail = r.passed() ? (any ? "all derivative terms interior" : "vacuous: no derivative terms")
                          : "derivative term on or outside the boundary";
    return r;
}

// ord_t(a_{j,alpha}) >= max(0, j-m0) for alpha = 0 and >= max(1, j-m0+1)
// otherwise. Entailed by the shape and interior conditions; a failure
// after both passed is a bug.
inline CheckReport check_order_bounds(const Equation& eq, int m0, bool shape_and_interior_hold = true) {
    CheckReport r;
    if (!shape_and_interior_hold) {
        r.verdict = Verdict::Skipped;
        r.detail = "not applicable: shape or interior condition fails";
        return r;
    }
    for (const auto& t : eq.terms) {
        const TOrder o = ord_t(t.coeff);
        if (o.infinite())
            continue;
        const int need = t.has_derivative() ? std::max(1, t.j - m0 + 1) : std::max(0, t.j - m0);
        if (*o.value < need)
            r.offenders.push_back(describe_term(t.j, t.alpha) + ": ord_t=" + std::to_string(*o.value) + " < " +
                                  std::to_string(need));
    }
    if (!r.offenders.empty())
        throw OrderBoundViolation("internal inconsistency: shape and interior conditions hold but the order bound fails for " +
                               r.offenders.front());
    r.detail = "order bounds hold";
    return r;
}

// b_{j,0} = a_{j,0} / t^{j-m0} for m0 < j <= m.
inline std::map<int, TruncatedSeries> extract_b(const Equation& eq, int m0) {
    std::map<int, TruncatedSeries> b;
    const std::vector<int> zero(eq.d, 0);
    for (int j = m0 + 1; j <= eq.m; ++j) {
        const TruncatedSeries a = eq.coefficient(j, zero);
        auto q = divide_by_t_power(a, j - m0);
        if (!q)
            throw OrderBoundViolation("a_{" + std::to_string(j) + ",0} is not divisible by t^" + std::to_string(j - m0));
        b.emplace(j, std::move(*q));
    }
    return b;
}

// Largest coefficient magnitude of the equation, the scale for zero tests.
inline double coefficient_scale(const Equation& eq) {
    double s = 0.0;
    for (const auto& t : eq.terms)
        s = std::max(s, t.coeff.max_abs());
    return s > 0.0 ? s : 1.0;
}

inline CheckReport check_nondegenerate(const Equation& eq, const std::map<int, TruncatedSeries>& b, int m0,
                            double zero_tol = 1e-12) {
    CheckReport r;
    const double tol = zero_tol * coefficient_scale(eq);
    const Complex a_m0 = eq.coefficient(m0, std::vector<int>(eq.d, 0)).constant_term();
    if (std::abs(a_m0) <= tol) {
        r.verdict = Verdict::Fail;
        r.offenders.push_back("a_{m0,0}(0,0) = 0");
    }
    auto it = b.find(eq.m);
    const Complex b_m = it == b.end() ? Complex{} : it->second.constant_term();
    if (std::abs(b_m) <= tol) {
        r.verdict = Verdict::Fail;
        r.offenders.push_back("b_{m,0}(0,0) = 0");
    }
    r.detail = r.passed() ? "a_{m0,0}(0,0) and b_{m,0}(0,0) are nonzero" : "nondegeneracy fails";
    return r;
}

// Stronger hypothesis ord_t(a_{j,alpha}) >= j-m0+2 for |alpha|>0, m0<=j<m.
// Informational only: summability holds without it.
inline CheckReport check_strong_derivative_order(const Equation& eq, int m0) {
    CheckReport r;
    for (const auto& t : eq.terms) {
        if (!t.has_derivative() || t.j < m0 || t.j >= eq.m)
            continue;
        const TOrder o = ord_t(t.coeff);
        if (o.infinite())
            continue;
        if (*o.value < t.j - m0 + 2) {
            r.verdict = Verdict::Fail;
            r.offenders.push_back(describe_term(t.j, t.alpha) + ": ord_t=" + std::to_string(*o.value) + " < " +
                                  std::to_string(t.j - m0 + 2));
        }
    }
    r.detail = r.passed() ? "strong derivative-order condition holds"
                          : "strong derivative-order condition fails: improved-theorem regime";
    return r;
}

// P(tau,z) = sum_{m0<j<=m} b_{j,0}(0,z) q^{-j(j-1)/2} tau^{j-m0} + a_{m0,0}(0,z) q^{-m0(m0-1)/2}
struct CharPoly {
    std::vector<TruncatedSeries> coeffs; // index = power of tau, z-series (Kt = 1)
    int m0 = 0;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }

    std::vector<Complex> at_z0() const {
        std::vector<Complex> c;
        for (const auto& s : coeffs)
            c.push_back(s.constant_term());
        return c;
    }

    Complex evaluate_at(Complex tau, std::span<const Complex> z) const {
        Complex acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            acc = acc * tau + evaluate(*it, 0.0, z);
        return acc;
    }
};

inline CharPoly char_poly(const Equation& eq, const std::map<int, TruncatedSeries>& b, int m0) {
    CharPoly P;
    P.m0 = m0;
    const double lq = std::log(eq.q);
    auto qpow_neg_tri = [&](int j) { return std::exp(-0.5 * j * (j - 1) * lq); };
    P.coeffs.assign(static_cast<std::size_t>(eq.m - m0 + 1), TruncatedSeries(eq.d, 1, eq.window.kz));
    P.coeffs[0] = scale(t_coefficient(eq.coefficient(m0, std::vector<int>(eq.d, 0)), 0), qpow_neg_tri(m0));
    for (const auto& [j, bj] : b)
        P.coeffs[static_cast<std::size_t>(j - m0)] = scale(t_coefficient(bj, 0), qpow_neg_tri(j));
    return P;
}

// Angles are normalized to (-pi, pi].
inline double normalize_angle(double a) {
    constexpr double pi = std::numbers::pi;
    while (a <= -pi)
        a += 2.0 * pi;
    while (a > pi)
        a -= 2.0 * pi;
    return a;
}

inline double angular_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
    return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

struct DirectionSet {
    std::vector<Complex> roots;
    std::vector<double> rays;
};

inline DirectionSet directions(const CharPoly& P, RootOptions opt = {}, double merge_tol = 1e-9) {
    const auto c = P.at_z0();
    if (c.size() < 2 || c.front() == 0.0 || c.back() == 0.0)
        throw ConditionError("characteristic polynomial must have degree >= 1 and nonzero end coefficients at z=0");
    DirectionSet S;
    S.roots = durand_kerner(c, opt);
    for (auto& r : S.roots) {
        // Clean rounding-level imaginary parts so that real roots sit
        // exactly on the real axis (arg of -1 - 0i would be -pi).
        if (std::abs(r.imag()) <= 1e-14 * std::abs(r))
            r = Complex(r.real(), 0.0);
        if (std::abs(r.real()) <= 1e-14 * std::abs(r))
            r = Complex(0.0, r.imag());
    }
    std::sort(S.roots.begin(), S.roots.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (const auto& r : S.roots) {
        const double a = normalize_angle(std::arg(r));
        bool dup = std::any_of(S.rays.begin(), S.rays.end(),
                               [&](double x) { return angular_distance(x, a) < merge_tol; });
        if (!dup)
            S.rays.push_back(a);
    }
    std::sort(S.rays.begin(), S.rays.end());
    return S;
}

// Smallest angle between arg(lambda) and a singular ray.
inline double direction_clearance(const DirectionSet& S, Complex lambda) {
    if (lambda == 0.0)
        throw ConditionError("direction lambda must be nonzero");
    const double a = std::arg(lambda);
    double best = std::numbers::pi;
    for (double r : S.rays)
        best = std::min(best, angular_distance(a, r));
    return best;
}

// Everything the structural analysis produces, in one place.
struct StructureAnalysis {
    NewtonPolygon polygon;
    ShapeResult shape;
    CheckReport interior;
    CheckReport order_bounds;
    CheckReport nondegenerate;
    CheckReport strong_order;
    std::map<int, TruncatedSeries> b;
    std::optional<CharPoly> P;
    std::optional<DirectionSet> S;

    bool conditions_hold() const { return shape.passed() && interior.passed() && nondegenerate.passed(); }
    int m0() const { return shape.m0.value_or(-1); }
};

// Runs the checks in order; later ones are skipped when an earlier one fails.
inline StructureAnalysis analyze(const Equation& eq) {
    StructureAnalysis A;
    A.polygon = polygon(eq);
    A.shape = check_polygon_shape(A.polygon);
    if (!A.shape.passed()) {
        A.interior = {Verdict::Skipped, "requires the polygon shape condition", {}};
        A.order_bounds = {Verdict::Skipped, "requires the polygon shape condition", {}};
        A.nondegenerate = {Verdict::Skipped, "requires the polygon shape condition", {}};
        A.strong_order = {Verdict::Skipped, "requires the polygon shape condition", {}};
        return A;
    }
    const int m0 = *A.shape.m0;
    A.interior = check_interior_derivatives(A.polygon);
    A.strong_order = check_strong_derivative_order(eq, m0);
    A.order_bounds = check_order_bounds(eq, m0, A.interior.passed());
    if (!A.interior.passed()) {
        A.nondegenerate = {Verdict::Skipped, "requires the interior condition", {}};
        return A;
    }
    A.b = extract_b(eq, m0);
    A.nondegenerate = check_nondegenerate(eq, A.b, m0);
    if (!A.nondegenerate.passed())
        return A;
    A.P = char_poly(eq, A.b, m0);
    A.S = directions(*A.P);
    return A;
}

} // namespace qsum
