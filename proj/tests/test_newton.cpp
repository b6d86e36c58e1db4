#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numbers>

#include <qsum/dsl.hpp>
#include <qsum/newton.hpp>

#include "support.hpp"

using namespace qsum;
using namespace qsum::testing;

namespace {

const char* kEuler = "q=2; delta=1; m=1; d=0; eq: t*S^1(X) + S^0(X) = 1";
const char* kExample2 = "q=2; delta=1; m=2; d=1; eq: S^1(X) + t*S^2(X) + t*S^1 Dz1^1(X) = 1/(1-z1)";

// Lower boundary of the hull of the sets {x <= a, y >= b}, by brute force
// over single points and interpolating pairs.
double hull_floor(const std::vector<std::pair<int, int>>& pts, double x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pts)
        if (a >= x)
            best = std::min(best, static_cast<double>(b));
    for (const auto& [a1, b1] : pts)
        for (const auto& [a2, b2] : pts)
            if (a1 < x && x <= a2) {
                const double lam = (a2 - x) / static_cast<double>(a2 - a1);
                best = std::min(best, lam * b1 + (1.0 - lam) * b2);
            }
    return best;
}

void expect_region_matches_oracle(const NewtonPolygon& p) {
    std::vector<std::pair<int, int>> pts;
    for (const auto& s : p.support)
        pts.emplace_back(s.j, s.ord);
    for (int x = -1; x <= p.m + 1; ++x)
        for (int y = 0; y <= p.m + 3; ++y)
            EXPECT_EQ(p.contains(x, y), y >= hull_floor(pts, x) - 1e-12) << "at (" << x << "," << y << ")";
}

Equation parse(const char* src) { return parse_equation(src, Window{12, 8}); }

} // namespace

TEST(Newton, EulerPolygonMatchesHullOracle) {
    NewtonPolygon p = polygon(parse(kEuler));
    ASSERT_EQ(p.vertices.size(), 2u);
    EXPECT_EQ(p.vertices[0], (LatticePoint{0, 0}));
    EXPECT_EQ(p.vertices[1], (LatticePoint{1, 1}));
    expect_region_matches_oracle(p);
    EXPECT_EQ(*check_polygon_shape(p).m0, 0);
}

TEST(Newton, SingleTermRegionIsAQuadrant) {
    NewtonPolygon p = polygon(parse("q=2; delta=1; m=1; d=0; eq: S^0(X) = 1"));
    ASSERT_EQ(p.vertices.size(), 1u);
    EXPECT_TRUE(p.contains(0, 0));
    EXPECT_TRUE(p.contains(-5, 2));
    EXPECT_FALSE(p.contains(1, 5));
    expect_region_matches_oracle(p);
}

TEST(Newton, Example2PolygonAndConditions) {
    const Equation eq = parse(kExample2);
    const StructureAnalysis A = analyze(eq);
    EXPECT_EQ(A.polygon.vertices[0], (LatticePoint{1, 0}));
    EXPECT_EQ(A.polygon.vertices[1], (LatticePoint{2, 1}));
    expect_region_matches_oracle(A.polygon);
    EXPECT_EQ(A.m0(), 1);
    EXPECT_TRUE(A.interior.passed());
    EXPECT_TRUE(A.order_bounds.passed());
    EXPECT_TRUE(A.nondegenerate.passed());
    EXPECT_TRUE(A.conditions_hold());
    EXPECT_EQ(A.strong_order.verdict, Verdict::Fail);
    EXPECT_EQ(A.strong_order.detail, "strong derivative-order condition fails: improved-theorem regime");
    ASSERT_EQ(A.P->degree(), 1);
    EXPECT_NEAR(std::abs(A.P->at_z0()[0] - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(A.P->at_z0()[1] - 0.5), 0.0, 1e-15);
    ASSERT_EQ(A.S->roots.size(), 1u);
    EXPECT_NEAR(std::abs(A.S->roots[0] + 2.0), 0.0, 1e-12);
    EXPECT_NEAR(A.S->rays[0], std::numbers::pi, 1e-12);
}

TEST(Newton, ShapeFailsWhenTheCornerCoefficientVanishesAtZero) {
    NewtonPolygon p = polygon(parse("q=2; delta=1; m=1; d=0; eq: t*S^0(X) + t*S^1(X) = 1"));
    const ShapeResult r = check_polygon_shape(p);
    EXPECT_FALSE(r.passed());
    const StructureAnalysis A = analyze(parse("q=2; delta=1; m=1; d=0; eq: t*S^0(X) + t*S^1(X) = 1"));
    EXPECT_EQ(A.interior.verdict, Verdict::Skipped);
    EXPECT_EQ(A.order_bounds.verdict, Verdict::Skipped);
}

TEST(Newton, BoundaryDerivativeTermFailsInteriorCheck) {
    const StructureAnalysis A = analyze(parse("q=2; delta=1; m=2; d=1; eq: S^1(X) + t*S^2(X) + S^1 Dz1^1(X) = 1"));
    EXPECT_EQ(A.interior.verdict, Verdict::Fail);
    EXPECT_EQ(A.order_bounds.verdict, Verdict::Skipped);
    EXPECT_FALSE(A.conditions_hold());
}

TEST(Newton, StrongOrderHoldsWithSquaredCoefficient) {
    const StructureAnalysis A = analyze(parse("q=2; delta=1; m=2; d=1; eq: S^1(X) + t*S^2(X) + t^2*S^1 Dz1^1(X) = 1"));
    EXPECT_TRUE(A.strong_order.passed());
    EXPECT_EQ(analyze(parse(kEuler)).strong_order.verdict, Verdict::Pass);
}

TEST(Newton, ExtractBDividesExactly) {
    const Equation eq = parse("q=2; delta=1; m=2; d=1; eq: S^1(X) + t^2*(1+z1)*S^2(X) = 1");
    const auto b = extract_b(eq, 1);
    EXPECT_EQ(b.at(2).coeff(1, std::vector<int>{0}), Complex(1.0));
    EXPECT_EQ(b.at(2).coeff(1, std::vector<int>{1}), Complex(1.0));
    EXPECT_EQ(ord_t(b.at(2)).value, 1);
    const Equation e1 = parse(kEuler);
    EXPECT_EQ(extract_b(e1, 0).at(1).constant_term(), Complex(1.0));
}

TEST(Newton, NondegeneracyClauses) {
    const Equation a = parse("q=2; delta=1; m=1; d=1; eq: z1*S^0(X) + t*S^1(X) = 1");
    const auto ra = check_nondegenerate(a, extract_b(a, 0), 0);
    ASSERT_EQ(ra.offenders.size(), 1u);
    EXPECT_EQ(ra.offenders[0], "a_{m0,0}(0,0) = 0");
    const Equation b = parse("q=2; delta=1; m=1; d=0; eq: S^0(X) + t^2*S^1(X) = 1");
    const auto rb = check_nondegenerate(b, extract_b(b, 0), 0);
    ASSERT_EQ(rb.offenders.size(), 1u);
    EXPECT_EQ(rb.offenders[0], "b_{m,0}(0,0) = 0");
}

TEST(Newton, CharacteristicPolynomialsAndDirections) {
    const StructureAnalysis e = analyze(parse(kEuler));
    EXPECT_EQ(e.P->at_z0(), (std::vector<Complex>{1.0, 1.0}));
    EXPECT_NEAR(std::abs(e.S->roots[0] + 1.0), 0.0, 1e-13);
    EXPECT_NEAR(direction_clearance(*e.S, 1.0), std::numbers::pi, 1e-12);
    EXPECT_NEAR(direction_clearance(*e.S, Complex(0, 1)), std::numbers::pi / 2, 1e-12);
    EXPECT_NEAR(direction_clearance(*e.S, -1.0), 0.0, 1e-12);
    CharPoly P;
    P.coeffs = {TruncatedSeries::constant(0, 1, 1, -4.0), TruncatedSeries(0, 1, 1), TruncatedSeries::constant(0, 1, 1, 1.0)};
    const DirectionSet S = directions(P);
    ASSERT_EQ(S.rays.size(), 2u);
    std::vector<double> rays = S.rays;
    std::sort(rays.begin(), rays.end());
    EXPECT_NEAR(rays[0], 0.0, 1e-12);
    EXPECT_NEAR(rays[1], std::numbers::pi, 1e-12);
}

TEST(Newton, OrderBoundsAreEntailedOnRandomCorpus) {
    for (auto seed : seeds()) {
        SCOPED_TRACE(seed);
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 40; ++i) {
            const RandomEquation r = random_equation(rng);
            StructureAnalysis A;
            ASSERT_NO_THROW(A = analyze(r.eq)) << print_equation(r.eq);
            ASSERT_TRUE(A.conditions_hold()) << print_equation(r.eq);
            EXPECT_EQ(A.m0(), r.m0);
            EXPECT_TRUE(A.order_bounds.passed());
            expect_region_matches_oracle(A.polygon);
            for (const Complex tau : A.S->roots)
                EXPECT_GT(std::abs(tau), 1e-12);
            for (const Complex tau : A.S->roots)
                EXPECT_LE(std::abs(A.P->evaluate_at(tau, std::vector<Complex>(r.eq.d, 0.0))), 1e-9);
        }
    }
}

TEST(Newton, HullIsStableUnderInteriorSupportPoints) {
    for (auto seed : seeds()) {
        std::mt19937_64 rng(seed);
        RandomEquation r = random_equation(rng);
        const NewtonPolygon before = polygon(r.eq);
        Equation extra = r.eq;
        if (extra.m - r.m0 < 1)
            continue;
        TruncatedSeries c(extra.d, extra.window.kt, extra.window.kz);
        c.set(Monomial{extra.m + 2, std::vector<int>(extra.d, 0)}, 1.0);
        extra.add_term(Term{extra.m - 1, std::vector<int>(extra.d, 0), add(extra.coefficient(extra.m - 1, std::vector<int>(extra.d, 0)), c)});
        EXPECT_EQ(polygon(extra).vertices, before.vertices);
    }
}

TEST(Newton, RaysAreInvariantUnderGlobalScaling) {
    for (auto seed : seeds()) {
        std::mt19937_64 rng(seed);
        const RandomEquation r = random_equation(rng);
        Equation scaled = r.eq;
        const Complex c = std::polar(3.7, 1.1);
        for (auto& t : scaled.terms)
            t.coeff = scale(t.coeff, c);
        const auto a = analyze(r.eq).S->rays, b = analyze(scaled).S->rays;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            EXPECT_NEAR(angular_distance(a[i], b[i]), 0.0, 1e-9);
    }
}

TEST(Newton, TruncationLimitedCoefficientMakesPolygonIndeterminate) {
    Equation eq = parse(kEuler);
    TruncatedSeries lost(0, 3, 1);
    lost.set(Monomial{7, {}}, 1.0);
    eq.terms[1].coeff = lost;
    EXPECT_THROW(polygon(eq), IndeterminatePolygon);
}
