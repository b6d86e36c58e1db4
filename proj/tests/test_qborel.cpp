#include <gtest/gtest.h>

#include <cmath>

#include <qsum/dsl.hpp>
#include <qsum/formal.hpp>
#include <qsum/newton.hpp>
#include <qsum/qborel.hpp>

#include "support.hpp"

using namespace qsum;
using namespace qsum::testing;

namespace {

const char* kEuler = "q=2; delta=1; m=1; d=0; eq: t*S^1(X) + S^0(X) = 1";
const char* kExample2 = "q=2; delta=1; m=2; d=1; eq: S^1(X) + t*S^2(X) + t*S^1 Dz1^1(X) = 1/(1-z1)";

struct Pipeline {
    Equation eq;
    StructureAnalysis A;
    FormalSolution sol;
    BorelFunction u;
    BorelEquation be;
};

Pipeline build(const Equation& eq, int orders) {
    Pipeline p;
    p.eq = eq;
    p.A = analyze(eq);
    p.sol = solve_formal(eq, orders);
    p.u = borel(p.sol);
    p.be = borel_equation(eq, p.A.m0());
    return p;
}

std::vector<Complex> sorted_roots(std::vector<Complex> r) {
    std::sort(r.begin(), r.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return r;
}

} // namespace

TEST(QBorel, CoefficientsAreTheScaledFormalCoefficients) {
    const Pipeline p = build(parse_equation(kEuler, Window{41, 1}), 40);
    EXPECT_EQ(p.u.coeffs, p.sol.scaled);
    EXPECT_NEAR(p.u.radius_est, 1.0, 1e-12);
    for (std::size_t k = 0; k < p.u.coeffs.size(); ++k)
        EXPECT_EQ(p.u.coeffs[k].constant_term(), Complex(k % 2 ? -1.0 : 1.0));
}

TEST(QBorel, ZeroSolutionHasInfiniteRadius) {
    const FormalSolution sol = solve_formal(parse_equation("q=2; delta=1; m=1; d=0; eq: t*S^1(X) + S^0(X) = 0"), 12);
    EXPECT_TRUE(std::isinf(borel(sol).radius_est));
}

TEST(QBorel, MonomialRule) {
    // X = t^5 has the Borel transform xi^5 / q^{10}.
    const Equation eq = parse_equation("q=2; delta=1; m=1; d=0; eq: S^0(X) = t^5", Window{8, 1});
    const BorelFunction u = borel(solve_formal(eq, 7));
    for (int k = 0; k <= 7; ++k)
        EXPECT_EQ(u.coeffs[static_cast<std::size_t>(k)].constant_term(), Complex(k == 5 ? std::pow(2.0, -10.0) : 0.0));
    EXPECT_DOUBLE_EQ(borel_equation(eq, 0).rhsB.coeff(5, std::vector<int>{}).real(), std::pow(2.0, -10.0));
}

TEST(QBorel, LeadingSymbolsOfTheTestEquations) {
    const Pipeline e = build(parse_equation(kEuler, Window{41, 1}), 20);
    EXPECT_EQ(e.be.leadL.coeff(0, std::vector<int>{}), Complex(1.0));
    EXPECT_EQ(e.be.leadL.coeff(1, std::vector<int>{}), Complex(1.0));
    ASSERT_EQ(e.be.terms.size(), 2u);
    for (const auto& t : e.be.terms)
        EXPECT_EQ(t.s, 0);

    const Pipeline x = build(parse_equation(kExample2, Window{41, 60}), 10);
    const auto roots = leading_symbol_roots(x.be);
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_NEAR(std::abs(roots[0] + 1.0), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(roots[0] - 0.5 * x.A.S->roots[0]), 0.0, 1e-13);
}

TEST(QBorel, MultiplicationTermShiftsDown) {
    const Equation eq = parse_equation("q=2; delta=1; m=1; d=0; eq: (1+t)*S^0(X) + t*S^1(X) = 1", Window{6, 1});
    const BorelEquation be = borel_equation(eq, 0);
    int found = 0;
    for (const auto& t : be.terms)
        if (t.s == -1 && t.p == 1 && !t.derivative)
            ++found;
    EXPECT_EQ(found, 1);
}

TEST(QBorel, LeadingRootsAreScaledCharacteristicRoots) {
    for (auto seed : seeds()) {
        SCOPED_TRACE(seed);
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 20; ++i) {
            const RandomEquation r = random_equation(rng);
            const StructureAnalysis A = analyze(r.eq);
            const BorelEquation be = borel_equation(r.eq, r.m0);
            auto lhs = sorted_roots(leading_symbol_roots(be));
            std::vector<Complex> rhs;
            for (Complex tau : A.S->roots)
                rhs.push_back(std::pow(r.eq.q, -r.m0) * tau);
            rhs = sorted_roots(rhs);
            ASSERT_EQ(lhs.size(), rhs.size());
            for (std::size_t k = 0; k < lhs.size(); ++k)
                EXPECT_LE(std::abs(lhs[k] - rhs[k]) / std::abs(rhs[k]), 1e-10);
        }
    }
}

TEST(QBorel, EulerSpiralMatchesClosedForm) {
    const Pipeline p = build(parse_equation(kEuler, Window{41, 1}), 40);
    const SpiralGrid g = continue_spiral(p.be, p.u, 1.0);
    const std::vector<Complex> z0;
    for (int m = g.m_min; m <= 40; ++m) {
        const double exact = 1.0 / (1.0 + std::pow(2.0, m));
        EXPECT_LE(rel_err(value_at(g.at(m), z0, 2.0), exact), 1e-10) << m;
    }
    EXPECT_LE(rel_err(value_at(g.at(3), z0, 2.0), 1.0 / 9.0), 1e-12);
    EXPECT_THROW(continue_spiral(p.be, p.u, -1.0), SingularDirectionError);
}

TEST(QBorel, MarchedValuesAgreeWithDirectSumsInTheOverlap) {
    for (auto seed : seeds()) {
        SCOPED_TRACE(seed);
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 6; ++i) {
            const RandomEquation r = random_equation(rng, Window{121, 130});
            const Pipeline coarse = build(r.eq, 40);
            const BorelFunction fine = borel(solve_formal(r.eq, 120));
            const Complex lambda = clear_direction(coarse.A.S->rays);
            SpiralOptions so;
            so.m_max = 10;
            so.seed_tol = 1e-30;
            const SpiralGrid g = continue_spiral(coarse.be, coarse.u, lambda, so);
            const std::vector<Complex> z0(r.eq.d, 0.0);
            int compared = 0;
            for (int m = g.m_start + 1; m <= g.m_max; ++m) {
                const DirectSum ds = direct_sum(fine, g.point(m));
                if (!(ds.tail_rel <= 1e-13))
                    break;
                EXPECT_LE(rel_err(value_at(g.at(m), z0, r.eq.q), value_at(ds.value, z0, r.eq.q)), 1e-11)
                    << print_equation(r.eq) << " m=" << m;
                ++compared;
            }
            EXPECT_GE(compared, 1) << print_equation(r.eq);
        }
    }
}

TEST(QBorel, DoublingKzLeavesExample2ValuesStable) {
    const Pipeline a = build(parse_equation(kExample2, Window{41, 140}), 40);
    const Pipeline b = build(parse_equation(kExample2, Window{41, 280}), 40);
    const SpiralGrid ga = continue_spiral(a.be, a.u, 1.0), gb = continue_spiral(b.be, b.u, 1.0);
    const std::vector<Complex> z0{0.0};
    for (int m = 0; m <= 40; ++m)
        EXPECT_LE(rel_err(value_at(ga.at(m), z0, 2.0), value_at(gb.at(m), z0, 2.0)), 1e-9) << m;
}

TEST(QBorel, BoundFitClosedForms) {
    const Pipeline p = build(parse_equation(kEuler, Window{41, 1}), 40);
    const SpiralBoundFit f = fit_spiral_bound(continue_spiral(p.be, p.u, 1.0));
    EXPECT_LE(f.C, 1.0);
    EXPECT_LE(f.H, 1.0);
    EXPECT_TRUE(f.certificate_holds(2.0));

    SpiralGrid single;
    single.m_min = single.m_max = 0;
    single.values.push_back(make_scaled(TruncatedSeries::constant(0, 1, 1, 5.0), 0.0, 2.0));
    const SpiralBoundFit fs = fit_spiral_bound(single);
    EXPECT_DOUBLE_EQ(fs.C, 5.0);
    EXPECT_DOUBLE_EQ(fs.H, 1.0);

    SpiralGrid zero;
    zero.m_min = -1;
    zero.m_max = 3;
    for (int m = -1; m <= 3; ++m)
        zero.values.push_back(make_scaled(TruncatedSeries(0, 1, 1), 0.0, 2.0));
    EXPECT_EQ(fit_spiral_bound(zero).C, 0.0);
}

TEST(QBorel, Example2BoundIsFiniteWithBoundedDiagnostic) {
    const Pipeline p = build(parse_equation(kExample2, Window{41, 140}), 40);
    const SpiralBoundFit f = fit_spiral_bound(continue_spiral(p.be, p.u, 1.0));
    EXPECT_TRUE(std::isfinite(f.C));
    EXPECT_TRUE(std::isfinite(f.H));
    EXPECT_TRUE(f.certificate_holds(2.0));
    for (std::size_t m = 1; m < f.diagnostic.size(); ++m)
        EXPECT_LE(std::abs(f.diagnostic[m]), 20.0) << m;
}

TEST(QBorel, BoundCertificateHoldsOnRandomCorpus) {
    for (auto seed : seeds()) {
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 5; ++i) {
            const RandomEquation r = random_equation(rng, Window{41, 140});
            const Pipeline p = build(r.eq, 40);
            SpiralOptions so;
            so.m_max = 20;
            const SpiralBoundFit f = fit_spiral_bound(continue_spiral(p.be, p.u, clear_direction(p.A.S->rays), so));
            EXPECT_TRUE(f.certificate_holds(r.eq.q)) << print_equation(r.eq);
        }
    }
}
