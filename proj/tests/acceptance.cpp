// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <qsum/qsum.hpp>

#include "support.hpp"

using namespace qsum;

namespace {

struct Outcome {
    bool pass = true;
    std::string note;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            note = what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string equations_path(const std::string& name) { return std::string(QSUM_EQUATIONS_DIR) + "/" + name; }

Equation load(const std::string& name, Window w) { return parse_equation(read_file(equations_path(name)), w); }

using testing::rel_err;
using testing::value_at;

struct Stage {
    Equation eq;
    StructureAnalysis A;
    FormalSolution sol;
    SpiralGrid grid;
};

Stage run_stage(Equation eq, Complex lambda = 1.0, int orders = 40, int m_max = 40) {
    Stage s;
    s.eq = std::move(eq);
    s.A = analyze(s.eq);
    s.sol = solve_formal(s.eq, orders);
    SpiralOptions so;
    so.m_max = m_max;
    s.grid = continue_spiral(borel_equation(s.eq, s.A.m0()), borel(s.sol), lambda, so);
    return s;
}

Equation example2_working() {
    const PipelineConfig cfg;
    return load_for_pipeline(read_file(equations_path("example2.qde")), cfg);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Outcome euler_end_to_end() {
    Outcome o;
    const auto t0 = Clock::now();
    const Stage s = run_stage(load("euler.qde", Window{41, 1}));
    for (int n = 0; n <= 40; ++n)
        o.require(s.sol.scaled[static_cast<std::size_t>(n)].constant_term() == Complex(n % 2 == 0 ? 1.0 : -1.0),
                  "v_" + std::to_string(n) + " is not exactly (-1)^n");
    double worst = 0.0;
    for (int m = s.grid.m_min; m <= 40; ++m)
        worst = std::max(worst, rel_err(value_at(s.grid.at(m), {}, 2.0), 1.0 / (1.0 + std::pow(2.0, m))));
    o.require(worst <= 1e-9, "spiral error " + fmt(worst));
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, "runtime " + fmt(secs) + " s");
    if (o.pass)
        o.note = "v_n exact, spiral rel err " + fmt(worst) + ", " + fmt(secs) + " s";
    return o;
}

Outcome kernel_inversion() {
    Outcome o;
    const double t = 0.3;
    double worst = 0.0;
    for (int n = 0; n <= 8; ++n) {
        SpiralGrid g;
        g.q = 2.0;
        g.lambda = 1.0;
        g.m_min = -60;
        g.m_max = 60;
        g.R1 = 1.0;
        for (int m = -60; m <= 60; ++m)
            g.values.push_back(make_scaled(TruncatedSeries::constant(0, 1, 1, 1.0), static_cast<double>(m) * n, 2.0));
        const double exact = std::pow(2.0, 0.5 * n * (n - 1)) * std::pow(t, n);
        worst = std::max(worst, rel_err(q_laplace(g, t), exact));
    }
    o.require(worst <= 1e-7, "rel err " + fmt(worst));
    if (o.pass)
        o.note = "max rel err " + fmt(worst);
    return o;
}

Outcome resummed_residual() {
    Outcome o;
    std::string note;
    for (const auto& [name, eq] : {std::pair{"euler", load("euler.qde", Window{41, 1})},
                                   std::pair{"example2", example2_working()}}) {
        const Stage s = run_stage(eq);
        const auto ts = residual_samples(1.0, 2.0, 0.1, 10, 0.3);
        const double worst = residual_check(s.eq, s.grid, ts).max_residual;
        o.require(ts.size() == 10, std::string(name) + ": sample count");
        o.require(worst <= 1e-5, std::string(name) + " residual " + fmt(worst));
        note += std::string(note.empty() ? "" : ", ") + name + " " + fmt(worst);
    }
    if (o.pass)
        o.note = "max residual " + note;
    return o;
}

Outcome asymptotic_verifier() {
    Outcome o;
    const Stage s = run_stage(load("euler.qde", Window{41, 1}));
    AsymptoticOptions opt;
    opt.epsilon = 0.3;
    opt.N_max = 12;
    const ResumReport base = asymptotic_check(s.sol, s.grid, opt);
    o.require(base.verdict == Verdict::Pass, "base: " + base.detail);
    o.require(std::isfinite(base.M) && std::isfinite(base.H), "envelope not finite");
    AsymptoticOptions dense = opt;
    dense.rays *= 2;
    dense.radii *= 2;
    const ResumReport d = asymptotic_check(s.sol, s.grid, dense);
    const double drift = std::abs(d.H - base.H) / base.H;
    o.require(d.verdict == Verdict::Pass && drift <= 0.2, "H drift " + fmt(drift));
    AsymptoticOptions fault = opt;
    fault.offset = 1.0;
    const ResumReport f = asymptotic_check(s.sol, s.grid, fault);
    o.require(f.verdict == Verdict::Fail && f.failed_at == 1, "fault not caught at N=1");
    if (o.pass)
        o.note = "M=" + fmt(base.M) + " H=" + fmt(base.H) + ", H drift " + fmt(drift) + ", offset fails at N=1";
    return o;
}

Outcome spiral_bound() {
    Outcome o;
    const SpiralBoundFit e = fit_spiral_bound(run_stage(load("euler.qde", Window{41, 1})).grid);
    o.require(e.C <= 1.1 && e.H <= 1.1, "euler C=" + fmt(e.C) + " H=" + fmt(e.H));
    const SpiralBoundFit x = fit_spiral_bound(run_stage(example2_working()).grid);
    double diag = 0.0;
    bool finite = std::isfinite(x.C) && std::isfinite(x.H);
    for (std::size_t m = 1; m < x.diagnostic.size() && m <= 40; ++m) {
        finite = finite && std::isfinite(x.diagnostic[m]);
        diag = std::max(diag, std::abs(x.diagnostic[m]));
    }
    o.require(finite, "example2 fit not finite");
    if (o.pass)
        o.note = "euler C=" + fmt(e.C) + " H=" + fmt(e.H) + "; example2 C=" + fmt(x.C) + " H=" + fmt(x.H) +
                 ", max |diagnostic| " + fmt(diag);
    return o;
}

bool single_ray_at_pi(const DirectionSet& S) {
    return S.rays.size() == 1 && std::abs(std::abs(S.rays[0]) - std::numbers::pi) < 1e-9;
}

Outcome polygon_and_directions() {
    Outcome o;
    const StructureAnalysis e = analyze(load("euler.qde", Window{41, 1}));
    o.require(e.m0() == 0, "euler m0");
    o.require(e.polygon.vertices == std::vector<LatticePoint>{{0, 0}, {1, 1}}, "euler vertices");
    o.require(e.S && single_ray_at_pi(*e.S), "euler directions");
    const StructureAnalysis x = analyze(load("example2.qde", Window{41, 8}));
    o.require(x.m0() == 1, "example2 m0");
    const auto c = x.P->at_z0();
    o.require(c.size() == 2 && std::abs(c[0] - 1.0) < 1e-14 && std::abs(c[1] - 0.5) < 1e-14, "example2 P");
    o.require(x.S && single_ray_at_pi(*x.S), "example2 directions");
    o.require(!x.strong_order.passed() && x.strong_order.detail.find("improved-theorem regime") != std::string::npos,
              "example2 strong derivative-order condition not flagged");
    if (o.pass)
        o.note = "m0 0 and 1, P = tau/2 + 1, single ray pi, strong order flagged for example2";
    return o;
}

Outcome square_identities() {
    Outcome o;
    std::vector<Complex> pts;
    for (int k = 0; k < 8; ++k)
        pts.push_back(std::polar(0.5, 0.3 + 2.0 * std::numbers::pi * k / 8));
    double worst = 0.0;
    for (const auto& eq : {load("euler.qde", Window{41, 1}), load("example2.qde", Window{41, 60})}) {
        const SquaredEquation sq = substitute_square(eq);
        const StructureAnalysis A = analyze(eq), A1 = analyze(sq.eq);
        const BorelFunction u = borel(solve_formal(eq, 40)), u1 = borel(solve_formal(sq.eq, 80));
        const std::vector<Complex> z0(eq.d, 0.1);
        const IdentityReport b = check_borel_square_identity(u, u1, pts, z0);
        const IdentityReport p = check_charpoly_square_identity(*A.P, *A1.P, A.m0(), eq.q, pts, z0);
        o.require(b.passed() && p.passed(), "identity error " + fmt(std::max(b.max_error, p.max_error)));
        worst = std::max({worst, b.max_error, p.max_error});
    }
    std::mt19937_64 rng(20261015);
    std::uniform_real_distribution<double> qd(1.2, 4.0), unit(-1.0, 1.0);
    double shift_worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        TruncatedSeries f(1, 8, 4);
        for (int n = 0; n < 8; ++n)
            for (int b = 0; b < 4; ++b)
                f.set(Monomial{n, {b}}, Complex(unit(rng), unit(rng)));
        const double q = qd(rng);
        const int k = static_cast<int>(i % 7) - 3;
        const Complex t = std::polar(0.2 / std::pow(q, 0.5 * std::max(k, 0)), 0.7 * i);
        const std::vector<Complex> z{Complex(0.2 * unit(rng), 0.2 * unit(rng))};
        shift_worst = std::max(shift_worst, square_shift_error(f, k, q, t, z));
    }
    o.require(shift_worst <= 1e-12, "shift identity error " + fmt(shift_worst));
    const Equation x = load("example2.qde", Window{21, 8});
    const SquaredOrderReport rep = check_squared_order_bounds(x, substitute_square(x), analyze(x).m0());
    o.require(rep.strong_order.passed() && rep.doubled_bounds.passed(), "squared example2 order bounds");
    if (o.pass)
        o.note = "identity max rel err " + fmt(worst) + ", shift identity " + fmt(shift_worst) +
                 ", squared example2 strong order holds";
    return o;
}

Outcome scaling_identity() {
    Outcome o;
    std::mt19937_64 rng(20261015);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const testing::RandomEquation r = testing::random_equation(rng);
        const StructureAnalysis A = analyze(r.eq);
        o.require(A.conditions_hold(), "corpus equation fails the structural conditions");
        const auto lead = leading_symbol_roots(borel_equation(r.eq, r.m0));
        o.require(lead.size() == A.S->roots.size(), "root count mismatch");
        for (Complex tau : A.S->roots) {
            const Complex target = std::pow(r.eq.q, -r.m0) * tau;
            double best = 1e300;
            for (Complex x : lead)
                best = std::min(best, std::abs(x - target) / std::abs(target));
            worst = std::max(worst, best);
        }
    }
    o.require(worst <= 1e-10, "rel err " + fmt(worst));
    if (o.pass)
        o.note = "20 equations, max rel err " + fmt(worst);
    return o;
}

Outcome theta_properties() {
    Outcome o;
    std::mt19937_64 rng(20261015);
    std::uniform_real_distribution<double> lr(-6.0, 6.0), ph(-std::numbers::pi, std::numbers::pi), qd(1.2, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double q = qd(rng);
        const Complex x = std::polar(std::exp(lr(rng)), ph(rng));
        const Complex lhs = to_complex(theta(q * x, q), q);
        const Complex rhs = q * x * to_complex(theta(x, q), q);
        const double scale = std::abs(q * x) * std::abs(to_complex(theta(std::abs(x), q), q));
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    o.require(worst <= 1e-12, "functional equation " + fmt(worst));
    double zero_worst = 0.0;
    for (int k = -3; k <= 3; ++k) {
        const double x = std::pow(2.0, k);
        zero_worst = std::max(zero_worst, std::abs(to_complex(theta(-x, 2.0), 2.0)) /
                                              std::abs(to_complex(theta(x, 2.0), 2.0)));
    }
    o.require(zero_worst <= 1e-10, "zero set " + fmt(zero_worst));
    if (o.pass)
        o.note = "functional equation " + fmt(worst) + ", zeros " + fmt(zero_worst);
    return o;
}

Outcome property_suites(Clock::time_point start) {
    Outcome o;
    const char* env = std::getenv("QSUM_SEED");
    const std::string seed = env ? env : "20261015";
    const auto t0 = Clock::now();
    for (const char* name : {"series", "equation", "newton", "formal", "qborel", "qlaplace", "square", "growth",
                             "pipeline"}) {
        const std::string cmd = std::string("\"") + QSUM_TEST_BIN_DIR + "/test_" + name + "\" > /dev/null 2>&1";
        o.require(std::system(cmd.c_str()) == 0, std::string("test_") + name + " failed");
    }
    const double units = seconds_since(t0);
    const double total = seconds_since(start);
    o.require(total < 60.0, "runtime " + fmt(total) + " s");
    if (o.pass)
        o.note = "unit suites pass with seed " + seed + " plus 3 fresh seeds, unit suites " + fmt(units) +
                 " s, acceptance total " + fmt(total) + " s";
    return o;
}

} // namespace

int main() {
    const auto start = Clock::now();
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"q-Euler end-to-end", euler_end_to_end},
        {"kernel inversion", kernel_inversion},
        {"resummed-solution residual", resummed_residual},
        {"asymptotic-expansion verifier", asymptotic_verifier},
        {"spiral growth bound", spiral_bound},
        {"polygon and directions", polygon_and_directions},
        {"squared-equation identities", square_identities},
        {"leading-symbol scaling", scaling_identity},
        {"theta properties", theta_properties},
        {"property suites and runtime", [start] { return property_suites(start); }},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << index << " (" << name << "): " << o.note << '\n';
    }
    return failures == 0 ? 0 : 1;
}
