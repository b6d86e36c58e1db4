#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dsl.hpp"
#include "equation.hpp"
#include "errors.hpp"
#include "formal.hpp"
#include "json_io.hpp"
#include "newton.hpp"
#include "qborel.hpp"
#include "qlaplace.hpp"

// End-to-end runs: load an equation, size the z-window, check the
// structural conditions, solve, continue, resum and verify.
namespace qsum {

struct PipelineConfig {
    int orders = 40;
    int kz = 8; // z-truncation of reported results
    Complex lambda = 1.0;
    int m_max = 40;
    std::vector<double> epsilons{0.3, 0.15};
    int N_max = 12;
    double r = 0.1;              // sample radius for residual and asymptotic checks
    int residual_samples = 10;
    double residual_tol = 1e-5;
    double R1 = 0.0;             // <= 0: half the data radius
    int jobs = 1;
    bool timings = false;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open input file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool looks_like_json(std::string_view text) {
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
            continue;
        return c == '{';
    }
    return false;
}

// DSL or JSON; a JSON document carries its own window.
inline Equation load_equation(std::string_view text, Window w) {
    return looks_like_json(text) ? from_json(text) : parse_equation(text, w);
}

// Every z-derivative step of the recursion and of the march consumes one
// z-degree, so the working window is widened by the number of steps times
// the largest derivative order.
inline int working_kz(const Equation& structure, const PipelineConfig& cfg) {
    const int a = structure.max_alpha_order();
    if (a == 0)
        return cfg.kz;
    return cfg.kz + a * (cfg.orders + 2 * cfg.m_max + 8);
}

inline Equation load_for_pipeline(std::string_view text, const PipelineConfig& cfg) {
    const Window w{cfg.orders + 1, cfg.kz};
    if (looks_like_json(text))
        return from_json(text);
    const Equation probe = parse_equation(text, w);
    return parse_equation(text, Window{cfg.orders + 1, working_kz(probe, cfg)});
}

inline Json complex_json(Complex c) { return Json{{"re", c.real()}, {"im", c.imag()}}; }

inline Json check_json(const CheckReport& r) {
    Json j{{"verdict", to_string(r.verdict)}, {"detail", r.detail}};
    j["offenders"] = r.offenders;
    return j;
}

inline Json shape_json(const ShapeResult& s) {
    Json j{{"verdict", s.passed() ? "pass" : "fail"}, {"detail", s.detail}};
    j["offenders"] = Json::array();
    return j;
}

inline Json polygon_json(const NewtonPolygon& p) {
    Json j;
    j["m"] = p.m;
    j["m0"] = p.m0 ? Json(*p.m0) : Json(nullptr);
    Json v = Json::array();
    for (const auto& x : p.vertices)
        v.push_back({x.x, x.y});
    j["vertices"] = v;
    Json s = Json::array();
    for (const auto& sl : p.slopes)
        s.push_back(sl.infinite ? std::string("inf") : sl.value.str());
    j["slopes"] = s;
    Json sup = Json::array();
    for (const auto& pt : p.support)
        sup.push_back({{"j", pt.j}, {"alpha", pt.alpha}, {"ord_t", pt.ord}});
    j["support"] = sup;
    return j;
}

inline Json directions_json(const DirectionSet& S) {
    Json j;
    Json roots = Json::array();
    for (const auto& r : S.roots)
        roots.push_back(complex_json(r));
    j["roots"] = roots;
    j["rays"] = S.rays;
    return j;
}

inline Json conditions_json(const StructureAnalysis& A) {
    return Json{{"shape", shape_json(A.shape)},
                {"interior", check_json(A.interior)},
                {"order_bounds", check_json(A.order_bounds)},
                {"nondegenerate", check_json(A.nondegenerate)},
                {"strong_order", check_json(A.strong_order)}};
}

// Residual sample points: radii in [r/5, r] on angles spread around the
// circle, skipping the pole ray of the direction.
inline std::vector<Complex> residual_samples(Complex lambda, double q, double r, int count, double epsilon) {
    std::vector<Complex> out;
    const double pole_ray = normalize_angle(std::arg(lambda) + std::numbers::pi);
    SpiralGeometry geo{lambda, epsilon, q};
    for (int k = 0; out.size() < static_cast<std::size_t>(count) && k < 20 * count; ++k) {
        const double angle = normalize_angle(pole_ray + 0.35 + k * (2.0 * std::numbers::pi - 0.7) / std::max(1, count - 1));
        const double rad = r * (0.2 + 0.8 * ((k * 7) % count) / std::max(1, count - 1));
        const Complex t = std::polar(rad, angle);
        if (zone_membership(geo, t).zone == Zone::Outside)
            out.push_back(t);
    }
    return out;
}

struct RunResult {
    Json report;
    int exit_code = 0;
};

// Runs every stage and collects the results. Condition failures end the
// run early with exit code 2; errors from later stages propagate.
inline RunResult run_report(std::string_view text, const PipelineConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    Json timings;
    auto lap = [&](const char* name, clock::time_point since) {
        timings[name] = std::chrono::duration<double>(clock::now() - since).count();
    };

    RunResult out;
    Json& rep = out.report;
    auto t0 = clock::now();
    const Equation eq = load_for_pipeline(text, cfg);
    rep["equation"] = Json{{"q", eq.q},
                           {"delta", eq.delta.str()},
                           {"m", eq.m},
                           {"d", eq.d},
                           {"terms", eq.terms.size()},
                           {"Kt", eq.window.kt},
                           {"Kz", cfg.kz},
                           {"Kz_work", eq.window.kz},
                           {"R", eq.R}};
    const StructureAnalysis A = analyze(eq);
    rep["polygon"] = polygon_json(A.polygon);
    rep["conditions"] = conditions_json(A);
    lap("structure", t0);
    if (!A.conditions_hold()) {
        rep["verdict"] = "fail";
        rep["stopped"] = "structural conditions fail";
        out.exit_code = 2;
        if (cfg.timings)
            rep["timings"] = timings;
        return out;
    }
    rep["directions"] = directions_json(*A.S);
    const double clearance = direction_clearance(*A.S, cfg.lambda);
    rep["lambda"] = complex_json(cfg.lambda);
    if (clearance < 1e-9)
        throw SingularDirectionError("direction arg(lambda)=" + dsl_detail::format_double(std::arg(cfg.lambda)) +
                                     " lies on a singular ray");

    t0 = clock::now();
    FormalOptions fo;
    fo.R1 = cfg.R1;
    const FormalSolution sol = solve_formal(eq, cfg.orders, fo);
    const ResidualReport fr = verify_formal(eq, sol);
    const GevreyFit gf = gevrey_fit(sol);
    rep["formal"] = Json{{"orders", sol.count},
                         {"R1", sol.R1},
                         {"max_residual", fr.max_residual},
                         {"residual_verdict", fr.passed() ? "pass" : "fail"},
                         {"gevrey", Json{{"A", gf.A}, {"h", gf.h}, {"certificate", gf.certificate_holds(eq.q)}}}};
    lap("formal", t0);

    t0 = clock::now();
    const BorelFunction u = borel(sol);
    const BorelEquation be = borel_equation(eq, A.m0());
    SpiralOptions so;
    so.m_max = cfg.m_max;
    const SpiralGrid g = continue_spiral(be, u, cfg.lambda, so);
    const SpiralBoundFit bf = fit_spiral_bound(g);
    double diag_max = 0.0;
    for (std::size_t m = 1; m < bf.diagnostic.size(); ++m)
        if (std::isfinite(bf.diagnostic[m]))
            diag_max = std::max(diag_max, std::abs(bf.diagnostic[m]));
    rep["spiral"] = Json{{"m_min", g.m_min},
                         {"m_max", g.m_max},
                         {"m_start", g.m_start},
                         {"theta_budget", g.theta_budget},
                         {"radius_est", std::isfinite(u.radius_est) ? Json(u.radius_est) : Json(nullptr)},
                         {"bound", Json{{"C", bf.C}, {"H", bf.H}, {"certificate", bf.certificate_holds(eq.q)},
                                        {"diagnostic_max_abs", diag_max}}}};
    lap("continuation", t0);

    t0 = clock::now();
    const double eps0 = cfg.epsilons.empty() ? 0.3 : cfg.epsilons.front();
    const auto samples = residual_samples(cfg.lambda, eq.q, cfg.r, cfg.residual_samples, eps0);
    const ResidualCheck rc = residual_check(eq, g, samples, LaplaceOptions{}, cfg.jobs);
    Json rs = Json::array();
    for (const auto& s : rc.samples)
        rs.push_back(Json{{"t", complex_json(s.t)}, {"W", complex_json(s.W)}, {"residual", s.residual}});
    const bool residual_ok = rc.max_residual <= cfg.residual_tol;
    rep["residual"] = Json{{"samples", rs},
                           {"max", rc.max_residual},
                           {"tolerance", cfg.residual_tol},
                           {"verdict", residual_ok ? "pass" : "fail"}};
    lap("residual", t0);

    t0 = clock::now();
    Json asym = Json::array();
    bool asym_ok = true;
    for (double eps : cfg.epsilons) {
        AsymptoticOptions ao;
        ao.epsilon = eps;
        ao.N_max = cfg.N_max;
        ao.r = cfg.r;
        ao.jobs = cfg.jobs;
        const ResumReport rr = asymptotic_check(sol, g, ao);
        asym_ok = asym_ok && rr.verdict == Verdict::Pass;
        asym.push_back(Json{{"epsilon", eps},
                            {"verdict", to_string(rr.verdict)},
                            {"detail", rr.detail},
                            {"M", rr.M},
                            {"H", std::isfinite(rr.H) ? Json(rr.H) : Json(nullptr)},
                            {"samples", rr.samples.size()},
                            {"rho", rr.rho}});
    }
    rep["asymptotic"] = asym;
    lap("asymptotic", t0);

    const bool all_ok = fr.passed() && residual_ok && asym_ok && gf.certificate_holds(eq.q) &&
                        bf.certificate_holds(eq.q);
    rep["verdict"] = all_ok ? "pass" : "fail";
    lap("total", t_start);
    if (cfg.timings)
        rep["timings"] = timings;
    return out;
}

} // namespace qsum
