#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <qsum/qsum.hpp>

namespace {

using namespace qsum;

constexpr int kOk = 0;
constexpr int kCondition = 2;
constexpr int kSingular = 3;
constexpr int kNumerical = 4;
constexpr int kUsage = 5;

struct Options {
    std::string input;
    int orders = 40;
    int zorder = 8;
    std::string lambda = "1,0";
    std::string t = "0.1,0";
    int mmax = 40;
    std::vector<double> epsilon{0.3, 0.15};
    int N = 12;
    double r = 0.1;
    double R1 = 0.0;
    int jobs = 1;
    bool timings = false;
    bool fit = false;
    double q = 2.0;
    std::string json_path;
    std::string csv_path;
    CLI::Option* json_opt = nullptr;
};

class UsageError : public Error {
public:
    using Error::Error;
};

Complex parse_complex(const std::string& text, const char* what) {
    const auto comma = text.find(',');
    try {
        std::size_t used = 0;
        if (comma == std::string::npos) {
            const double re = std::stod(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return {re, 0.0};
        }
        const std::string a = text.substr(0, comma), b = text.substr(comma + 1);
        const double re = std::stod(a, &used);
        if (used != a.size())
            throw std::invalid_argument(a);
        const double im = std::stod(b, &used);
        if (used != b.size())
            throw std::invalid_argument(b);
        return {re, im};
    } catch (const std::exception&) {
        throw UsageError(std::string("--") + what + " expects \"re,im\", got \"" + text + "\"");
    }
}

PipelineConfig config_from(const Options& o) {
    PipelineConfig c;
    c.orders = o.orders;
    c.kz = o.zorder;
    c.lambda = parse_complex(o.lambda, "lambda");
    c.m_max = o.mmax;
    c.epsilons = o.epsilon;
    c.N_max = o.N;
    c.r = o.r;
    c.R1 = o.R1;
    c.jobs = o.jobs;
    c.timings = o.timings;
    return c;
}

void emit_json(const Options& o, const Json& j) {
    const std::string text = j.dump(2) + "\n";
    if (o.json_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(o.json_path, std::ios::binary);
    if (!out)
        throw UsageError("cannot write '" + o.json_path + "'");
    out << text;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw UsageError("cannot write '" + path + "'");
    out.precision(17);
    return out;
}

Equation load(const Options& o) { return load_for_pipeline(read_file(o.input), config_from(o)); }

StructureAnalysis require_conditions(const Equation& eq) {
    StructureAnalysis A = analyze(eq);
    if (!A.conditions_hold()) {
        std::string why = A.shape.passed() ? (A.interior.passed() ? A.nondegenerate.detail : A.interior.detail)
                                           : A.shape.detail;
        throw ConditionError("structural conditions fail: " + why);
    }
    return A;
}

int cmd_check(const Options& o) {
    const Equation eq = load(o);
    const StructureAnalysis A = analyze(eq);
    Json j = conditions_json(A);
    j["polygon"] = polygon_json(A.polygon);
    if (A.S)
        j["directions"] = directions_json(*A.S);
    if (o.json_opt->count() > 0) {
        emit_json(o, j);
    } else {
        std::cout << "shape: " << (A.shape.passed() ? "pass" : "fail") << " (" << A.shape.detail << ")\n";
        for (const auto& [name, r] : {std::pair<const char*, const CheckReport*>{"interior", &A.interior},
                                      {"order_bounds", &A.order_bounds},
                                      {"nondegenerate", &A.nondegenerate},
                                      {"strong_order", &A.strong_order}})
            std::cout << name << ": " << to_string(r->verdict) << " (" << r->detail << ")\n";
    }
    return A.conditions_hold() ? kOk : kCondition;
}

int cmd_polygon(const Options& o) {
    const Equation eq = load(o);
    NewtonPolygon p = polygon(eq);
    check_polygon_shape(p);
    if (!o.csv_path.empty()) {
        auto out = open_csv(o.csv_path);
        out << "kind,j,alpha,ord_t,on_boundary,interior\n";
        for (const auto& s : p.support) {
            std::string alpha;
            for (std::size_t i = 0; i < s.alpha.size(); ++i)
                alpha += (i ? ";" : "") + std::to_string(s.alpha[i]);
            const bool inside = p.interior(s.j, s.ord);
            const bool boundary = p.contains(s.j, s.ord) && !inside;
            out << "support," << s.j << "," << alpha << "," << s.ord << "," << boundary << "," << inside << "\n";
        }
        for (const auto& v : p.vertices)
            out << "vertex," << v.x << ",," << v.y << ",1,0\n";
    }
    emit_json(o, polygon_json(p));
    return kOk;
}

int cmd_directions(const Options& o) {
    const Equation eq = load(o);
    const StructureAnalysis A = require_conditions(eq);
    Json j = directions_json(*A.S);
    j["m0"] = A.m0();
    Json P = Json::array();
    for (const auto& c : A.P->coeffs)
        P.push_back(series_to_json(c));
    j["char_poly"] = P;
    emit_json(o, j);
    return kOk;
}

int cmd_solve(const Options& o) {
    const Equation eq = load(o);
    require_conditions(eq);
    FormalOptions fo;
    fo.R1 = o.R1;
    const FormalSolution sol = solve_formal(eq, o.orders, fo);
    const GevreyFit gf = gevrey_fit(sol);
    const ResidualReport rr = verify_formal(eq, sol);
    Json coeffs = Json::array();
    for (int n = 0; n <= sol.count; ++n) {
        const auto nn = static_cast<std::size_t>(n);
        coeffs.push_back(Json{{"n", n},
                              {"v", series_to_json(sol.scaled[nn].restricted(1, o.zorder))},
                              {"log_M", std::isfinite(gf.log_norms[nn]) ? Json(gf.log_norms[nn]) : Json(nullptr)},
                              {"g", n == 0 || !std::isfinite(gf.g[nn]) ? Json(nullptr) : Json(gf.g[nn])}});
    }
    Json j{{"coefficients", coeffs},
           {"R1", sol.R1},
           {"gevrey", Json{{"A", gf.A}, {"h", gf.h}, {"certificate", gf.certificate_holds(eq.q)}}},
           {"residual", Json{{"max", rr.max_residual}, {"flagged", rr.flagged}}}};
    if (!o.csv_path.empty()) {
        auto out = open_csv(o.csv_path);
        out << "n,log10_M,g\n";
        for (int n = 0; n <= sol.count; ++n) {
            const auto nn = static_cast<std::size_t>(n);
            out << n << "," << gf.log_norms[nn] / std::log(10.0) << "," << (n == 0 ? 0.0 : gf.g[nn]) << "\n";
        }
    }
    emit_json(o, j);
    return rr.passed() ? kOk : kNumerical;
}

struct Continued {
    Equation eq;
    StructureAnalysis A;
    FormalSolution sol;
    SpiralGrid grid;
};

Continued continue_from(const Options& o) {
    Continued c;
    c.eq = load(o);
    c.A = require_conditions(c.eq);
    const Complex lambda = parse_complex(o.lambda, "lambda");
    if (direction_clearance(*c.A.S, lambda) < 1e-9)
        throw SingularDirectionError("direction arg(lambda)=" + std::to_string(std::arg(lambda)) +
                                     " lies on a singular ray");
    FormalOptions fo;
    fo.R1 = o.R1;
    c.sol = solve_formal(c.eq, o.orders, fo);
    SpiralOptions so;
    so.m_max = o.mmax;
    c.grid = continue_spiral(borel_equation(c.eq, c.A.m0()), borel(c.sol), lambda, so);
    return c;
}

int cmd_borel(const Options& o) {
    const Equation eq = load(o);
    const StructureAnalysis A = require_conditions(eq);
    FormalOptions fo;
    fo.R1 = o.R1;
    const BorelFunction u = borel(solve_formal(eq, o.orders, fo));
    const BorelEquation be = borel_equation(eq, A.m0());
    Json terms = Json::array();
    for (const auto& t : be.terms)
        terms.push_back(Json{{"s", t.s}, {"p", t.p}, {"alpha", t.alpha}, {"scale", t.scale},
                             {"coeff", series_to_json(t.coeffz.restricted(1, o.zorder))}});
    Json roots = Json::array();
    for (const auto& r : leading_symbol_roots(be))
        roots.push_back(complex_json(r));
    Json coeffs = Json::array();
    for (const auto& c : u.coeffs)
        coeffs.push_back(series_to_json(c.restricted(1, o.zorder)));
    emit_json(o, Json{{"m0", be.m0},
                      {"radius_est", std::isfinite(u.radius_est) ? Json(u.radius_est) : Json(nullptr)},
                      {"terms", terms},
                      {"leading_symbol", series_to_json(be.leadL.restricted(be.leadL.kt(), o.zorder))},
                      {"leading_symbol_roots", roots},
                      {"coefficients", coeffs}});
    return kOk;
}

int cmd_continue(const Options& o) {
    const Continued c = continue_from(o);
    const SpiralBoundFit bf = fit_spiral_bound(c.grid);
    const std::vector<Complex> z0(c.eq.d, 0.0);
    Json values = Json::array();
    for (int m = c.grid.m_min; m <= c.grid.m_max; ++m) {
        const ScaledSeries& v = c.grid.at(m);
        const QValue at0 = make_qvalue(evaluate(v.mantissa, 0.0, z0), v.qexp, c.eq.q);
        const double ln = log_norm(v, c.grid.R1, c.eq.q);
        values.push_back(Json{{"m", m},
                              {"value", Json{{"mantissa", complex_json(at0.mantissa)}, {"qexp", at0.qexp}}},
                              {"log_norm", std::isfinite(ln) ? Json(ln) : Json(nullptr)}});
    }
    if (!o.csv_path.empty()) {
        auto out = open_csv(o.csv_path);
        out << "m,log_norm,diagnostic\n";
        for (std::size_t m = 0; m < bf.log_norms.size(); ++m)
            out << m << "," << bf.log_norms[m] << "," << bf.diagnostic[m] << "\n";
    }
    emit_json(o, Json{{"lambda", complex_json(c.grid.lambda)},
                      {"m_start", c.grid.m_start},
                      {"theta_budget", c.grid.theta_budget},
                      {"bound", Json{{"C", bf.C}, {"H", bf.H}, {"certificate", bf.certificate_holds(c.eq.q)}}},
                      {"values", values}});
    return kOk;
}

int cmd_square(const Options& o) {
    const Equation eq = load_equation(read_file(o.input), Window{o.orders + 1, o.zorder});
    emit_json(o, equation_to_json(substitute_square(eq).eq));
    return kOk;
}

int cmd_resum(const Options& o) {
    const Continued c = continue_from(o);
    const Complex t = parse_complex(o.t, "t");
    const LaplaceResult r = q_laplace_series(c.grid, t);
    const std::vector<Complex> z0(c.eq.d, 0.0);
    const Complex W = evaluate(r.value.mantissa, 0.0, z0) * std::exp(r.value.qexp * std::log(c.eq.q));
    emit_json(o, Json{{"t", complex_json(t)},
                      {"W", complex_json(W)},
                      {"upper_tail", r.upper_tail},
                      {"lower_tail", r.lower_tail}});
    return kOk;
}

int cmd_verify(const Options& o) {
    const Continued c = continue_from(o);
    Json reports = Json::array();
    bool ok = true;
    std::ofstream csv;
    if (!o.csv_path.empty()) {
        csv = open_csv(o.csv_path);
        csv << "epsilon,N,max_E_N,bound,rho_N\n";
    }
    for (double eps : o.epsilon) {
        AsymptoticOptions ao;
        ao.epsilon = eps;
        ao.N_max = o.N;
        ao.r = o.r;
        ao.jobs = o.jobs;
        const ResumReport rr = asymptotic_check(c.sol, c.grid, ao);
        ok = ok && rr.verdict == Verdict::Pass;
        Json en = Json::array();
        for (int N = 0; N <= o.N; ++N) {
            double worst = 0.0, bound = 0.0;
            for (std::size_t k = 0; k < rr.samples.size(); ++k)
                if (rr.EN[static_cast<std::size_t>(N)][k] >= worst) {
                    worst = rr.EN[static_cast<std::size_t>(N)][k];
                    bound = rr.bound(N, k, c.eq.q);
                }
            en.push_back(worst);
            if (csv)
                csv << eps << "," << N << "," << worst << "," << bound << "," << rr.rho[static_cast<std::size_t>(N)]
                    << "\n";
        }
        reports.push_back(Json{{"epsilon", eps},
                               {"verdict", to_string(rr.verdict)},
                               {"detail", rr.detail},
                               {"M", rr.M},
                               {"H", std::isfinite(rr.H) ? Json(rr.H) : Json(nullptr)},
                               {"samples", rr.samples.size()},
                               {"max_E_N", en},
                               {"rho", rr.rho}});
    }
    emit_json(o, Json{{"asymptotic", reports}});
    return ok ? kOk : kNumerical;
}

int cmd_report(const Options& o) {
    RunResult r = run_report(read_file(o.input), config_from(o));
    emit_json(o, r.report);
    return r.exit_code;
}

int cmd_growth(const Options& o) {
    std::vector<Complex> coeffs;
    double q = o.q;
    if (!o.input.empty()) {
        const Equation eq = load(o);
        require_conditions(eq);
        const FormalSolution sol = solve_formal(eq, o.orders);
        q = eq.q;
        const std::vector<Complex> z0(eq.d, 0.0);
        for (const auto& v : sol.scaled)
            coeffs.push_back(evaluate(v, 0.0, z0));
    } else {
        for (int n = 0; n <= o.orders; ++n)
            coeffs.push_back(std::exp(-0.5 * n * (n - 1.0) * std::log(q)));
    }
    const CoeffBound cb = fit_coeff_bound(coeffs, q);
    Json j{{"coefficients", coeffs.size()},
           {"coeff_bound", Json{{"A", cb.A}, {"H", cb.H}, {"divergent", cb.divergent}}}};
    if (o.fit) {
        if (cb.divergent)
            throw NumericalError("coefficients do not decay like q^{-n(n-1)/2}; the sum is not entire");
        const EntireSeries f{coeffs, q};
        const auto samples = log_spaced_samples(1e-2, 1e3, 25);
        const GrowthBound gb = fit_growth(f, q, samples);
        const GrowthCheck gc = check_growth_bound(f, q, gb.M, gb.alpha, samples);
        j["growth"] = Json{{"M", gb.M}, {"alpha", gb.alpha}, {"passed", gc.passed}, {"worst_margin", gc.worst_margin},
                           {"min_abs_t", gc.min_abs_t}, {"max_abs_t", gc.max_abs_t}};
        if (!o.csv_path.empty()) {
            auto out = open_csv(o.csv_path);
            out << "log_abs_t,log_abs_f,bound\n";
            for (const Complex t : samples)
                out << std::log(std::abs(t)) << "," << std::log(std::abs(f(t))) << ","
                    << growth_log_envelope(gb.M, gb.alpha, q, std::abs(t)) << "\n";
        }
    }
    emit_json(o, j);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Summability toolkit for linear q-difference-differential equations"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value configuration file; flags take precedence");
    Options o;
    app.add_option("--orders", o.orders, "formal orders to compute")->capture_default_str();
    app.add_option("--zorder", o.zorder, "z-truncation of results")->capture_default_str();
    app.add_option("--lambda", o.lambda, "direction as \"re,im\"")->capture_default_str();
    app.add_option("--t", o.t, "evaluation point as \"re,im\"")->capture_default_str();
    app.add_option("--mmax", o.mmax, "largest spiral index")->capture_default_str();
    app.add_option("--epsilon", o.epsilon, "disk radii for the asymptotic check")->capture_default_str();
    app.add_option("--N", o.N, "largest remainder order")->capture_default_str();
    app.add_option("--r", o.r, "sample radius")->capture_default_str();
    app.add_option("--R1", o.R1, "polydisc radius for z-norms (0: half the data radius)")->capture_default_str();
    app.add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    app.add_option("--q", o.q, "base for growth without an input file")->capture_default_str();
    app.add_flag("--timings", o.timings, "add wall-clock timings to the report");
    app.add_flag("--fit", o.fit, "fit the entire-growth bound");
    o.json_opt = app.add_option("--json", o.json_path, "write JSON to a file (stdout when no path)")->expected(0, 1);
    app.add_option("--emit-csv", o.csv_path, "write plot-ready CSV");

    struct Cmd {
        const char* name;
        const char* help;
        int (*run)(const Options&);
        bool needs_input;
    };
    const Cmd cmds[] = {
        {"check", "structural conditions", cmd_check, true},
        {"polygon", "Newton polygon", cmd_polygon, true},
        {"directions", "characteristic roots and singular rays", cmd_directions, true},
        {"solve", "formal solution", cmd_solve, true},
        {"borel", "Borel transform and transformed equation", cmd_borel, true},
        {"continue", "continuation along the spiral", cmd_continue, true},
        {"square", "t -> t^2 substitution", cmd_square, true},
        {"resum", "q-Laplace sum at one point", cmd_resum, true},
        {"verify", "asymptotic-expansion check", cmd_verify, true},
        {"report", "full pipeline", cmd_report, true},
        {"growth", "coefficient decay and entire growth", cmd_growth, false},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        auto* opt = sub->add_option("input", o.input, "equation file (.qde or .json)");
        if (c.needs_input)
            opt->required();
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        for (const auto& [sub, c] : subs)
            if (sub->parsed())
                return c->run(o);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SingularDirectionError& e) {
        std::cerr << "singular direction: " << e.what() << "\n";
        return kSingular;
    } catch (const ConditionError& e) {
        std::cerr << "condition violated: " << e.what() << "\n";
        return kCondition;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
