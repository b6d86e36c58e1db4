#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "equation.hpp"
#include "errors.hpp"
#include "series.hpp"

namespace qsum {

using Json = nlohmann::json;

// Coefficients travel as [[n, [beta...], re, im], ...] in (n, beta) order.
inline Json series_to_json(const TruncatedSeries& s) {
    Json arr = Json::array();
    for (const auto& [k, c] : s.terms())
        arr.push_back(Json::array({k.n, k.beta, c.real(), c.imag()}));
    return arr;
}

inline Json equation_to_json(const Equation& eq) {
    Json j;
    j["q"] = eq.q;
    j["delta"] = {{"num", eq.delta.num}, {"den", eq.delta.den}};
    j["m"] = eq.m;
    j["d"] = eq.d;
    j["Kt"] = eq.window.kt;
    j["Kz"] = eq.window.kz;
    j["R"] = eq.R;
    Json terms = Json::array();
    for (const auto& t : eq.terms)
        terms.push_back({{"j", t.j}, {"alpha", t.alpha}, {"coeff", series_to_json(t.coeff)}});
    j["terms"] = terms;
    j["rhs"] = series_to_json(eq.rhs);
    return j;
}

inline std::string to_json(const Equation& eq) { return equation_to_json(eq).dump(2); }

namespace json_detail {

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
    throw ParseError("schema violation at " + (path.empty() ? std::string("/") : path) + ": " + what);
}

inline const Json& field(const Json& obj, const std::string& path, const char* name) {
    if (!obj.is_object())
        schema_fail(path, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end())
        schema_fail(path + "/" + name, "required field is missing");
    return *it;
}

inline long long as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer())
        schema_fail(path, "expected an integer");
    return v.get<long long>();
}

inline double as_real(const Json& v, const std::string& path) {
    if (!v.is_number())
        schema_fail(path, "expected a number");
    return v.get<double>();
}

inline TruncatedSeries series_from_json(const Json& v, const std::string& path, std::size_t d, Window w) {
    if (!v.is_array())
        schema_fail(path, "expected an array of [n, beta, re, im] entries");
    TruncatedSeries s(d, w.kt, w.kz);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        const Json& e = v[i];
        if (!e.is_array() || e.size() != 4)
            schema_fail(p, "expected [n, beta, re, im]");
        const long long n = as_int(e[0], p + "/0");
        if (n < 0)
            schema_fail(p + "/0", "t-exponent must be nonnegative");
        if (!e[1].is_array() || e[1].size() != d)
            schema_fail(p + "/1", "expected a z-multi-index of length " + std::to_string(d));
        std::vector<int> beta;
        for (std::size_t k = 0; k < d; ++k) {
            const long long b = as_int(e[1][k], p + "/1/" + std::to_string(k));
            if (b < 0)
                schema_fail(p + "/1/" + std::to_string(k), "z-exponent must be nonnegative");
            beta.push_back(static_cast<int>(b));
        }
        s.accumulate(Monomial{static_cast<int>(n), beta},
                     Complex(as_real(e[2], p + "/2"), as_real(e[3], p + "/3")));
    }
    return s;
}

} // namespace json_detail

inline Equation equation_from_json(const Json& j) {
    using namespace json_detail;
    Equation eq;
    eq.q = as_real(field(j, "", "q"), "/q");
    if (!(eq.q > 1.0))
        schema_fail("/q", "q must exceed 1");
    const Json& delta = field(j, "", "delta");
    const long long num = as_int(field(delta, "/delta", "num"), "/delta/num");
    const long long den = as_int(field(delta, "/delta", "den"), "/delta/den");
    if (den <= 0 || num <= 0)
        schema_fail("/delta", "delta must be a positive rational");
    eq.delta = Rational(num, den);
    eq.m = static_cast<int>(as_int(field(j, "", "m"), "/m"));
    if (eq.m < 1)
        schema_fail("/m", "m must be a positive integer");
    const long long d = as_int(field(j, "", "d"), "/d");
    if (d < 0)
        schema_fail("/d", "d must be nonnegative");
    eq.d = static_cast<std::size_t>(d);
    eq.window.kt = static_cast<int>(as_int(field(j, "", "Kt"), "/Kt"));
    eq.window.kz = static_cast<int>(as_int(field(j, "", "Kz"), "/Kz"));
    if (eq.window.kt < 1)
        schema_fail("/Kt", "must be at least 1");
    if (eq.window.kz < 1)
        schema_fail("/Kz", "must be at least 1");
    const Json& terms = field(j, "", "terms");
    if (!terms.is_array())
        schema_fail("/terms", "expected an array");
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string p = "/terms/" + std::to_string(i);
        Term t;
        t.j = static_cast<int>(as_int(field(terms[i], p, "j"), p + "/j"));
        if (t.j < 0)
            schema_fail(p + "/j", "shift power must be nonnegative");
        const Json& alpha = field(terms[i], p, "alpha");
        if (!alpha.is_array() || alpha.size() != eq.d)
            schema_fail(p + "/alpha", "expected a multi-index of length " + std::to_string(eq.d));
        for (std::size_t k = 0; k < eq.d; ++k) {
            const long long a = as_int(alpha[k], p + "/alpha/" + std::to_string(k));
            if (a < 0)
                schema_fail(p + "/alpha/" + std::to_string(k), "derivative order must be nonnegative");
            t.alpha.push_back(static_cast<int>(a));
        }
        t.coeff = series_from_json(field(terms[i], p, "coeff"), p + "/coeff", eq.d, eq.window);
        if (!eq.weighted_order_ok(t))
            schema_fail(p, "weighted order j+delta|alpha| exceeds m in " + describe_term(t.j, t.alpha));
        eq.add_term(std::move(t));
    }
    eq.rhs = series_from_json(field(j, "", "rhs"), "/rhs", eq.d, eq.window);
    if (auto it = j.find("R"); it != j.end()) {
        eq.R = as_real(*it, "/R");
        if (!(eq.R > 0.0))
            schema_fail("/R", "radius must be positive");
    } else {
        eq.R = estimate_data_radius(eq);
    }
    return eq;
}

inline Equation from_json(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return equation_from_json(j);
}

} // namespace qsum
