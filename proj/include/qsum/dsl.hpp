#pragma once

#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "equation.hpp"
#include "errors.hpp"
#include "series.hpp"

// Text front end for equations:
//
//   q=2; delta=1; m=2; d=1;
//   eq: S^1(X) + t*S^2(X) + t*S^1 Dz1^1(X) = 1/(1-z1)
//
// A coefficient may also follow the operator, as in S^1(X)*t.
// Coefficients and the right-hand side are polynomial/rational expressions in
// t, z1..zd, the symbol q and complex literals such as (0.5-2i). They are
// expanded to truncated series on the configured window at parse time.
namespace qsum {

namespace dsl_detail {

enum class Tok { Number, Imag, Ident, Sym, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n')
                advance(1);
            continue;
        }
        Token tok;
        tok.line = line;
        tok.column = col;
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(src.data() + i, src.data() + src.size(), v);
            if (ec != std::errc())
                throw ParseError("malformed number", line, col);
            std::size_t len = static_cast<std::size_t>(ptr - (src.data() + i));
            tok.kind = Tok::Number;
            tok.number = v;
            tok.text = std::string(src.substr(i, len));
            advance(len);
            // 2i, 0.5i: imaginary literal when 'i' is not the start of a longer word.
            if (i < src.size() && src[i] == 'i' &&
                (i + 1 >= src.size() || !std::isalnum(static_cast<unsigned char>(src[i + 1])))) {
                tok.kind = Tok::Imag;
                advance(1);
            }
            out.push_back(tok);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
                ++j;
            tok.kind = Tok::Ident;
            tok.text = std::string(src.substr(i, j - i));
            advance(j - i);
            out.push_back(tok);
            continue;
        }
        if (std::string_view("+-*/^()=;:,").find(c) != std::string_view::npos) {
            tok.kind = Tok::Sym;
            tok.text = std::string(1, c);
            advance(1);
            out.push_back(tok);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    Token end;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> toks, Window w) : toks_(std::move(toks)), window_(w) {}

    Equation parse_file() {
        parse_header();
        expect_ident("eq");
        expect_sym(":");
        parse_lhs();
        expect_sym("=");
        eq_.rhs = parse_sum();
        if (peek_sym(";"))
            next();
        if (peek().kind != Tok::End)
            fail("unexpected trailing input '" + peek().text + "'");
        return std::move(eq_);
    }

    // Standalone expression (used for series literals).
    TruncatedSeries parse_expression_only() {
        TruncatedSeries s = parse_sum();
        if (peek().kind != Tok::End)
            fail("unexpected trailing input '" + peek().text + "'");
        return s;
    }

    void set_context(double q, std::size_t d) {
        eq_.q = q;
        eq_.d = d;
    }

private:
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    bool peek_sym(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Sym && peek(ahead).text == s;
    }
    bool peek_ident(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Ident && peek(ahead).text == s;
    }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().line, peek().column); }
    void expect_sym(std::string_view s) {
        if (!peek_sym(s))
            fail("expected '" + std::string(s) + "' but found '" + describe(peek()) + "'");
        next();
    }
    void expect_ident(std::string_view s) {
        if (!peek_ident(s))
            fail("expected '" + std::string(s) + "' but found '" + describe(peek()) + "'");
        next();
    }
    static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }

    long long parse_int() {
        bool neg = false;
        if (peek_sym("-")) {
            neg = true;
            next();
        }
        const Token& t = peek();
        if (t.kind != Tok::Number || t.text.find_first_of(".eE") != std::string::npos)
            fail("expected an integer but found '" + describe(t) + "'");
        next();
        long long v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        return neg ? -v : v;
    }

    double parse_real() {
        bool neg = false;
        if (peek_sym("-")) {
            neg = true;
            next();
        }
        const Token& t = peek();
        if (t.kind != Tok::Number)
            fail("expected a real number but found '" + describe(t) + "'");
        next();
        return neg ? -t.number : t.number;
    }

    void parse_header() {
        bool have_q = false, have_delta = false, have_m = false, have_d = false;
        while (peek().kind == Tok::Ident && !peek_ident("eq")) {
            const Token key = next();
            expect_sym("=");
            if (key.text == "q" && !have_q) {
                eq_.q = parse_real();
                have_q = true;
            } else if (key.text == "delta" && !have_delta) {
                long long num = parse_int();
                long long den = 1;
                if (peek_sym("/")) {
                    next();
                    den = parse_int();
                }
                if (den == 0)
                    throw ParseError("delta has zero denominator", key.line, key.column);
                eq_.delta = Rational(num, den);
                have_delta = true;
            } else if (key.text == "m" && !have_m) {
                eq_.m = static_cast<int>(parse_int());
                have_m = true;
            } else if (key.text == "d" && !have_d) {
                long long d = parse_int();
                if (d < 0)
                    throw ParseError("d must be nonnegative", key.line, key.column);
                eq_.d = static_cast<std::size_t>(d);
                have_d = true;
            } else {
                throw ParseError("unknown or repeated header field '" + key.text + "'", key.line, key.column);
            }
            expect_sym(";");
        }
        if (!have_q || !have_delta || !have_m || !have_d)
            fail("header must define q, delta, m and d");
        if (!(eq_.q > 1.0))
            throw ParseError("q must exceed 1", toks_.front().line, toks_.front().column);
        if (eq_.delta.num <= 0)
            throw ParseError("delta must be positive", toks_.front().line, toks_.front().column);
        if (eq_.m < 1)
            throw ParseError("m must be a positive integer", toks_.front().line, toks_.front().column);
        eq_.window = window_;
        eq_.rhs = zero();
    }

    void parse_lhs() {
        bool first = true;
        while (true) {
            Complex sign = 1.0;
            if (peek_sym("+") || peek_sym("-")) {
                sign = next().text == "-" ? -1.0 : 1.0;
            } else if (!first) {
                break;
            }
            first = false;
            const Token start = peek();
            TruncatedSeries coeff = constant(1.0);
            if (!peek_ident("S")) {
                coeff = parse_product(true);
                expect_sym("*");
            }
            Term term = parse_operator();
            if (peek_sym("*")) {
                next();
                coeff = mul(coeff, parse_product(true));
            }
            term.coeff = scale(coeff, sign);
            if (!eq_.weighted_order_ok(term))
                throw ConditionError("weighted order " + std::to_string(term.j) + "+" + eq_.delta.str() + "*" +
                                     std::to_string(term.alpha_order()) + " exceeds m=" + std::to_string(eq_.m) +
                                     " in term " + describe_term(term.j, term.alpha) + " (line " +
                                     std::to_string(start.line) + ", column " + std::to_string(start.column) + ")");
            eq_.add_term(std::move(term));
            if (!peek_sym("+") && !peek_sym("-"))
                break;
        }
    }

    Term parse_operator() {
        expect_ident("S");
        expect_sym("^");
        Term t;
        t.j = static_cast<int>(parse_int());
        if (t.j < 0)
            fail("shift power must be nonnegative");
        t.alpha.assign(eq_.d, 0);
        while (peek().kind == Tok::Ident && peek().text.rfind("Dz", 0) == 0) {
            const Token dtok = next();
            std::size_t axis = parse_z_index(dtok, 2);
            expect_sym("^");
            long long order = parse_int();
            if (order < 0)
                fail("derivative order must be nonnegative");
            t.alpha[axis - 1] += static_cast<int>(order);
        }
        expect_sym("(");
        expect_ident("X");
        expect_sym(")");
        return t;
    }

    std::size_t parse_z_index(const Token& tok, std::size_t prefix) const {
        const std::string digits = tok.text.substr(prefix);
        std::size_t axis = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), axis);
        if (digits.empty() || ec != std::errc() || p != digits.data() + digits.size() || axis < 1 || axis > eq_.d)
            throw ParseError("unknown variable '" + tok.text + "' (d=" + std::to_string(eq_.d) + ")", tok.line,
                             tok.column);
        return axis;
    }

    TruncatedSeries zero() const { return TruncatedSeries(eq_.d, window_.kt, window_.kz); }
    TruncatedSeries constant(Complex c) const { return TruncatedSeries::constant(eq_.d, window_.kt, window_.kz, c); }

    TruncatedSeries parse_sum() {
        TruncatedSeries acc = parse_product(false);
        while (peek_sym("+") || peek_sym("-")) {
            const bool minus = next().text == "-";
            TruncatedSeries rhs = parse_product(false);
            acc = minus ? sub(acc, rhs) : add(acc, rhs);
        }
        return acc;
    }

    // In operator terms a product stops before "* S^".
    TruncatedSeries parse_product(bool stop_before_operator) {
        TruncatedSeries acc = parse_unary();
        while (peek_sym("*") || peek_sym("/")) {
            if (stop_before_operator && peek_sym("*") && peek_ident("S", 1))
                break;
            const Token op = next();
            TruncatedSeries rhs = parse_unary();
            if (op.text == "*") {
                acc = mul(acc, rhs);
            } else {
                try {
                    acc = mul(acc, invert(rhs));
                } catch (const NotAUnit&) {
                    throw ParseError("division by an expression with vanishing constant term", op.line, op.column);
                }
            }
        }
        return acc;
    }

    TruncatedSeries parse_unary() {
        if (peek_sym("-")) {
            next();
            return negate(parse_unary());
        }
        if (peek_sym("+")) {
            next();
            return parse_unary();
        }
        return parse_power();
    }

    TruncatedSeries parse_power() {
        TruncatedSeries base = parse_primary();
        if (peek_sym("^")) {
            next();
            long long e = parse_int();
            if (e < 0)
                fail("negative exponents are not supported; write 1/(...) instead");
            TruncatedSeries acc = constant(1.0);
            for (long long k = 0; k < e; ++k)
                acc = mul(acc, base);
            return acc;
        }
        return base;
    }

    TruncatedSeries parse_primary() {
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            next();
            return constant(t.number);
        }
        if (t.kind == Tok::Imag) {
            next();
            return constant(Complex(0.0, t.number));
        }
        if (peek_sym("(")) {
            next();
            TruncatedSeries s = parse_sum();
            expect_sym(")");
            return s;
        }
        if (t.kind == Tok::Ident) {
            const Token tok = next();
            if (tok.text == "t")
                return TruncatedSeries::monomial(eq_.d, window_.kt, window_.kz, 1, std::vector<int>(eq_.d, 0));
            if (tok.text == "q")
                return constant(eq_.q);
            if (tok.text == "i")
                return constant(Complex(0.0, 1.0));
            if (tok.text.size() > 1 && tok.text[0] == 'z') {
                std::size_t axis = parse_z_index(tok, 1);
                return TruncatedSeries::z_variable(eq_.d, window_.kt, window_.kz, axis);
            }
            throw ParseError("unknown identifier '" + tok.text + "'", tok.line, tok.column);
        }
        fail("unexpected '" + describe(t) + "'");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Window window_;
    Equation eq_;
};

inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string format_coefficient(Complex c) {
    if (c.imag() == 0.0) {
        const std::string r = format_double(c.real());
        return c.real() < 0.0 ? "(" + r + ")" : r;
    }
    std::string s = "(" + format_double(c.real());
    s += c.imag() < 0.0 ? "-" : "+";
    s += format_double(std::abs(c.imag())) + "i)";
    return s;
}

} // namespace dsl_detail

// Parses a complete equation file.
inline Equation parse_equation(std::string_view text, Window window = {}) {
    dsl_detail::Parser p(dsl_detail::lex(text), window);
    Equation eq = p.parse_file();
    auto report = validate(eq);
    if (!report.ok())
        throw ConditionError(report.violations.front());
    eq.R = estimate_data_radius(eq);
    return eq;
}

// Parses a bare series literal such as "1 + 2*t*z1 - (0.5+1i)*z2^2".
inline TruncatedSeries parse_series(std::string_view text, std::size_t d, Window window, double q = 2.0) {
    dsl_detail::Parser p(dsl_detail::lex(text), window);
    p.set_context(q, d);
    return p.parse_expression_only();
}

// Canonical series literal: monomials in lexicographic order.
inline std::string print_series(const TruncatedSeries& s) {
    if (s.is_zero())
        return "0";
    std::string out;
    bool first = true;
    for (const auto& [k, c] : s.terms()) {
        if (!first)
            out += " + ";
        first = false;
        out += dsl_detail::format_coefficient(c);
        if (k.n > 0)
            out += "*t^" + std::to_string(k.n);
        for (std::size_t i = 0; i < k.beta.size(); ++i)
            if (k.beta[i] > 0)
                out += "*z" + std::to_string(i + 1) + "^" + std::to_string(k.beta[i]);
    }
    return out;
}

// Canonical DSL text; parse_equation(print_equation(e), e.window) == e up
// to the estimated radius, which is recomputed on parse.
inline std::string print_equation(const Equation& eq) {
    std::string out = "q=" + dsl_detail::format_double(eq.q) + "; delta=" + eq.delta.str() +
                      "; m=" + std::to_string(eq.m) + "; d=" + std::to_string(eq.d) + ";\neq: ";
    bool first = true;
    for (const auto& t : eq.terms) {
        if (!first)
            out += " + ";
        first = false;
        out += "(" + print_series(t.coeff) + ")*" + describe_term(t.j, t.alpha);
    }
    if (first)
        out += "0*S^0(X)";
    out += " = " + print_series(eq.rhs) + "\n";
    return out;
}

} // namespace qsum
