#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>

#include "series.hpp"

namespace qsum {

// value = mantissa * q^qexp with |mantissa| in [1, q), or exactly zero.
// Values of size q^{m^2/2} appear throughout the kernel sums; keeping the
// exponent apart lets them be combined without overflow.
struct QValue {
    Complex mantissa{};
    double qexp = 0.0;

    bool is_zero() const noexcept { return mantissa == 0.0; }
};

inline QValue make_qvalue(Complex c, double qexp, double q) {
    if (c == 0.0 || !is_finite(c))
        return QValue{c == 0.0 ? Complex{} : c, 0.0};
    const double lq = std::log(q);
    double k = std::floor(std::log(std::abs(c)) / lq);
    const double half = std::exp(-0.5 * k * lq);
    Complex m = c * half * half;
    // log/exp rounding can land a hair outside [1, q).
    if (std::abs(m) >= q) {
        m /= q;
        k += 1.0;
    } else if (std::abs(m) < 1.0) {
        m *= q;
        k -= 1.0;
    }
    return QValue{m, qexp + k};
}

// Natural log of |value|; -inf for zero.
inline double log_abs(const QValue& v, double q) {
    if (v.is_zero())
        return -std::numeric_limits<double>::infinity();
    return std::log(std::abs(v.mantissa)) + v.qexp * std::log(q);
}

// Plain complex value; may overflow to inf or underflow to 0.
inline Complex to_complex(const QValue& v, double q) {
    if (v.is_zero())
        return 0.0;
    return v.mantissa * std::exp(v.qexp * std::log(q));
}

inline QValue qmul(const QValue& a, const QValue& b, double q) {
    return make_qvalue(a.mantissa * b.mantissa, a.qexp + b.qexp, q);
}

inline QValue qdiv(const QValue& a, const QValue& b, double q) {
    if (b.is_zero())
        throw NumericalError("division by zero in scaled arithmetic");
    return make_qvalue(a.mantissa / b.mantissa, a.qexp - b.qexp, q);
}

// Sum of scaled values, aligned to the largest exponent.
inline QValue qsum_values(std::span<const QValue> values, double q) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& v : values)
        if (!v.is_zero())
            top = std::max(top, v.qexp);
    if (!std::isfinite(top))
        return QValue{};
    const double lq = std::log(q);
    Complex acc = 0.0;
    for (const auto& v : values)
        if (!v.is_zero())
            acc += v.mantissa * std::exp((v.qexp - top) * lq);
    return make_qvalue(acc, top, q);
}

// A z-series times q^qexp, normalized so the largest coefficient magnitude
// lies in [1, q).
struct ScaledSeries {
    TruncatedSeries mantissa;
    double qexp = 0.0;
};

inline ScaledSeries make_scaled(const TruncatedSeries& s, double qexp, double q) {
    const double top = s.max_abs();
    if (top == 0.0)
        return ScaledSeries{s, 0.0};
    const QValue probe = make_qvalue(Complex(top, 0.0), 0.0, q);
    return ScaledSeries{scale(s, std::exp(-probe.qexp * std::log(q))), qexp + probe.qexp};
}

inline double log_norm(const ScaledSeries& s, double radius, double q) {
    const double n = z_norm(s.mantissa, radius);
    if (n == 0.0)
        return -std::numeric_limits<double>::infinity();
    return std::log(n) + s.qexp * std::log(q);
}

// Sum of scaled series on the common window, aligned to the largest exponent.
inline ScaledSeries scaled_sum(std::span<const ScaledSeries> parts, double q) {
    if (parts.empty())
        throw NumericalError("empty scaled sum");
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& p : parts)
        if (!p.mantissa.is_zero())
            top = std::max(top, p.qexp);
    TruncatedSeries acc = scale(parts.front().mantissa, 0.0);
    if (!std::isfinite(top)) {
        for (const auto& p : parts)
            acc = add(acc, p.mantissa);
        return ScaledSeries{acc, 0.0};
    }
    const double lq = std::log(q);
    for (const auto& p : parts) {
        const double f = p.mantissa.is_zero() ? 0.0 : std::exp((p.qexp - top) * lq);
        acc = add(acc, scale(p.mantissa, f));
    }
    return make_scaled(acc, top, q);
}

// q^e as a scaled complex, for real e.
inline QValue qpow(double e, double q) { return make_qvalue(Complex(1.0, 0.0), e, q); }

// z as a scaled value (|z| may be anything finite and nonzero).
inline QValue to_qvalue(Complex z, double q) { return make_qvalue(z, 0.0, q); }

// z^n in scaled form without forming the power directly.
inline QValue qpow(Complex z, int n, double q) {
    if (z == 0.0)
        return n == 0 ? make_qvalue(1.0, 0.0, q) : QValue{};
    const double lq = std::log(q);
    const double mag_qexp = n * std::log(std::abs(z)) / lq;
    const double phase = n * std::arg(z);
    return make_qvalue(std::polar(1.0, phase), mag_qexp, q);
}

} // namespace qsum
