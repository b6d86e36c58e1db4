#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include <qsum/equation.hpp>
#include <qsum/scaled.hpp>
#include <qsum/series.hpp>

namespace qsum::testing {

constexpr std::uint64_t kDefaultSeed = 20261015;

// QSUM_SEED (or the default) followed by three fresh seeds.
inline std::vector<std::uint64_t> seeds() {
    std::uint64_t fixed = kDefaultSeed;
    if (const char* env = std::getenv("QSUM_SEED"))
        fixed = std::strtoull(env, nullptr, 10);
    std::random_device rd;
    std::vector<std::uint64_t> out{fixed};
    for (int i = 0; i < 3; ++i)
        out.push_back((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    return out;
}

inline Complex random_complex(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng)};
}

// Dense random series on the window with coefficients in the unit box.
inline TruncatedSeries random_series(std::mt19937_64& rng, std::size_t d, int kt, int kz, double density = 0.7) {
    std::bernoulli_distribution keep(density);
    TruncatedSeries s(d, kt, kz);
    for (const auto& k : detail::window_keys(d, kt, kz))
        if (keep(rng))
            s.set(k, random_complex(rng));
    return s;
}

inline double max_diff(const TruncatedSeries& a, const TruncatedSeries& b) {
    double m = 0.0;
    for (const auto& [k, c] : a.terms())
        m = std::max(m, std::abs(c - b.coeff(k)));
    for (const auto& [k, c] : b.terms())
        m = std::max(m, std::abs(c - a.coeff(k)));
    return m;
}

inline double rel_err(Complex a, Complex b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// Plain value of a scaled z-series at z0 (t slot at 0).
inline Complex value_at(const ScaledSeries& s, std::span<const Complex> z0, double q) {
    return evaluate(s.mantissa, 0.0, z0) * std::exp(s.qexp * std::log(q));
}

// Direction halfway across the widest gap between the given rays.
inline Complex clear_direction(const std::vector<double>& rays) {
    if (rays.empty())
        return 1.0;
    std::vector<double> r = rays;
    std::sort(r.begin(), r.end());
    double best_gap = -1.0, best_mid = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double a = r[i], b = i + 1 < r.size() ? r[i + 1] : r[0] + 2.0 * 3.141592653589793;
        if (b - a > best_gap) {
            best_gap = b - a;
            best_mid = 0.5 * (a + b);
        }
    }
    return std::polar(1.0, best_mid);
}

// Random equation with the polygon {x <= m, y >= max(0, x - m0)}, derivative
// terms strictly inside, and nonvanishing corner coefficients. q in [1.5, 4],
// m in 1..3, d in 0..1, delta = 1.
struct RandomEquation {
    Equation eq;
    int m0 = 0;
};

inline RandomEquation random_equation(std::mt19937_64& rng, Window w = {12, 6}) {
    std::uniform_int_distribution<int> pick_m(1, 3), coin(0, 1);
    std::uniform_real_distribution<double> pick_q(1.5, 4.0), mag(0.5, 2.0), phase(-3.14159, 3.14159);
    RandomEquation r;
    Equation& e = r.eq;
    e.q = pick_q(rng);
    e.m = pick_m(rng);
    e.d = static_cast<std::size_t>(coin(rng));
    e.window = w;
    r.m0 = std::uniform_int_distribution<int>(0, e.m - 1)(rng);
    const std::vector<int> zero(e.d, 0);
    auto poly = [&](int ord, bool force) {
        TruncatedSeries s(e.d, w.kt, w.kz);
        s.set(Monomial{ord, zero}, std::polar(mag(rng), phase(rng)));
        if (!force || coin(rng))
            s.set(Monomial{ord + 1, zero}, random_complex(rng));
        if (e.d == 1)
            s.set(Monomial{ord, {1}}, random_complex(rng, 0.5));
        return s;
    };
    for (int j = 0; j <= e.m; ++j) {
        const bool corner = j == r.m0 || j == e.m;
        if (!corner && coin(rng))
            continue;
        const int ord = j <= r.m0 ? (j == r.m0 ? 0 : coin(rng)) : j - r.m0 + (corner ? 0 : coin(rng));
        e.add_term(Term{j, zero, poly(ord, corner)});
    }
    if (e.d == 1)
        for (int j = 0; j < e.m; ++j)
            if (coin(rng))
                e.add_term(Term{j, {1}, poly(std::max(1, j - r.m0 + 1) + coin(rng), false)});
    e.rhs = poly(0, true);
    e.R = estimate_data_radius(e);
    return r;
}

} // namespace qsum::testing
