/// @file jet.hpp
/// @brief Truncated multivariate Taylor jets in (x1, x2, x3, t).
///
/// A Jet<P> stores all Taylor coefficients of total degree <= P in four
/// variables. Arithmetic is exact up to truncation; transcendental functions
/// compose their univariate Taylor series with the nilpotent increment.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace mdhw {

constexpr int kJetVars = 4;
constexpr int kTimeVar = 3;

constexpr int binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    int r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

template <int P>
struct JetLayout {
    static constexpr int N = binom(P + kJetVars, kJetVars);
    using Exp = std::array<int, kJetVars>;

    struct Table {
        std::array<Exp, N> exps{};
        std::array<int, N> deg{};
        // product table: flattened list of (i, j, k) with mono_i * mono_j = mono_k
        static constexpr int kMaxPairs = N * N;
        std::array<int, kMaxPairs> pi{}, pj{}, pk{};
        int npairs = 0;
    };

    static constexpr int index_of(const Table& t, const Exp& e) {
        for (int i = 0; i < N; ++i)
            if (t.exps[i] == e) return i;
        return -1;
    }

    static constexpr Table build() {
        Table t{};
        int n = 0;
        for (int d = 0; d <= P; ++d)
            for (int a = d; a >= 0; --a)
                for (int b = d - a; b >= 0; --b)
                    for (int c = d - a - b; c >= 0; --c) {
                        t.exps[n] = Exp{a, b, c, d - a - b - c};
                        t.deg[n] = d;
                        ++n;
                    }
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (t.deg[i] + t.deg[j] > P) continue;
                Exp e{};
                for (int v = 0; v < kJetVars; ++v) e[v] = t.exps[i][v] + t.exps[j][v];
                t.pi[t.npairs] = i;
                t.pj[t.npairs] = j;
                t.pk[t.npairs] = index_of(t, e);
                ++t.npairs;
            }
        return t;
    }

    static constexpr Table table = build();

    using UpTable = std::array<std::array<int, kJetVars>, N>;
    static constexpr UpTable build_up() {
        UpTable u{};
        for (int i = 0; i < N; ++i)
            for (int v = 0; v < kJetVars; ++v) {
                Exp e = table.exps[i];
                e[v] += 1;
                u[i][v] = (table.deg[i] + 1 <= P) ? index_of(table, e) : -1;
            }
        return u;
    }
    // up[i][v]: index of monomial i times x_v, or -1 past the truncation order
    static constexpr UpTable up = build_up();

    static constexpr int unit(int v) {
        Exp e{};
        e[v] = 1;
        return index_of(table, e);
    }
};

template <int P>
class Jet {
public:
    using L = JetLayout<P>;
    static constexpr int N = L::N;
    static constexpr int order = P;

    std::array<double, N> c{};

    Jet() = default;
    Jet(double v) { c[0] = v; }  // NOLINT: implicit constants are intended

    /// Independent variable v (0..3) with value x0.
    static Jet variable(int v, double x0) {
        Jet r(x0);
        r.c[L::unit(v)] = 1.0;
        return r;
    }

    double value() const { return c[0]; }

    /// Taylor coefficient of monomial with exponents e.
    double coeff(const typename L::Exp& e) const {
        int d = 0;
        for (int v : e) d += v;
        if (d > P) return 0.0;
        return c[L::index_of(L::table, e)];
    }

    /// Partial derivative d^|e| / dx^e at the expansion point.
    double partial(const typename L::Exp& e) const {
        double f = 1.0;
        for (int v : e)
            for (int k = 2; k <= v; ++k) f *= k;
        return f * coeff(e);
    }

    double d(int a) const {
        static_assert(P >= 1);
        return c[L::up[0][a]];
    }
    double d2(int a, int b) const {
        static_assert(P >= 2);
        return (a == b ? 2.0 : 1.0) * c[L::up[L::up[0][a]][b]];
    }
    double d3(int a, int b, int cc) const {
        static_assert(P >= 3);
        const double f = (a == b && b == cc) ? 6.0 : ((a == b || b == cc || a == cc) ? 2.0 : 1.0);
        return f * c[L::up[L::up[L::up[0][a]][b]][cc]];
    }

    Jet& operator+=(const Jet& o) {
        for (int i = 0; i < N; ++i) c[i] += o.c[i];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (int i = 0; i < N; ++i) c[i] -= o.c[i];
        return *this;
    }
    Jet& operator*=(double s) {
        for (auto& v : c) v *= s;
        return *this;
    }
    Jet& operator+=(double s) {
        c[0] += s;
        return *this;
    }
    Jet& operator-=(double s) {
        c[0] -= s;
        return *this;
    }
    Jet& operator*=(const Jet& o) {
        *this = *this * o;
        return *this;
    }
    Jet& operator/=(const Jet& o) {
        *this = *this / o;
        return *this;
    }

    friend Jet operator-(const Jet& a) {
        Jet r;
        for (int i = 0; i < N; ++i) r.c[i] = -a.c[i];
        return r;
    }
    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double b) { return a += b; }
    friend Jet operator+(double b, Jet a) { return a += b; }
    friend Jet operator-(Jet a, double b) { return a -= b; }
    friend Jet operator-(double b, const Jet& a) { return (-a) += b; }
    friend Jet operator*(Jet a, double b) { return a *= b; }
    friend Jet operator*(double b, Jet a) { return a *= b; }
    friend Jet operator/(Jet a, double b) { return a *= (1.0 / b); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        const auto& t = L::table;
        for (int p = 0; p < t.npairs; ++p) r.c[t.pk[p]] += a.c[t.pi[p]] * b.c[t.pj[p]];
        return r;
    }

    /// f(a) given f^(n)(a0)/n! for n = 0..P.
    friend Jet compose(const Jet& a, const std::array<double, P + 1>& taylor) {
        Jet eps = a;
        eps.c[0] = 0.0;
        Jet r(taylor[0]);
        Jet pw = eps;
        for (int n = 1; n <= P; ++n) {
            for (int i = 0; i < N; ++i) r.c[i] += taylor[n] * pw.c[i];
            if (n < P) pw = pw * eps;
        }
        return r;
    }

    friend Jet operator/(double s, const Jet& b) {
        std::array<double, P + 1> tc{};
        const double b0 = b.c[0];
        double p = 1.0 / b0;
        for (int n = 0; n <= P; ++n) {
            tc[n] = ((n % 2) ? -1.0 : 1.0) * p;
            p /= b0;
        }
        Jet r = compose(b, tc);
        return r *= s;
    }
    friend Jet operator/(const Jet& a, const Jet& b) { return a * (1.0 / b); }

    friend Jet sin(const Jet& a) {
        std::array<double, P + 1> tc{};
        const double s = std::sin(a.c[0]), co = std::cos(a.c[0]);
        const double cyc[4] = {s, co, -s, -co};
        double f = 1.0;
        for (int n = 0; n <= P; ++n) {
            if (n > 1) f *= n;
            tc[n] = cyc[n % 4] / f;
        }
        return compose(a, tc);
    }
    friend Jet cos(const Jet& a) {
        std::array<double, P + 1> tc{};
        const double s = std::sin(a.c[0]), co = std::cos(a.c[0]);
        const double cyc[4] = {co, -s, -co, s};
        double f = 1.0;
        for (int n = 0; n <= P; ++n) {
            if (n > 1) f *= n;
            tc[n] = cyc[n % 4] / f;
        }
        return compose(a, tc);
    }
    friend Jet exp(const Jet& a) {
        std::array<double, P + 1> tc{};
        const double e = std::exp(a.c[0]);
        double f = 1.0;
        for (int n = 0; n <= P; ++n) {
            if (n > 1) f *= n;
            tc[n] = e / f;
        }
        return compose(a, tc);
    }
    friend Jet log(const Jet& a) {
        std::array<double, P + 1> tc{};
        const double a0 = a.c[0];
        tc[0] = std::log(a0);
        double p = 1.0 / a0;
        for (int n = 1; n <= P; ++n) {
            tc[n] = ((n % 2) ? 1.0 : -1.0) * p / n;
            p /= a0;
        }
        return compose(a, tc);
    }
    /// a^q for real exponent q, a0 > 0.
    friend Jet pow(const Jet& a, double q) {
        std::array<double, P + 1> tc{};
        const double a0 = a.c[0];
        double coef = 1.0;
        for (int n = 0; n <= P; ++n) {
            tc[n] = coef * std::pow(a0, q - n);
            coef *= (q - n) / (n + 1);
        }
        return compose(a, tc);
    }
    friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }
    friend Jet cbrt(const Jet& a) { return pow(a, 1.0 / 3.0); }
};

using Jet1 = Jet<1>;
using Jet2 = Jet<2>;
using Jet3 = Jet<3>;

/// Jet of one order lower holding d/dx_v of a.
template <int P>
Jet<P - 1> derivative(const Jet<P>& a, int v) {
    using Lo = JetLayout<P - 1>;
    using Hi = JetLayout<P>;
    Jet<P - 1> r;
    for (int i = 0; i < Lo::N; ++i) r.c[i] = (Lo::table.exps[i][v] + 1) * a.c[Hi::up[i][v]];
    return r;
}

/// Reduce a jet to a lower order by truncation.
template <int Q, int P>
Jet<Q> truncate(const Jet<P>& a) {
    static_assert(Q <= P);
    Jet<Q> r;
    for (int i = 0; i < Jet<Q>::N; ++i) r.c[i] = a.c[i];
    return r;
}

inline double value_of(double v) { return v; }
template <int P>
double value_of(const Jet<P>& j) {
    return j.value();
}

}  // namespace mdhw
