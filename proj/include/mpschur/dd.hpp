#pragma once

// Double-double scalars: a value is the unevaluated sum hi + lo of two
// binary64 numbers with hi == fl(hi + lo).

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace mpschur {

inline constexpr double kUnitRoundoffLp = 0x1p-53;
inline constexpr double kUnitRoundoffHp = 0x1p-106;

namespace eft {

// s + e == a + b exactly.
inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    double bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

// Requires |a| >= |b| or a == 0.
inline void quick_two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    e = b - (s - a);
}

#if defined(__FMA__) || defined(FP_FAST_FMA)
inline constexpr bool kHardwareFma = true;
#else
inline constexpr bool kHardwareFma = false;
#endif

inline void split(double a, double& hi, double& lo) {
    constexpr double kSplitter = 134217729.0;  // 2^27 + 1
    double t = kSplitter * a;
    hi = t - (t - a);
    lo = a - hi;
}

// p + e == a * b exactly (barring overflow/underflow).
inline void two_prod(double a, double b, double& p, double& e) {
    p = a * b;
    if constexpr (kHardwareFma) {
        e = std::fma(a, b, -p);
    } else {
        double ah, al, bh, bl;
        split(a, ah, al);
        split(b, bh, bl);
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    }
}

}  // namespace eft

struct DDReal {
    double hi = 0.0;
    double lo = 0.0;

    constexpr DDReal() = default;
    constexpr DDReal(double h) : hi(h) {}  // NOLINT: exact widening
    constexpr DDReal(double h, double l) : hi(h), lo(l) {}

    static DDReal from_sum(double a, double b) {
        DDReal r;
        eft::two_sum(a, b, r.hi, r.lo);
        return r;
    }
    static DDReal from_product(double a, double b) {
        DDReal r;
        eft::two_prod(a, b, r.hi, r.lo);
        return r;
    }

    explicit operator double() const { return hi; }

    DDReal& operator+=(const DDReal& b);
    DDReal& operator-=(const DDReal& b);
    DDReal& operator*=(const DDReal& b);
    DDReal& operator/=(const DDReal& b);
};

inline DDReal operator-(const DDReal& a) { return {-a.hi, -a.lo}; }

inline DDReal operator+(const DDReal& a, const DDReal& b) {
    double s, e, t, f;
    eft::two_sum(a.hi, b.hi, s, e);
    eft::two_sum(a.lo, b.lo, t, f);
    e += t;
    eft::quick_two_sum(s, e, s, e);
    e += f;
    eft::quick_two_sum(s, e, s, e);
    return {s, e};
}

inline DDReal operator-(const DDReal& a, const DDReal& b) { return a + (-b); }

inline DDReal operator*(const DDReal& a, const DDReal& b) {
    double p, e;
    eft::two_prod(a.hi, b.hi, p, e);
    e += (a.hi * b.lo + a.lo * b.hi) + a.lo * b.lo;
    eft::quick_two_sum(p, e, p, e);
    return {p, e};
}

// Division by an exact zero is a domain error; overflow propagates as inf/NaN.
inline DDReal operator/(const DDReal& a, const DDReal& b) {
    if (b.hi == 0.0) throw std::domain_error("double-double division by zero");
    double q1 = a.hi / b.hi;
    DDReal r = a - b * DDReal(q1);
    double q2 = r.hi / b.hi;
    r = r - b * DDReal(q2);
    double q3 = r.hi / b.hi;
    DDReal q;
    eft::quick_two_sum(q1, q2, q.hi, q.lo);
    return q + DDReal(q3);
}

inline DDReal& DDReal::operator+=(const DDReal& b) { return *this = *this + b; }
inline DDReal& DDReal::operator-=(const DDReal& b) { return *this = *this - b; }
inline DDReal& DDReal::operator*=(const DDReal& b) { return *this = *this * b; }
inline DDReal& DDReal::operator/=(const DDReal& b) { return *this = *this / b; }

inline bool operator==(const DDReal& a, const DDReal& b) { return a.hi == b.hi && a.lo == b.lo; }
inline bool operator!=(const DDReal& a, const DDReal& b) { return !(a == b); }
inline bool operator<(const DDReal& a, const DDReal& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
}
inline bool operator>(const DDReal& a, const DDReal& b) { return b < a; }
inline bool operator<=(const DDReal& a, const DDReal& b) { return !(b < a); }
inline bool operator>=(const DDReal& a, const DDReal& b) { return !(a < b); }

inline DDReal abs(const DDReal& a) { return a.hi < 0.0 ? -a : a; }
inline DDReal fabs(const DDReal& a) { return abs(a); }
inline bool isfinite(const DDReal& a) { return std::isfinite(a.hi) && std::isfinite(a.lo); }
inline bool isnan(const DDReal& a) { return std::isnan(a.hi) || std::isnan(a.lo); }
inline bool isinf(const DDReal& a) { return std::isinf(a.hi); }

inline DDReal sqrt(const DDReal& a) {
    if (a.hi == 0.0) return {};
    if (a.hi < 0.0) throw std::domain_error("double-double sqrt of a negative value");
    double x = std::sqrt(a.hi);
    // One Newton correction on top of the binary64 root.
    DDReal r = a - DDReal::from_product(x, x);
    DDReal y;
    eft::quick_two_sum(x, r.hi / (2.0 * x), y.hi, y.lo);
    return y;
}

inline DDReal to_hp(double x) { return {x, 0.0}; }
inline double to_lp(const DDReal& x) { return x.hi; }

// 36 significant digits, extended only when that is not enough to
// reproduce the exact pair on parsing.
std::string to_string(const DDReal& x);
// hi is the double nearest the decimal value, lo the double nearest the remainder.
DDReal parse_dd(std::string_view text);

struct DDComplex {
    DDReal re;
    DDReal im;

    constexpr DDComplex() = default;
    constexpr DDComplex(double r) : re(r) {}  // NOLINT
    constexpr DDComplex(const DDReal& r) : re(r) {}  // NOLINT
    constexpr DDComplex(const DDReal& r, const DDReal& i) : re(r), im(i) {}
    explicit DDComplex(const std::complex<double>& z) : re(z.real()), im(z.imag()) {}

    const DDReal& real() const { return re; }
    const DDReal& imag() const { return im; }

    DDComplex& operator+=(const DDComplex& b) {
        re += b.re;
        im += b.im;
        return *this;
    }
    DDComplex& operator-=(const DDComplex& b) {
        re -= b.re;
        im -= b.im;
        return *this;
    }
    DDComplex& operator*=(const DDComplex& b);
    DDComplex& operator/=(const DDComplex& b);
};

inline DDComplex operator-(const DDComplex& a) { return {-a.re, -a.im}; }
inline DDComplex operator+(const DDComplex& a, const DDComplex& b) { return {a.re + b.re, a.im + b.im}; }
inline DDComplex operator-(const DDComplex& a, const DDComplex& b) { return {a.re - b.re, a.im - b.im}; }
inline DDComplex operator*(const DDComplex& a, const DDComplex& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline DDComplex conj(const DDComplex& a) { return {a.re, -a.im}; }
inline DDReal real(const DDComplex& a) { return a.re; }
inline DDReal imag(const DDComplex& a) { return a.im; }
inline DDReal norm(const DDComplex& a) { return a.re * a.re + a.im * a.im; }
inline DDReal abs2(const DDComplex& a) { return norm(a); }
inline DDReal abs(const DDComplex& a) { return sqrt(norm(a)); }

inline DDComplex operator/(const DDComplex& a, const DDComplex& b) {
    DDReal d = norm(b);
    if (d.hi == 0.0) throw std::domain_error("double-double complex division by zero");
    DDComplex n = a * conj(b);
    return {n.re / d, n.im / d};
}

inline DDComplex& DDComplex::operator*=(const DDComplex& b) { return *this = *this * b; }
inline DDComplex& DDComplex::operator/=(const DDComplex& b) { return *this = *this / b; }

inline bool operator==(const DDComplex& a, const DDComplex& b) { return a.re == b.re && a.im == b.im; }
inline bool operator!=(const DDComplex& a, const DDComplex& b) { return !(a == b); }
inline bool isfinite(const DDComplex& a) { return isfinite(a.re) && isfinite(a.im); }

inline DDComplex to_hp(const std::complex<double>& z) { return DDComplex(z); }
inline std::complex<double> to_lp(const DDComplex& z) { return {z.re.hi, z.im.hi}; }

// Throws std::runtime_error unless binary64 arithmetic rounds to nearest-even.
void assert_round_to_nearest();

}  // namespace mpschur

namespace Eigen {

template <>
struct NumTraits<mpschur::DDReal> : GenericNumTraits<mpschur::DDReal> {
    using Real = mpschur::DDReal;
    using NonInteger = mpschur::DDReal;
    using Nested = mpschur::DDReal;
    using Literal = mpschur::DDReal;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 2,
        AddCost = 20,
        MulCost = 12
    };
    static Real epsilon() { return Real(2.0 * mpschur::kUnitRoundoffHp); }
    static Real dummy_precision() { return Real(1e-28); }
    static Real highest() { return Real(std::numeric_limits<double>::max()); }
    static Real lowest() { return Real(-std::numeric_limits<double>::max()); }
    static Real infinity() { return Real(std::numeric_limits<double>::infinity()); }
    static Real quiet_NaN() { return Real(std::numeric_limits<double>::quiet_NaN()); }
    static int digits10() { return 31; }
    static int digits() { return 106; }
};

template <>
struct NumTraits<mpschur::DDComplex> : GenericNumTraits<mpschur::DDComplex> {
    using Real = mpschur::DDReal;
    using NonInteger = mpschur::DDComplex;
    using Nested = mpschur::DDComplex;
    using Literal = mpschur::DDComplex;
    enum {
        IsComplex = 1,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 4,
        AddCost = 40,
        MulCost = 100
    };
    static Real epsilon() { return NumTraits<Real>::epsilon(); }
    static Real dummy_precision() { return NumTraits<Real>::dummy_precision(); }
    static Real highest() { return NumTraits<Real>::highest(); }
    static Real lowest() { return NumTraits<Real>::lowest(); }
    static int digits10() { return 31; }
};

}  // namespace Eigen
