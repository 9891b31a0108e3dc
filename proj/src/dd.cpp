#include "mpschur/dd.hpp"

#include <cfenv>
#include <charconv>
#include <cstdlib>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace mpschur {

namespace {

using Wide = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<256, boost::multiprecision::digit_base_2>,
    boost::multiprecision::et_off>;

std::string render(const DDReal& x, int digits) {
    Wide v = Wide(x.hi) + Wide(x.lo);
    return v.str(digits, std::ios_base::scientific);
}

}  // namespace

std::string to_string(const DDReal& x) {
    if (std::isnan(x.hi)) return "nan";
    if (std::isinf(x.hi)) return x.hi > 0 ? "inf" : "-inf";
    if (x.hi == 0.0) return std::signbit(x.hi) ? "-0" : "0";
    const std::string base = render(x, 36);
    if (parse_dd(base) == x) return base;
    for (int digits = 37; digits <= 75; ++digits) {
        std::string s = render(x, digits);
        if (parse_dd(s) == x) return s;
    }
    return base;
}

DDReal parse_dd(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (text.empty()) throw std::invalid_argument("empty numeric field");

    std::string_view body = text;
    bool negative = false;
    if (body.front() == '+' || body.front() == '-') {
        negative = body.front() == '-';
        body.remove_prefix(1);
    }
    if (body == "nan" || body == "NaN") return {std::numeric_limits<double>::quiet_NaN()};
    if (body == "inf" || body == "Inf" || body == "infinity") {
        double inf = std::numeric_limits<double>::infinity();
        return {negative ? -inf : inf};
    }
    for (char c : body) {
        bool ok = (c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-';
        if (!ok) throw std::invalid_argument("malformed number: " + std::string(text));
    }

    Wide v;
    try {
        v = Wide(std::string(text));
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed number: " + std::string(text));
    }
    DDReal r;
    r.hi = v.convert_to<double>();
    if (!std::isfinite(r.hi)) return r;
    r.lo = Wide(v - Wide(r.hi)).convert_to<double>();
    eft::quick_two_sum(r.hi, r.lo, r.hi, r.lo);
    if (r.hi == 0.0 && negative) r.hi = -0.0;
    return r;
}

void assert_round_to_nearest() {
    if (std::fegetround() != FE_TONEAREST)
        throw std::runtime_error("binary64 rounding mode is not round-to-nearest");
    volatile double one = 1.0;
    volatile double half_ulp = 0x1p-53;
    // Ties go to even: 1 + 2^-53 -> 1, (1 + 2^-52) + 2^-53 -> 1 + 2^-51.
    double a = one + half_ulp;
    double b = (one + 0x1p-52) + half_ulp;
    if (a != 1.0 || b != 1.0 + 0x1p-51)
        throw std::runtime_error("binary64 arithmetic does not round ties to even");
}

}  // namespace mpschur
