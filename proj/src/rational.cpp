#include "polyopt/rational.hpp"

#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace polyopt {

namespace {

using i64 = std::int64_t;

std::optional<i64> mul64(i64 a, i64 b) {
    i64 r;
    if (__builtin_mul_overflow(a, b, &r)) return std::nullopt;
    return r;
}
std::optional<i64> sub64(i64 a, i64 b) {
    i64 r;
    if (__builtin_sub_overflow(a, b, &r)) return std::nullopt;
    return r;
}
std::optional<i64> add64(i64 a, i64 b) {
    i64 r;
    if (__builtin_add_overflow(a, b, &r)) return std::nullopt;
    return r;
}

bool fits(const boost::multiprecision::cpp_int &v) {
    return v >= std::numeric_limits<i64>::min() + 1 && v <= std::numeric_limits<i64>::max();
}

} // namespace

Rational::Rational(const BigRational &b) {
    const auto &n = boost::multiprecision::numerator(b);
    const auto &d = boost::multiprecision::denominator(b);
    if (fits(n) && fits(d)) v_ = Small{static_cast<i64>(n), static_cast<i64>(d)};
    else v_ = b;
}

bool Rational::is_zero() const {
    if (auto s = std::get_if<Small>(&v_)) return s->num == 0;
    return std::get<BigRational>(v_) == 0;
}

BigRational Rational::big() const {
    if (auto s = std::get_if<Small>(&v_)) return BigRational(s->num, s->den);
    return std::get<BigRational>(v_);
}

std::string Rational::str() const { return big().str(); }

Rational operator*(const Rational &a, const Rational &b) {
    auto sa = std::get_if<Rational::Small>(&a.v_), sb = std::get_if<Rational::Small>(&b.v_);
    if (sa && sb) {
        const i64 g1 = std::gcd(sa->num, sb->den), g2 = std::gcd(sb->num, sa->den);
        auto n = mul64(g1 ? sa->num / g1 : 0, g2 ? sb->num / g2 : 0);
        auto d = mul64(sa->den / (g2 ? g2 : 1), sb->den / (g1 ? g1 : 1));
        if (n && d) {
            Rational r;
            r.v_ = Rational::Small{*n, *n == 0 ? 1 : *d};
            return r;
        }
    }
    return Rational(a.big() * b.big());
}

Rational operator-(const Rational &a, const Rational &b) {
    auto sa = std::get_if<Rational::Small>(&a.v_), sb = std::get_if<Rational::Small>(&b.v_);
    if (sa && sb) {
        const i64 g = std::gcd(sa->den, sb->den);
        auto l = mul64(sa->num, sb->den / g), r = mul64(sb->num, sa->den / g), d = mul64(sa->den, sb->den / g);
        if (l && r && d)
            if (auto n = sub64(*l, *r)) {
                const i64 h = std::gcd(*n, *d);
                Rational out;
                out.v_ = Rational::Small{*n / (h ? h : 1), *n == 0 ? 1 : *d / (h ? h : 1)};
                return out;
            }
    }
    return Rational(a.big() - b.big());
}

Rational operator+(const Rational &a, const Rational &b) {
    auto sa = std::get_if<Rational::Small>(&a.v_), sb = std::get_if<Rational::Small>(&b.v_);
    if (sa && sb) {
        const i64 g = std::gcd(sa->den, sb->den);
        auto l = mul64(sa->num, sb->den / g), r = mul64(sb->num, sa->den / g), d = mul64(sa->den, sb->den / g);
        if (l && r && d)
            if (auto n = add64(*l, *r)) {
                const i64 h = std::gcd(*n, *d);
                Rational out;
                out.v_ = Rational::Small{*n / (h ? h : 1), *n == 0 ? 1 : *d / (h ? h : 1)};
                return out;
            }
    }
    return Rational(a.big() + b.big());
}

Rational operator/(const Rational &a, const Rational &b) {
    if (b.is_zero()) throw std::domain_error("division by zero");
    auto sb = std::get_if<Rational::Small>(&b.v_);
    if (sb && sb->num != std::numeric_limits<i64>::min()) {
        Rational inv;
        if (sb->num < 0) inv.v_ = Rational::Small{-sb->den, -sb->num};
        else inv.v_ = Rational::Small{sb->den, sb->num};
        return a * inv;
    }
    return Rational(a.big() / b.big());
}

bool operator==(const Rational &a, const Rational &b) {
    auto sa = std::get_if<Rational::Small>(&a.v_), sb = std::get_if<Rational::Small>(&b.v_);
    if (sa && sb) return sa->num == sb->num && sa->den == sb->den;
    return a.big() == b.big();
}

} // namespace polyopt
