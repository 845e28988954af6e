#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <variant>

namespace polyopt {

using BigRational = boost::multiprecision::cpp_rational;

// Exact rational held in two machine words while it fits, promoted to BigRational on overflow
// and demoted again when a result fits.
class Rational {
public:
    Rational(std::int64_t v = 0) : v_(Small{v, 1}) {}
    explicit Rational(const BigRational &b);

    bool is_zero() const;
    bool is_big() const { return std::holds_alternative<BigRational>(v_); }
    BigRational big() const;
    std::string str() const;

    friend Rational operator+(const Rational &a, const Rational &b);
    friend Rational operator-(const Rational &a, const Rational &b);
    friend Rational operator*(const Rational &a, const Rational &b);
    friend Rational operator/(const Rational &a, const Rational &b); // b must be nonzero
    friend bool operator==(const Rational &a, const Rational &b);

private:
    struct Small {
        std::int64_t num;
        std::int64_t den; // > 0, coprime with num
    };
    std::variant<Small, BigRational> v_;
};

} // namespace polyopt
