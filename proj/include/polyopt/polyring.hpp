#pragma once

#include <complex>
#include <compare>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyopt {

using Coeff = std::complex<double>;
using Exponents = std::vector<std::uint32_t>;

// Thrown when a rank or a count no longer fits into 64 bits.
class CapacityError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

enum class Field { real, complex };

class VariableSpace {
public:
    VariableSpace() = default;
    explicit VariableSpace(std::size_t n, Field kind = Field::real,
                           std::vector<std::optional<std::uint32_t>> caps = {});

    std::size_t n() const { return n_; }
    Field kind() const { return kind_; }
    bool is_complex() const { return kind_ == Field::complex; }
    std::optional<std::uint32_t> cap(std::size_t i) const;

    bool operator==(const VariableSpace &) const = default;

private:
    std::size_t n_ = 0;
    Field kind_ = Field::real;
    std::vector<std::optional<std::uint32_t>> caps_;
};

struct ExponentKey {
    Exponents plain;
    Exponents conj; // empty for real spaces

    std::uint32_t degree() const;
    bool operator==(const ExponentKey &) const = default;
};

// Graded-lex rank of the plain part and of the conjugate part.
struct MonomialId {
    std::uint64_t plain = 0;
    std::uint64_t conj = 0;

    auto operator<=>(const MonomialId &) const = default;
    bool is_one() const { return plain == 0 && conj == 0; }
};

struct MonomialIdHash {
    std::size_t operator()(const MonomialId &m) const noexcept {
        return std::hash<std::uint64_t>{}(m.plain * 0x9E3779B97F4A7C15ULL ^ m.conj);
    }
};

// Combinatorial helpers on the graded-lex order of exponent tuples of length n.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);
std::uint64_t count_upto(std::size_t n, std::uint32_t d);
std::uint64_t rank_exponents(std::span<const std::uint32_t> e);
Exponents unrank_exponents(std::size_t n, std::uint64_t r);
std::uint32_t degree_of_rank(std::size_t n, std::uint64_t r);

MonomialId encode(const ExponentKey &key, const VariableSpace &space);
ExponentKey decode(MonomialId id, const VariableSpace &space);
MonomialId mul(MonomialId a, MonomialId b, const VariableSpace &space);
MonomialId conjugate(MonomialId id);
std::uint32_t degree(MonomialId id, const VariableSpace &space);
std::uint32_t plain_degree(MonomialId id, const VariableSpace &space);
std::uint32_t conj_degree(MonomialId id, const VariableSpace &space);
MonomialId variable_id(std::size_t i, const VariableSpace &space, bool conj = false);
std::string monomial_string(MonomialId id, const VariableSpace &space,
                            const std::vector<std::string> &names = {});

// Lazy range over B_{n,d}: ranks 0 .. binom(n+d, n) - 1 of plain monomials.
class DenseBasis {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = MonomialId;
        using difference_type = std::ptrdiff_t;
        using pointer = const MonomialId *;
        using reference = MonomialId;

        iterator() = default;
        explicit iterator(std::uint64_t r) : r_(r) {}
        MonomialId operator*() const { return MonomialId{r_, 0}; }
        iterator &operator++() { ++r_; return *this; }
        iterator operator++(int) { auto t = *this; ++r_; return t; }
        bool operator==(const iterator &) const = default;

    private:
        std::uint64_t r_ = 0;
    };

    DenseBasis(std::size_t n, std::uint32_t d) : size_(count_upto(n, d)) {}
    iterator begin() const { return iterator(0); }
    iterator end() const { return iterator(size_); }
    std::uint64_t size() const { return size_; }

private:
    std::uint64_t size_;
};

DenseBasis dense_basis(const VariableSpace &space, std::uint32_t d);
std::vector<MonomialId> dense_basis_vector(const VariableSpace &space, std::uint32_t d);

struct Term {
    MonomialId id;
    Coeff coeff;
};

class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(VariableSpace space) : space_(std::move(space)) {}
    Polynomial(VariableSpace space, std::vector<Term> terms);

    static Polynomial constant(const VariableSpace &space, Coeff c);
    static Polynomial variable(const VariableSpace &space, std::size_t i, bool conj = false);
    static Polynomial monomial(const VariableSpace &space, MonomialId id, Coeff c = 1.0);

    const VariableSpace &space() const { return space_; }
    const std::vector<Term> &terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool is_zero() const { return terms_.empty(); }
    std::uint32_t degree() const;
    Coeff coefficient(MonomialId id) const;
    std::vector<MonomialId> support() const;
    bool is_real_valued(double tol = 0.0) const;
    bool has_real_coefficients() const;
    bool is_homogeneous() const;

    Polynomial operator-() const;
    Polynomial &operator+=(const Polynomial &o);
    Polynomial &operator-=(const Polynomial &o);
    Polynomial &operator*=(Coeff c);

    Polynomial conjugate() const;
    Coeff evaluate(std::span<const Coeff> z) const;
    double evaluate(std::span<const double> x) const;

    bool operator==(const Polynomial &o) const;

private:
    void normalize();

    VariableSpace space_;
    std::vector<Term> terms_; // sorted by id, no duplicates, no zeros
};

Polynomial operator+(Polynomial a, const Polynomial &b);
Polynomial operator-(Polynomial a, const Polynomial &b);
Polynomial operator*(const Polynomial &a, const Polynomial &b);
Polynomial operator*(Polynomial a, Coeff c);
Polynomial operator*(Coeff c, Polynomial a);
Polynomial pow(const Polynomial &a, unsigned k);

// Terms in monomial order, e.g. "1 - 2.5*x1 + x1^2"; complex coefficients print as (a+bim).
std::string to_string(const Polynomial &p, const std::vector<std::string> &names = {}, int precision = 17);

class PolyMatrix {
public:
    PolyMatrix() = default;
    // Row-major m x m entries; must be symmetric (Hermitian over complex spaces).
    PolyMatrix(std::size_t m, std::vector<Polynomial> entries);
    // Accepts a possibly non-square nested literal and validates it.
    static PolyMatrix from_rows(const std::vector<std::vector<Polynomial>> &rows);

    std::size_t side() const { return m_; }
    const Polynomial &at(std::size_t i, std::size_t j) const { return entries_[i * m_ + j]; }
    const std::vector<Polynomial> &entries() const { return entries_; }
    std::uint32_t degree() const;
    const VariableSpace &space() const { return entries_.front().space(); }

private:
    std::size_t m_ = 0;
    std::vector<Polynomial> entries_;
};

} // namespace polyopt
