#include <doctest.h>

#include "polyopt/polyring.hpp"

#include <algorithm>
#include <random>

using namespace polyopt;

namespace {

// All exponent tuples of length n with total degree <= d, by brute force.
void enumerate(std::size_t n, std::uint32_t d, Exponents &cur, std::vector<Exponents> &out) {
    if (cur.size() == n) {
        std::uint32_t s = 0;
        for (auto v : cur) s += v;
        if (s <= d) out.push_back(cur);
        return;
    }
    for (std::uint32_t v = 0; v <= d; ++v) {
        cur.push_back(v);
        enumerate(n, d, cur, out);
        cur.pop_back();
    }
}

std::vector<Exponents> graded_lex(std::size_t n, std::uint32_t d) {
    std::vector<Exponents> all;
    Exponents cur;
    enumerate(n, d, cur, all);
    std::sort(all.begin(), all.end(), [](const Exponents &a, const Exponents &b) {
        std::uint32_t da = 0, db = 0;
        for (auto v : a) da += v;
        for (auto v : b) db += v;
        if (da != db) return da < db;
        return a < b;
    });
    return all;
}

Polynomial var(const VariableSpace &s, std::size_t i) { return Polynomial::variable(s, i); }

} // namespace

TEST_CASE("listing order of the degree-2 basis in three variables") {
    VariableSpace sp(3);
    std::vector<Exponents> expect = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 0, 2},
                                     {0, 1, 1}, {0, 2, 0}, {1, 0, 1}, {1, 1, 0}, {2, 0, 0}};
    auto basis = dense_basis_vector(sp, 2);
    REQUIRE(basis.size() == 10);
    for (std::size_t i = 0; i < basis.size(); ++i) CHECK(decode(basis[i], sp).plain == expect[i]);
    CHECK(monomial_string(basis[5], sp) == "x2*x3");
    CHECK(encode(ExponentKey{{0, 0, 0}, {}}, sp).plain == 0);
}

TEST_CASE("ranks agree with a brute-force sorted enumeration") {
    for (std::size_t n = 1; n <= 4; ++n) {
        auto all = graded_lex(n, 6);
        VariableSpace sp(n);
        for (std::size_t r = 0; r < all.size(); ++r) {
            CHECK(encode(ExponentKey{all[r], {}}, sp).plain == r);
            CHECK(decode(MonomialId{r, 0}, sp).plain == all[r]);
        }
    }
    VariableSpace sp2(2);
    auto all = graded_lex(2, 3);
    auto it = std::find(all.begin(), all.end(), Exponents{1, 2});
    CHECK(encode(ExponentKey{{1, 2}, {}}, sp2).plain == static_cast<std::uint64_t>(it - all.begin()));
}

TEST_CASE("dense basis cardinality") {
    for (std::size_t n = 1; n <= 8; ++n)
        for (std::uint32_t d = 0; d <= 6; ++d) {
            VariableSpace sp(n);
            auto b = dense_basis(sp, d);
            std::uint64_t cnt = 0;
            for (auto m : b) {
                (void)m;
                ++cnt;
            }
            CHECK(cnt == b.size());
            if (n <= 4) CHECK(cnt == graded_lex(n, d).size());
        }
    CHECK(dense_basis(VariableSpace(3), 2).size() == 10);
    CHECK(dense_basis(VariableSpace(1), 5).size() == 6);
    CHECK(dense_basis(VariableSpace(4), 3).size() == 35);
    VariableSpace cs(2, Field::complex);
    for (auto m : dense_basis(cs, 2)) CHECK(m.conj == 0);
}

TEST_CASE("multiplication is exponent addition") {
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 3u, 5u}) {
        VariableSpace sp(n, Field::complex);
        std::uniform_int_distribution<std::uint64_t> pick(0, count_upto(n, 5) - 1);
        for (int t = 0; t < 10000 / 3; ++t) {
            MonomialId a{pick(rng), pick(rng)}, b{pick(rng), pick(rng)};
            auto ka = decode(a, sp), kb = decode(b, sp), kr = decode(mul(a, b, sp), sp);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(kr.plain[i] == ka.plain[i] + kb.plain[i]);
                CHECK(kr.conj[i] == ka.conj[i] + kb.conj[i]);
            }
        }
    }
    VariableSpace sp(3);
    auto x1x2 = encode({{1, 1, 0}, {}}, sp), x2x3 = encode({{0, 1, 1}, {}}, sp);
    CHECK(decode(mul(x1x2, x2x3, sp), sp).plain == Exponents{1, 2, 1});
    CHECK(mul(MonomialId{}, x1x2, sp) == x1x2);
}

TEST_CASE("capacity errors instead of wraparound") {
    CHECK_THROWS_AS(count_upto(40, 60), CapacityError);
    VariableSpace sp(40);
    Exponents e(40, 0);
    e[0] = 60;
    CHECK_THROWS_AS(encode({e, {}}, sp), CapacityError);
    VariableSpace capped(2, Field::real, {2u, std::nullopt});
    CHECK_THROWS(encode({{3, 0}, {}}, capped));
    auto x1 = variable_id(0, capped);
    auto x1sq = mul(x1, x1, capped);
    CHECK_THROWS(mul(x1sq, x1, capped));
}

TEST_CASE("polynomial arithmetic") {
    VariableSpace s1(1);
    auto x = var(s1, 0);
    auto one = Polynomial::constant(s1, 1.0);
    auto p = (x + one) * (x - one);
    CHECK(p == x * x - one);
    CHECK(p.size() == 2);

    VariableSpace s3(3);
    auto X = var(s3, 0), Y = var(s3, 1), Z = var(s3, 2);
    auto m = pow(X, 4) * pow(Y, 2) + pow(X, 2) * pow(Y, 4) - 3.0 * pow(X, 2) * pow(Y, 2) * pow(Z, 2) + pow(Z, 6);
    std::vector<double> pt{1, 1, 1};
    CHECK(m.evaluate(std::span<const double>(pt)) == doctest::Approx(0.0));
    CHECK(m.degree() == 6);
    CHECK(m.is_homogeneous());
    CHECK((m - m).is_zero());

    VariableSpace cs(2, Field::complex);
    auto z1 = Polynomial::variable(cs, 0), z2c = Polynomial::variable(cs, 1, true);
    auto q = z1 * z2c;
    auto expect = Polynomial::variable(cs, 0, true) * Polynomial::variable(cs, 1);
    CHECK(q.conjugate() == expect);
    CHECK_FALSE(q.is_real_valued());
    CHECK((q + q.conjugate()).is_real_valued());
    std::vector<Coeff> zp{Coeff(1, 2), Coeff(0.5, -1)};
    CHECK(std::abs(q.evaluate(std::span<const Coeff>(zp)) - Coeff(1, 2) * std::conj(Coeff(0.5, -1))) < 1e-14);
    CHECK_THROWS(x + X);
}

TEST_CASE("polynomial matrices must be square and symmetric") {
    VariableSpace s2(2);
    auto x = var(s2, 0), y = var(s2, 1);
    CHECK_THROWS(PolyMatrix::from_rows({{x, y, x}, {y, x, y}}));
    CHECK_THROWS(PolyMatrix::from_rows({{x, y}, {x, x}}));
    auto G = PolyMatrix::from_rows({{x, y}, {y, x * x}});
    CHECK(G.degree() == 2);
    CHECK(G.side() == 2);
}
