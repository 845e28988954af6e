#include <doctest.h>

#include "polyopt/basis.hpp"

#include <algorithm>
#include <random>

using namespace polyopt;

namespace {

Polynomial motzkin(const VariableSpace &sp) {
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1), z = Polynomial::variable(sp, 2);
    return pow(x, 4) * pow(y, 2) + pow(x, 2) * pow(y, 4) - 3.0 * pow(x, 2) * pow(y, 2) * pow(z, 2) + pow(z, 6);
}

std::set<std::string> names(const Basis &b, const VariableSpace &sp) {
    std::set<std::string> out;
    for (auto m : b) out.insert(monomial_string(m, sp, {"x", "y", "z"}));
    return out;
}

MonomialId mono(const VariableSpace &sp, Exponents e) { return encode({std::move(e), {}}, sp); }

} // namespace

TEST_CASE("dense groupings") {
    VariableSpace sp(3);
    PopProblem p(sp, motzkin(sp));
    auto g = dense(p, 3);
    CHECK(g.objective.size() == 1);
    CHECK(g.objective[0].size() == 20);
    auto x = Polynomial::variable(sp, 0);
    p.nonneg.push_back(Polynomial::constant(sp, 1.0) - x * x);
    g = dense(p, 3);
    CHECK(g.nonneg[0][0].size() == 10);
    CHECK_THROWS(dense(p, 2));
    // linear problem at its minimal order
    PopProblem lin(sp, x);
    auto gl = dense(lin, min_order(lin));
    CHECK(gl.objective[0].size() == 4);
}

TEST_CASE("Newton polytope of a univariate square plus one") {
    VariableSpace sp(1);
    auto x = Polynomial::variable(sp, 0);
    PopProblem p(sp, x * x + Polynomial::constant(sp, 1.0));
    auto g = newton_polytope(p, dense(p, 3));
    CHECK(g.objective[0] == Basis{mono(sp, {0}), mono(sp, {1})});
}

TEST_CASE("Newton polytope on Motzkin certificates") {
    VariableSpace sp(3);
    auto m = motzkin(sp);
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1), z = Polynomial::variable(sp, 2);

    // unknown quadratic prefactor: its support is the Gram support of {1, x, y, z}
    auto qs = gram_support(dense_basis_vector(sp, 1), sp);
    auto support = minkowski_sum(m.support(), qs, sp);
    NewtonReport rep;
    auto kept = newton_filter(sp, dense_basis_vector(sp, 4), support, {}, &rep);
    CHECK(dense_basis_vector(sp, 4).size() == 35);
    CHECK(kept.size() == 13);
    std::set<std::string> expect{"x^3*y", "x*y^3", "x*z^3", "x^2*y", "z^3",   "x^2*y^2", "x*y^2*z",
                                 "y*z^3", "x*y^2", "x^2*y*z", "x*y*z^2", "z^4", "x*y*z"};
    CHECK(names(kept, sp) == expect);
    CHECK(rep.lp_solves > 0);

    // fixed prefactor x^2 + y^2 + z^2
    PopProblem pr(sp, (x * x + y * y + z * z) * m);
    NewtonOptions cert;
    cert.with_bound = false;
    auto g = newton_polytope(pr, dense(pr, 4), cert);
    CHECK(g.objective[0].size() == 9);
    std::set<std::string> expect9{"x^3*y", "x^2*y*z", "x*y^2*z", "x*z^3", "z^4", "x^2*y^2", "x*y^3", "x*y*z^2", "y*z^3"};
    CHECK(names(g.objective[0], sp) == expect9);

    // homogeneous basis first: 15 monomials, Newton polytope leaves the same 9
    auto h = homogeneous_filter(dense(pr, 4), pr.objective);
    CHECK(h.objective[0].size() == 15);
    CHECK(newton_polytope(pr, h, cert).objective[0] == g.objective[0]);

    NewtonOptions plain;
    plain.akl_toussaint = false;
    plain.parallel = false;
    plain.with_bound = false;
    CHECK(newton_polytope(pr, dense(pr, 4), plain).objective[0] == g.objective[0]);
}

TEST_CASE("homogeneous filter") {
    VariableSpace s2(2);
    auto x = Polynomial::variable(s2, 0), y = Polynomial::variable(s2, 1);
    PopProblem p(s2, pow(x, 4) + pow(y, 4) + x * x * y * y);
    CHECK(homogeneous_filter(dense(p, 2), p.objective).objective[0].size() == 3);
    PopProblem c(s2, Polynomial::constant(s2, 2.0));
    CHECK(homogeneous_filter(dense(c, 1), c.objective).objective[0] == Basis{MonomialId{}});
    PopProblem nh(s2, x * x + y);
    CHECK_THROWS(homogeneous_filter(dense(nh, 1), nh.objective));
}

TEST_CASE("diagonal consistency") {
    VariableSpace sp(1);
    auto x = Polynomial::variable(sp, 0);
    PopProblem p(sp, pow(x, 4) + x * x);
    auto g = diagonal_consistency(p, dense(p, 2), false);
    CHECK(g.objective[0] == Basis{mono(sp, {1}), mono(sp, {2})});
    // with a free bound the constant stays
    CHECK(diagonal_consistency(p, dense(p, 2)).objective[0].size() == 3);

    // brute-force oracle: j survives iff 2j in support or 2j = k + l with distinct survivors
    VariableSpace s2(2);
    std::mt19937 rng(5);
    for (int t = 0; t < 20; ++t) {
        std::vector<Term> terms;
        for (auto m : dense_basis_vector(s2, 4))
            if (rng() % 3 == 0) terms.push_back({m, 1.0});
        PopProblem q(s2, Polynomial(s2, terms));
        auto sup = q.objective.support();
        sup.push_back(MonomialId{});
        auto got = diagonal_consistency(q, dense(q, 2)).objective[0];
        Basis cur = dense_basis_vector(s2, 2);
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t a = 0; a < cur.size(); ++a) {
                auto sq = mul(cur[a], cur[a], s2);
                bool ok = std::find(sup.begin(), sup.end(), sq) != sup.end();
                for (std::size_t k = 0; k < cur.size() && !ok; ++k)
                    for (std::size_t l = k + 1; l < cur.size() && !ok; ++l) ok = mul(cur[k], cur[l], s2) == sq;
                if (!ok) {
                    cur.erase(cur.begin() + a);
                    changed = true;
                    break;
                }
            }
        }
        CHECK(got == cur);
    }
    // full even support: nothing removed
    VariableSpace s3(2);
    std::vector<Term> all;
    for (auto m : dense_basis_vector(s3, 4)) all.push_back({m, 1.0});
    PopProblem full(s3, Polynomial(s3, all));
    CHECK(diagonal_consistency(full, dense(full, 2)).objective[0].size() == 6);
}

TEST_CASE("diagonal consistency over a complex space") {
    VariableSpace cs(2, Field::complex);
    auto z1 = Polynomial::variable(cs, 0), z2 = Polynomial::variable(cs, 1);
    auto c1 = z1.conjugate(), c2 = z2.conjugate();
    auto p = z1 * c1 * z2 * c2 + z1 * c2 + z2 * c1 + Polynomial::constant(cs, 3.0);
    PopProblem q(cs, p);
    auto got = diagonal_consistency(q, dense(q, 2)).objective[0];
    // plain parts of every monomial occurring, conjugated or not: 1, z1, z2, z1 z2
    std::set<MonomialId> expect;
    for (auto &t : p.terms()) {
        expect.insert(MonomialId{t.id.plain, 0});
        expect.insert(MonomialId{t.id.conj, 0});
    }
    CHECK(std::set<MonomialId>(got.begin(), got.end()) == expect);
}

TEST_CASE("graph helpers") {
    graph::Adjacency cycle(4);
    auto edge = [](graph::Adjacency &g, std::size_t a, std::size_t b) {
        g[a].insert(b);
        g[b].insert(a);
    };
    edge(cycle, 0, 1);
    edge(cycle, 1, 2);
    edge(cycle, 2, 3);
    edge(cycle, 3, 0);
    CHECK_FALSE(graph::is_chordal(cycle));
    CHECK(graph::maximal_cliques(cycle).size() == 4);
    auto cl = graph::chordal_cliques(cycle);
    CHECK(cl.size() == 2);
    for (auto &c : cl) CHECK(c.size() == 3);
    graph::Adjacency two(5);
    edge(two, 0, 1);
    edge(two, 3, 4);
    CHECK(graph::connected_components(two).size() == 3);
    CHECK(graph::is_chordal(two));
}

TEST_CASE("correlative sparsity") {
    VariableSpace sp(3);
    auto x1 = Polynomial::variable(sp, 0), x2 = Polynomial::variable(sp, 1), x3 = Polynomial::variable(sp, 2);
    PopProblem p(sp, x1 * x1 * x2 * x2 + x2 * x2 * x3 * x3);
    auto g = correlative_sparsity(p, 2);
    CHECK(g.cliques == std::vector<std::vector<std::size_t>>{{0, 1}, {1, 2}});
    CHECK(g.objective.size() == 2);
    CHECK(g.objective[0].size() == 6);

    PopProblem d(sp, x1 * x2 * x3);
    CHECK(correlative_sparsity(d, 2).cliques.size() == 1);

    // a low-order constraint linking x1 and x3 forces a merge
    p.nonneg.push_back(Polynomial::constant(sp, 1.0) - x1 * x3);
    CorrelativeOptions o;
    o.high_order_nonneg = {false};
    std::vector<std::string> diag;
    auto gm = correlative_sparsity(p, 2, o, &diag);
    CHECK(diag.size() == 1);
    CHECK(gm.cliques.size() == 1);
    CHECK(gm.nonneg[0][0] == Basis{MonomialId{}});
}

TEST_CASE("term sparsity") {
    // x^4 + y^4 + xy at d = 2 over the basis 1, y, x, y^2, xy, x^2
    VariableSpace sp(2);
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1);
    PopProblem p(sp, pow(x, 4) + pow(y, 4) + x * y);
    auto st = term_sparsity_init(p, 2, Extension::block);
    // hand enumeration: U0 = {1, xy, x^4, y^4} and the squares {1, y^2, x^2, y^4, x^2y^2, x^4}
    auto B = dense_basis_vector(sp, 2);
    std::set<MonomialId> U0{MonomialId{}};
    for (auto &t : p.objective.terms()) U0.insert(t.id);
    for (auto b : B) U0.insert(mul(b, b, sp));
    CHECK(st.base == U0);
    // edges 1-xy, 1-y^2, 1-x^2, y-x, y^2-x^2: components {1, y^2, xy, x^2} and {y, x}
    graph::Adjacency adj(B.size());
    for (std::size_t i = 0; i < B.size(); ++i)
        for (std::size_t j = i + 1; j < B.size(); ++j)
            if (U0.count(mul(B[i], B[j], sp))) {
                adj[i].insert(j);
                adj[j].insert(i);
            }
    std::vector<Basis> expect;
    for (auto &c : graph::connected_components(adj)) {
        Basis b;
        for (auto i : c) b.push_back(B[i]);
        expect.push_back(b);
    }
    std::sort(expect.begin(), expect.end());
    CHECK(st.groupings.objective == expect);
    CHECK(st.groupings.objective.size() == 2);
    int it = 0;
    while (!term_sparsity_iterate(st) && it < 10) ++it;
    CHECK(st.converged);
    CHECK(it < 10);

    // dense support: a single full block straight away
    std::vector<Term> all;
    for (auto m : dense_basis_vector(sp, 4)) all.push_back({m, 1.0});
    PopProblem d(sp, Polynomial(sp, all));
    auto sd = term_sparsity_init(d, 2, Extension::cliques);
    CHECK(sd.groupings.objective.size() == 1);
    CHECK(sd.groupings.objective[0] == B);
    CHECK(term_sparsity_iterate(sd));
}
