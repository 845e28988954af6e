#include <doctest.h>

#include "polyopt/certify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace polyopt;

namespace {

PopProblem worked_example() {
    VariableSpace sp(3);
    auto x1 = Polynomial::variable(sp, 0), x2 = Polynomial::variable(sp, 1), x3 = Polynomial::variable(sp, 2);
    auto p = Polynomial::constant(sp, 1.0) + x2 * x3 + pow(x3, 4) + x2 * x2 * x3 * x3 + pow(x2, 4) +
             x1 * x1 * x3 * x3 + x1 * x1 * x2 * x2 + pow(x1, 4);
    return PopProblem(sp, p);
}

Polynomial motzkin(const VariableSpace &sp) {
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1), z = Polynomial::variable(sp, 2);
    return pow(x, 4) * pow(y, 2) + pow(x, 2) * pow(y, 4) - 3.0 * pow(x, 2) * pow(y, 2) * pow(z, 2) + pow(z, 6);
}

MomentVector mixture(const VariableSpace &sp, const std::vector<std::vector<Coeff>> &atoms,
                     const std::vector<double> &weights, std::uint32_t degree) {
    MomentVector y;
    for (std::size_t k = 0; k < atoms.size(); ++k)
        for (auto &[m, v] : point_moments(sp, atoms[k], degree)) y[m] += weights[k] * v;
    return y;
}

double distance(const std::vector<Coeff> &a, const std::vector<Coeff> &b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// largest distance from an expected atom to its closest extracted one
double match_error(const std::vector<std::vector<Coeff>> &expected, const std::vector<std::vector<Coeff>> &got) {
    double worst = 0.0;
    for (auto &e : expected) {
        double best = std::numeric_limits<double>::infinity();
        for (auto &g : got) best = std::min(best, distance(e, g));
        worst = std::max(worst, best);
    }
    return worst;
}

std::size_t square_count(const SosCertificate &c) {
    std::size_t n = 0;
    for (auto &b : c.blocks) n += b.squares.size();
    return n;
}

} // namespace

TEST_CASE("worked example: certificate, minimizers and squares") {
    auto prob = worked_example();
    auto g = dense(prob, 2);
    for (Form form : {Form::moment, Form::sos}) {
        OptimizeOptions o;
        o.form = form;
        auto r = optimize(prob, g, 2, o);
        REQUIRE(r.status() == Status::optimal);
        CHECK(r.bound == doctest::Approx(0.9166667).epsilon(1e-6));
        CHECK(std::abs(riesz(prob.objective, r.moments).real() - r.bound) < 1e-7);

        auto oc = optimality_certificate(r);
        CHECK(oc.status == Optimality::optimal);
        CHECK(oc.ranks == std::vector<std::size_t>{1, 2, 2});

        auto ex = extract_solutions(r);
        CHECK_FALSE(ex.heuristic);
        REQUIRE(ex.solutions.size() == 2);
        const double s = 0.408243;
        std::vector<std::vector<Coeff>> expected{{0.0, -s, s}, {0.0, s, -s}};
        std::vector<std::vector<Coeff>> got;
        for (auto &c : ex.solutions) {
            got.push_back(c.point);
            CHECK(c.quality <= 1e-6);
        }
        CHECK(match_error(expected, got) < 1e-3);

        auto cert = sos_certificate(r);
        CHECK(square_count(cert) == 8);
        CHECK(cert.residual_norm <= (form == Form::sos ? 1e-8 : 1e-7));
        CHECK(cert.bound == doctest::Approx(r.bound).epsilon(1e-8));
    }
}

TEST_CASE("DD result is not certified") {
    auto prob = worked_example();
    OptimizeOptions o;
    o.representation = Representation::dd;
    auto r = optimize(prob, dense(prob, 2), 2, o);
    REQUIRE(r.status() == Status::optimal);
    CHECK(r.bound == doctest::Approx(0.5).epsilon(1e-6));
    auto oc = optimality_certificate(r);
    CHECK(oc.status == Optimality::unknown);
    CHECK_FALSE(oc.diagnostics.empty());
}

TEST_CASE("looser rank tolerance keeps an optimal certificate") {
    auto prob = worked_example();
    auto r = optimize(prob, dense(prob, 2), 2);
    for (double tol : {1e-8, 1e-6, 1e-4, 1e-2}) CHECK(optimality_certificate(r, tol).status == Optimality::optimal);
}

TEST_CASE("badly scaled sextic reaches full accuracy") {
    // minimizer near -2.765, where the degree-6 moment is about 450
    const std::vector<double> a{-0.2493539512130507, -0.8918288200146334, -1.528758565755804, -0.4762640766909667,
                                -2.2615364683657457, 1.1559513399671069,  0.5421531824537725};
    VariableSpace sp(1);
    Polynomial p(sp);
    for (std::size_t k = 0; k < a.size(); ++k) p += Polynomial::monomial(sp, MonomialId{k, 0}, a[k]);
    PopProblem prob(sp, p);
    auto r = optimize(prob, dense(prob, 3), 3);
    REQUIRE(r.status() == Status::optimal);
    CHECK(std::abs(r.bound - -76.13928113770707) < 1e-6);
}

TEST_CASE("single minimizer gives a rank-one moment matrix") {
    VariableSpace sp(2);
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1);
    auto one = Polynomial::constant(sp, 1.0);
    PopProblem prob(sp, pow(x - one, 2) + pow(y - 2.0 * one, 2));
    auto r = optimize(prob, dense(prob, 1), 1);
    REQUIRE(r.status() == Status::optimal);
    auto oc = optimality_certificate(r);
    CHECK(oc.status == Optimality::optimal);
    CHECK(oc.ranks == std::vector<std::size_t>{1, 1});
    auto ex = extract_solutions(r);
    REQUIRE(ex.solutions.size() == 1);
    CHECK(distance(ex.solutions[0].point, {1.0, 2.0}) < 1e-5);

    // (x - 1)^2 is its own certificate
    VariableSpace s1(1);
    auto t = Polynomial::variable(s1, 0);
    PopProblem sq(s1, pow(t - Polynomial::constant(s1, 1.0), 2));
    OptimizeOptions o;
    o.form = Form::sos;
    auto rs = optimize(sq, dense(sq, 1), 1, o);
    REQUIRE(rs.status() == Status::optimal);
    auto cert = sos_certificate(rs);
    REQUIRE(square_count(cert) == 1);
    const auto &q = cert.blocks[0].squares[0].q[0];
    const double sign = q.coefficient(variable_id(0, s1)).real() > 0 ? 1.0 : -1.0;
    CHECK(q.coefficient(variable_id(0, s1)).real() * sign == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(q.coefficient(MonomialId{}).real() * sign == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(cert.residual_norm < 1e-7);
}

TEST_CASE("extraction from exact moments") {
    SUBCASE("point evaluation at (1, 2)") {
        VariableSpace sp(2);
        auto y = point_moments(sp, std::vector<Coeff>{1.0, 2.0}, 4);
        auto rep = extract_atoms(sp, y, 2);
        REQUIRE(rep.ok());
        REQUIRE(rep.atoms.size() == 1);
        CHECK(distance(rep.atoms[0], {1.0, 2.0}) < 1e-12);
    }
    SUBCASE("equal mixture at +1 and -1") {
        VariableSpace sp(1);
        auto y = mixture(sp, {{1.0}, {-1.0}}, {0.5, 0.5}, 4);
        // brute force: odd moments vanish, even ones are 1
        CHECK(std::abs(y.at(MonomialId{1, 0})) < 1e-15);
        CHECK(std::abs(y.at(MonomialId{4, 0}) - 1.0) < 1e-15);
        auto rep = extract_atoms(sp, y, 2);
        REQUIRE(rep.ok());
        CHECK(rep.atoms.size() == 2);
        CHECK(match_error({{1.0}, {-1.0}}, rep.atoms) < 1e-10);
    }
    SUBCASE("complex atom") {
        VariableSpace sp(2, Field::complex);
        std::vector<Coeff> a{Coeff(0.3, -0.7), Coeff(-1.1, 0.2)}, b{Coeff(0.5, 0.5), Coeff(0.0, 1.0)};
        auto y = mixture(sp, {a, b}, {0.25, 0.75}, 2);
        auto rep = extract_atoms(sp, y, 2);
        REQUIRE(rep.ok());
        CHECK(rep.atoms.size() == 2);
        CHECK(match_error({a, b}, rep.atoms) < 1e-9);
    }
}

TEST_CASE("extraction round trip on random atom sets") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coord(-1.0, 1.0), weight(0.1, 1.0);
    int recovered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 3, k = 1 + (trial / 3) % 4;
        VariableSpace sp(n);
        std::vector<std::vector<Coeff>> atoms(k, std::vector<Coeff>(n));
        std::vector<double> w(k);
        double total = 0.0;
        // well separated atoms: the smallest nonzero eigenvalue of M_t shrinks like a power of the
        // separation, and close pairs drop below the rank tolerance
        for (std::size_t j = 0; j < k; ++j) {
            do {
                for (auto &c : atoms[j]) c = coord(rng);
            } while (std::any_of(atoms.begin(), atoms.begin() + static_cast<long>(j),
                                 [&](auto &o) { return distance(o, atoms[j]) < 0.25; }));
            total += (w[j] = weight(rng));
        }
        for (auto &v : w) v /= total;
        const std::uint32_t d = n == 1 ? 4 : 3;
        auto rep = extract_atoms(sp, mixture(sp, atoms, w, 2 * d), d);
        if (rep.ok() && rep.atoms.size() == k && match_error(atoms, rep.atoms) < 1e-6) ++recovered;
        else MESSAGE("trial " << trial << " failed");
    }
    CHECK(recovered == 50);
}

TEST_CASE("constrained minimizer in the real and complex case") {
    VariableSpace sp(1);
    auto x = Polynomial::variable(sp, 0);
    PopProblem prob(sp, x);
    prob.nonneg.push_back(Polynomial::constant(sp, 1.0) - x * x);
    auto r = optimize(prob, dense(prob, 2), 2);
    REQUIRE(r.status() == Status::optimal);
    CHECK(optimality_certificate(r).status == Optimality::optimal);
    auto ex = extract_solutions(r);
    REQUIRE_FALSE(ex.solutions.empty());
    CHECK(std::abs(ex.solutions[0].point[0] + 1.0) < 1e-5);
    CHECK(ex.solutions[0].quality < 1e-6);

    VariableSpace cs(1, Field::complex);
    auto z = Polynomial::variable(cs, 0), zc = Polynomial::variable(cs, 0, true);
    PopProblem ball(cs, z + zc);
    ball.nonneg.push_back(Polynomial::constant(cs, 4.0) - z * zc);
    auto rb = optimize(ball, dense(ball, 2), 2);
    REQUIRE(rb.status() == Status::optimal);
    CHECK(rb.bound == doctest::Approx(-4.0).epsilon(1e-6));
    CHECK(optimality_certificate(rb).status == Optimality::optimal);
    auto eb = extract_solutions(rb);
    REQUIRE_FALSE(eb.solutions.empty());
    CHECK(std::abs(eb.solutions[0].point[0] - Coeff(-2.0)) < 1e-4);

    PopProblem sphere(cs, z + zc);
    sphere.zero.push_back(z * zc - Polynomial::constant(cs, 1.0));
    auto rs = optimize(sphere, dense(sphere, 2), 2);
    REQUIRE(rs.status() == Status::optimal);
    auto oc = optimality_certificate(rs);
    CHECK(oc.status == Optimality::unknown);
    REQUIRE_FALSE(oc.diagnostics.empty());
    CHECK(oc.diagnostics[0].find("ball") != std::string::npos);
}

TEST_CASE("solution quality uses the original constraints") {
    VariableSpace sp(2);
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1);
    PopProblem prob(sp, x * y);
    prob.nonneg.push_back(Polynomial::constant(sp, 1.0) - x * x);
    prob.zero.push_back(x + y);
    std::vector<Coeff> pt{2.0, -1.0};
    // objective gap 1, inequality -3, equality 1
    CHECK(solution_quality(prob, pt, -3.0) == doctest::Approx(3.0));
    CHECK(solution_quality(prob, pt, -2.0) == doctest::Approx(3.0));
    std::vector<Coeff> ok{0.5, -0.5};
    CHECK(solution_quality(prob, ok, -0.25) == doctest::Approx(0.0));
}

TEST_CASE("heuristic extraction") {
    SUBCASE("signs from a mixed moment") {
        VariableSpace sp(2);
        auto m = [&](Exponents e) { return encode({std::move(e), {}}, sp); };
        MomentVector y{{MonomialId{}, 1.0}, {m({2, 0}), 4.0}, {m({0, 2}), 9.0}, {m({1, 1}), -6.0}};
        HeuristicSolutions h(sp, y);
        auto a = h.next();
        auto b = h.next();
        REQUIRE(a);
        REQUIRE(b);
        CHECK(distance(*a, {2.0, -3.0}) < 1e-12);
        CHECK(distance(*b, {-2.0, 3.0}) < 1e-12);
        CHECK_FALSE(h.next());
    }
    SUBCASE("an odd moment fixes the sign") {
        VariableSpace sp(2);
        auto y = point_moments(sp, std::vector<Coeff>{2.0, -3.0}, 4);
        HeuristicSolutions h(sp, y);
        auto a = h.next();
        REQUIRE(a);
        CHECK(distance(*a, {2.0, -3.0}) < 1e-12);
        CHECK_FALSE(h.next());
    }
    SUBCASE("zero moments") {
        VariableSpace sp(2);
        MomentVector y;
        for (auto m : dense_basis_vector(sp, 4)) y[m] = m.is_one() ? 1.0 : 0.0;
        HeuristicSolutions h(sp, y);
        auto a = h.next();
        REQUIRE(a);
        CHECK(distance(*a, {0.0, 0.0}) == 0.0);
        CHECK_FALSE(h.next());
    }
    SUBCASE("zero product with a known nonzero factor") {
        VariableSpace sp(2);
        auto m = [&](Exponents e) { return encode({std::move(e), {}}, sp); };
        MomentVector y{{MonomialId{}, 1.0}, {m({2, 0}), 1.0}, {m({1, 1}), 0.0}};
        HeuristicSolutions h(sp, y);
        auto a = h.next();
        REQUIRE(a);
        CHECK(distance(*a, {1.0, 0.0}) == 0.0);
    }
    SUBCASE("symmetric mixture branches over both signs") {
        VariableSpace sp(1);
        auto y = mixture(sp, {{1.0}, {-1.0}}, {0.5, 0.5}, 4);
        HeuristicSolutions h(sp, y);
        auto a = h.next(), b = h.next();
        REQUIRE(a);
        REQUIRE(b);
        CHECK(distance(*a, {1.0}) < 1e-12);
        CHECK(distance(*b, {-1.0}) < 1e-12);
    }
    SUBCASE("complex phase from a first-order moment") {
        VariableSpace sp(1, Field::complex);
        const Coeff z0 = std::polar(1.5, 0.7);
        auto y = point_moments(sp, std::vector<Coeff>{z0}, 2);
        HeuristicSolutions h(sp, y);
        auto a = h.next();
        REQUIRE(a);
        CHECK(std::abs((*a)[0] - z0) < 1e-12);
    }
}

TEST_CASE("Motzkin times x^2 + y^2 + 4 z^2") {
    VariableSpace sp(3);
    auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1), z = Polynomial::variable(sp, 2);
    auto m = motzkin(sp);
    auto lhs = (x * x + y * y + 4.0 * z * z) * m;
    // exact identity, checked in exact (integer) coefficient arithmetic
    auto rhs = pow(pow(x, 3) * y - x * pow(y, 3), 2) + pow(x * pow(z, 3) - x * y * y * z, 2) +
               pow(y * pow(z, 3) - x * x * y * z, 2) + 4.0 * pow(x * x * y * y - pow(z, 4), 2);
    CHECK(lhs == rhs);

    // the exact Gram matrix of the identity is a feasible point of the SOS program over the
    // Newton polytope basis, and its certificate has exactly the four squares
    PopProblem prob(sp, lhs);
    NewtonOptions no;
    no.with_bound = false;
    auto g = newton_polytope(prob, dense(prob, 4), no);
    REQUIRE(g.objective.size() == 1);
    const auto &B = g.objective[0];
    auto build = build_sos(prob, g, 4);
    const std::vector<std::pair<double, Polynomial>> squares{
        {1.0, pow(x, 3) * y - x * pow(y, 3)},
        {1.0, x * pow(z, 3) - x * y * y * z},
        {1.0, y * pow(z, 3) - x * x * y * z},
        {4.0, x * x * y * y - pow(z, 4)}};
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<long>(B.size()), static_cast<long>(B.size()));
    for (auto &[w, q] : squares) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<long>(B.size()));
        for (auto &t : q.terms()) {
            auto pos = std::find(B.begin(), B.end(), t.id);
            REQUIRE(pos != B.end());
            v(pos - B.begin()) = t.coeff.real();
        }
        G += w * v * v.transpose();
    }
    OptimizationResult exact{build, {}, {}, {}};
    exact.solution.status = Status::optimal;
    exact.solution.x.assign(build.program.num_vars(), 0.0);
    const auto &gp = build.gram_params[0];
    for (std::size_t k = 0; k < gp.vars.size(); ++k) {
        auto [i, j, w] = gp.shapes[k].front();
        exact.solution.x[gp.vars[k]] = G(static_cast<long>(i), static_cast<long>(j)) / w;
    }
    std::vector<double> ax(build.program.rows, 0.0);
    for (auto &t : build.program.a) ax[t.row] += t.value * exact.solution.x[t.col];
    for (std::size_t r = 0; r < ax.size(); ++r) CHECK(std::abs(ax[r] - build.program.b[r]) < 1e-12);
    auto ec = sos_certificate(exact);
    CHECK(square_count(ec) == 4);
    CHECK(ec.residual_norm < 1e-12);

    // numerical solve: this program has no interior point (the form has real zeros), and the
    // solver stops just short of 1e-8 feasibility with a limit status
    OptimizeOptions o;
    o.form = Form::sos;
    auto r = optimize(prob, g, 4, o);
    REQUIRE((r.status() == Status::optimal || r.status() == Status::limit_feasible_suspect));
    CHECK(std::abs(r.bound) < 1e-6);
    CHECK(r.solution.primal_residual < 1e-7);
    auto cert = sos_certificate(r);
    CHECK(cert.residual_norm < 1e-6);
}

TEST_CASE("indefinite Gram matrix is rejected") {
    VariableSpace sp(1);
    auto t = Polynomial::variable(sp, 0);
    PopProblem prob(sp, pow(t, 2));
    OptimizeOptions o;
    o.form = Form::sos;
    auto r = optimize(prob, dense(prob, 1), 1, o);
    REQUIRE(r.status() == Status::optimal);
    // overwrite the Gram diagonal entry of x * x
    const auto &gp = r.relaxation.gram_params[0];
    for (std::size_t k = 0; k < gp.vars.size(); ++k)
        for (auto &[i, j, w] : gp.shapes[k])
            if (i == 1 && j == 1) r.solution.x[gp.vars[k]] = -0.5;
    try {
        sos_certificate(r);
        FAIL("no error");
    } catch (const CertificateError &e) {
        CHECK(e.most_negative < -0.4);
    }
}

TEST_CASE("certificate printing") {
    VariableSpace s1(1);
    auto t = Polynomial::variable(s1, 0);
    PopProblem sq(s1, pow(t - Polynomial::constant(s1, 1.0), 2));
    OptimizeOptions o;
    o.form = Form::sos;
    auto cert = sos_certificate(optimize(sq, dense(sq, 1), 1, o));
    auto text = cert.to_string({"t"});
    CHECK(text.find("t") != std::string::npos);
    CHECK(text.find("residual norm") != std::string::npos);
}
