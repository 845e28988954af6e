#include <doctest.h>

#include "polyopt/interpolant.hpp"
#include "polyopt/rational.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace polyopt;

namespace {

// Chebyshev product prod_i T_{j_i}(t_i) evaluated through the cosine form of each factor.
double chebyshev(const Exponents &j, const Eigen::RowVectorXd &t) {
    double v = 1.0;
    for (std::size_t i = 0; i < j.size(); ++i) v *= std::cos(j[i] * std::acos(std::clamp(t[i], -1.0, 1.0)));
    return v;
}

// Recurrence evaluation, independent of the cosine form.
double chebyshev_recurrence(std::uint32_t k, double t) {
    double a = 1.0, b = t;
    if (k == 0) return a;
    for (std::uint32_t m = 1; m < k; ++m) {
        const double c = 2 * t * b - a;
        a = b;
        b = c;
    }
    return b;
}

const std::vector<std::pair<std::size_t, std::uint32_t>> small_shapes = {{1, 1}, {1, 2}, {1, 3}, {2, 1}, {2, 2},
                                                                          {2, 3}, {3, 1}, {3, 2}, {3, 3}};

Eigen::VectorXd interior(std::size_t U, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Eigen::VectorXd p(U);
    for (auto &x : p) x = u(rng);
    return p;
}

Eigen::VectorXd direction(std::size_t U, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXd h(U);
    for (auto &x : h) x = g(rng);
    return h;
}

} // namespace

TEST_CASE("wrap reduces cosine arguments") {
    auto w = wrap(7, 9);
    CHECK(w.magnitude == 5);
    CHECK(w.negative);
    CHECK_FALSE(w.vanishes);
    CHECK(wrap(7, 7).vanishes);
    for (std::uint64_t x = 0; x < 7; ++x) {
        auto v = wrap(7, x);
        CHECK(v.magnitude == x);
        CHECK_FALSE(v.negative);
        CHECK_FALSE(v.vanishes);
    }
    // Identity behind the rule: cos(pi (c+1/2) x / N) = sign cos(pi (c+1/2) m / N).
    for (std::uint64_t N : {5u, 7u, 12u})
        for (std::uint64_t x = 0; x < 5 * N; ++x)
            for (std::uint64_t c = 0; c < N; ++c) {
                const auto v = wrap(N, x);
                const double lhs = std::cos(M_PI * (c + 0.5) * x / N);
                const double rhs = v.vanishes ? 0.0 : (v.negative ? -1 : 1) * std::cos(M_PI * (c + 0.5) * v.magnitude / N);
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9).scale(1));
            }
}

TEST_CASE("build_A rows") {
    auto A = build_A(1, 2, 4, {1});
    REQUIRE(A.rows == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(A.entries[j].size() == 1);
        CHECK(A.entries[j][0].first == j);
        CHECK(A.entries[j][0].second == 1);
    }
    auto B = build_A(3, 4, 37, {1, 8, 23});
    REQUIRE(B.entries[0].size() == 1);
    CHECK(B.entries[0][0] == std::pair<std::size_t, std::int64_t>{0, 1});

    // Each row reproduces 2^(1 - nnz) times the cosine sum over all sign vectors.
    const std::uint64_t N = 37;
    const std::vector<std::uint64_t> r = {1, 8, 23};
    for (std::size_t j = 0; j < B.rows; ++j) {
        const Exponents e = unrank_exponents(3, j);
        const int nnz = static_cast<int>(std::count_if(e.begin(), e.end(), [](auto x) { return x > 0; }));
        for (std::uint64_t c = 0; c < N; c += 5) {
            double full = 0;
            for (int s = 0; s < 8; ++s) {
                double x = 0;
                for (int i = 0; i < 3; ++i) x += ((s >> i & 1) ? -1.0 : 1.0) * r[i] * e[i];
                full += std::cos(M_PI * (c + 0.5) * x / N);
            }
            full /= 8;
            double row = 0;
            for (auto [col, v] : B.entries[j]) row += v * std::cos(M_PI * (c + 0.5) * col / N);
            const double kappa = nnz == 0 ? 1.0 : std::ldexp(1.0, 1 - nnz);
            CHECK(full == doctest::Approx(kappa * row).scale(1).epsilon(1e-12));
        }
    }

    // Low-degree rows stay within the N_r bound on every searched plan.
    for (auto [n, d] : small_shapes) {
        const PointPlan plan = search_plan(n, d);
        auto M = build_A(n, d, plan.N, plan.r);
        for (auto &row : M.entries) CHECK(row.size() <= row_nonzero_bound(n, d));
    }
}

TEST_CASE("exact rational promotes and demotes") {
    const Rational big = Rational(std::int64_t{1} << 62) * Rational(std::int64_t{1} << 40);
    CHECK(big.is_big());
    CHECK(big.big() == BigRational(boost::multiprecision::cpp_int(1) << 102));
    const Rational back = big / Rational(std::int64_t{1} << 62);
    CHECK_FALSE(back.is_big());
    CHECK(back == Rational(std::int64_t{1} << 40));
    const Rational third = Rational(1) / Rational(3);
    CHECK((third + third + third) == Rational(1));
    CHECK((third - Rational(1)).str() == "-2/3");
    const Rational tiny = Rational(1) / Rational(std::numeric_limits<std::int64_t>::max());
    CHECK((tiny * tiny).is_big());
    CHECK(((tiny * tiny) / tiny) == tiny);
}

TEST_CASE("plan search matches the tabulated smallest choices") {
    const std::uint64_t n1[] = {4, 7, 10, 13, 16};
    for (std::uint32_t d = 1; d <= 5; ++d) {
        const PointPlan p = search_plan(1, d);
        CHECK(p.N == n1[d - 1]);
        CHECK(p.r == std::vector<std::uint64_t>{1});
    }
    struct Entry {
        std::size_t n;
        std::uint32_t d;
        std::uint64_t N;
        std::vector<std::uint64_t> r;
    };
    const std::vector<Entry> table = {{2, 2, 17, {1, 5}}, {2, 3, 31, {1, 7}}, {3, 1, 11, {1, 4, 5}},
                                      {3, 2, 37, {1, 8, 23}}, {3, 3, 87, {1, 14, 23}}};
    for (const auto &e : table) {
        CAPTURE(e.n);
        CAPTURE(e.d);
        const PointPlan p = search_plan(e.n, e.d);
        CHECK(p.N == e.N);
        CHECK(p.r == e.r);
        CHECK(p.N - p.U() == predicted_excess(e.n, e.d));
        CHECK_FALSE(p.fallback);
    }
    // (2, 1): the tabulated r(1) = 4 is admissible, but r(1) = 3 comes first in the search order.
    const PointPlan p21 = search_plan(2, 1);
    CHECK(p21.N == 7);
    CHECK(p21.r == std::vector<std::uint64_t>{1, 3});
    CHECK(admissible(2, 1, 7, {1, 4}));
    CHECK(p21.N - p21.U() == predicted_excess(2, 1));
}

TEST_CASE("plan search details") {
    // Starting at U finds the smaller unisolvent size for one variable.
    SearchOptions from_u;
    from_u.start_N = 3;
    CHECK(search_plan(1, 1, from_u).N == 3);
    CHECK_FALSE(admissible(2, 2, 16, {1, 5}));
    CHECK_FALSE(admissible(2, 2, 17, {1, 4}));
    CHECK_FALSE(admissible(2, 2, 17, {2, 5}));

    SearchOptions serial;
    serial.parallel = false;
    SearchOptions threaded;
    threaded.threads = 4;
    const PointPlan a = search_plan(3, 2, serial), b = search_plan(3, 2, threaded);
    CHECK(a.N == b.N);
    CHECK(a.r == b.r);
    CHECK(a.c == b.c);

    SearchOptions capped;
    capped.max_N = 16;
    const PointPlan f = search_plan(2, 2, capped);
    CHECK(f.fallback);
    CHECK(f.N == 21);
    CHECK(f.r == std::vector<std::uint64_t>{1, 5});

    for (auto [n, d] : small_shapes) {
        const PointPlan fb = fallback_plan(n, d);
        CHECK(admissible(n, d, fb.N, fb.r));
        const PointPlan p = search_plan(n, d);
        CHECK(p.c.size() == p.U());
        CHECK(std::is_sorted(p.c.begin(), p.c.end()));
        CHECK(p.Z.size() <= column_bound(n, d));
        CHECK(p.Z.size() < p.U());
        CHECK(p.Z.size() >= p.L());
    }
    CHECK(column_bound(1, 1) == 2);
    CHECK(column_bound(3, 3) == 32);
    CHECK(row_nonzero_bound(3, 2) == 2);
    CHECK(row_nonzero_bound(4, 3) == 4);
}

TEST_CASE("W factorisation equals the Chebyshev basis at the nodes") {
    std::mt19937_64 rng(7);
    for (auto [n, d] : small_shapes) {
        CAPTURE(n);
        CAPTURE(d);
        const PointPlan plan = search_plan(n, d);
        const Eigen::MatrixXd t = plan.nodes();
        const std::size_t U = plan.U(), L = plan.L();

        Eigen::MatrixXd direct(L, U), full(U, U);
        for (std::size_t j = 0; j < U; ++j) {
            const Exponents e = unrank_exponents(n, j);
            for (std::size_t u = 0; u < U; ++u) {
                double rec = 1.0;
                for (std::size_t i = 0; i < n; ++i) rec *= chebyshev_recurrence(e[i], t(u, i));
                CHECK(rec == doctest::Approx(chebyshev(e, t.row(u))).scale(1).epsilon(1e-10));
                full(j, u) = rec;
                if (j < L) direct(j, u) = plan.basis_scale(j) * rec;
            }
        }
        // Unisolvence of the degree-2d Chebyshev matrix.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(full);
        CHECK(svd.singularValues().minCoeff() > 1e-6 * svd.singularValues().maxCoeff());

        const WOperator W(plan);
        const double scale = direct.cwiseAbs().maxCoeff();
        for (std::size_t u = 0; u < U; ++u) {
            const Eigen::VectorXd col = W.apply(Eigen::VectorXd::Unit(U, u));
            CHECK((col - direct.col(u)).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        }
        CHECK((plan.W() - direct).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        for (int k = 0; k < 5; ++k) {
            const Eigen::VectorXd x = direction(U, rng), y = direction(L, rng);
            const double lhs = y.dot(apply_W(plan, x)), rhs = apply_Wt(plan, y).dot(x);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
            CHECK((apply_W(plan, x) - direct * x).norm() <= 1e-12 * (direct * x).norm() + 1e-12);
        }
        const Eigen::MatrixXd lam = direct * direct.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lam);
        CHECK(es.eigenvalues().minCoeff() > 0);
        BarrierState ones(W, Eigen::VectorXd::Ones(U));
        CHECK(ones.feasible());
    }
}

TEST_CASE("plan cache round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "polyopt_plan_cache_test";
    std::filesystem::remove_all(dir);
    const PointPlan p = cached_plan(dir, 2, 2);
    const auto file = dir / "plan_n2_d2.txt";
    REQUIRE(std::filesystem::exists(file));
    const PointPlan q = load_plan(file);
    CHECK(q.N == p.N);
    CHECK(q.r == p.r);
    CHECK(q.c == p.c);
    CHECK(q.Z == p.Z);
    CHECK(q.S == p.S);
    CHECK(q.row_value == p.row_value);
    CHECK(cached_plan(dir, 2, 2).c == p.c);
    {
        std::ofstream os(dir / "bad.txt");
        os << "polyopt-plan 0\n";
    }
    CHECK_THROWS_AS(load_plan(dir / "bad.txt"), PlanFormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("barrier oracle") {
    std::mt19937_64 rng(11);
    for (auto [n, d] : std::vector<std::pair<std::size_t, std::uint32_t>>{{1, 2}, {2, 2}, {3, 2}}) {
        CAPTURE(n);
        const PointPlan plan = search_plan(n, d);
        const WOperator W(plan);
        const std::size_t U = plan.U();
        const double L = static_cast<double>(plan.L());
        const Eigen::MatrixXd Wd = plan.W();
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::VectorXd p = interior(U, rng);
            const BarrierState s(W, p);
            REQUIRE(s.feasible());
            CHECK(s.parameter() == L);

            const double f = s.value();
            const Eigen::MatrixXd lam = Wd * p.asDiagonal() * Wd.transpose();
            CHECK(f == doctest::Approx(-std::log(lam.determinant())).epsilon(1e-10));
            for (double t : {2.0, 0.3}) CHECK(std::abs(BarrierState(W, t * p).value() - f + L * std::log(t)) < 1e-10);

            const Eigen::VectorXd g = s.gradient();
            CHECK(g.dot(p) == doctest::Approx(-L).epsilon(1e-10));
            Eigen::VectorXd fd(U);
            const double h = 1e-5;
            for (std::size_t u = 0; u < U; ++u) {
                Eigen::VectorXd a = p, b = p;
                a[u] += h;
                b[u] -= h;
                fd[u] = (BarrierState(W, a).value() - BarrierState(W, b).value()) / (2 * h);
            }
            CHECK((fd - g).norm() <= 1e-6 * g.norm());

            const Eigen::MatrixXd H = s.hessian();
            CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * H.cwiseAbs().maxCoeff());
            CHECK((H.array() >= 0).all());
            CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff() >= -1e-10 * H.norm());
            const Eigen::VectorXd x = direction(U, rng);
            const Eigen::VectorXd hx = s.hess_vec(x);
            CHECK((H * x - hx).norm() <= 1e-10 * hx.norm());

            const double eps = 1e-5;
            const Eigen::VectorXd td = s.third_dir(x);
            const double step = eps / x.cwiseAbs().maxCoeff();
            const Eigen::VectorXd fd3 =
                (BarrierState(W, p + step * x).hess_vec(x) - BarrierState(W, p - step * x).hess_vec(x)) / (2 * step);
            CHECK((fd3 - td).norm() <= 1e-4 * td.norm());
        }
    }
}

TEST_CASE("barrier self-concordance and infeasibility") {
    std::mt19937_64 rng(5);
    const PointPlan plan = search_plan(2, 2);
    const WOperator W(plan);
    const std::size_t U = plan.U();
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
        const BarrierState s(W, interior(U, rng));
        const Eigen::VectorXd h = direction(U, rng);
        const double d2 = h.dot(s.hess_vec(h)), d3 = h.dot(s.third_dir(h));
        CHECK(d2 > 0);
        CHECK(std::abs(d3) <= 2 * std::pow(d2, 1.5) * (1 + 1e-9));
        ++checked;
    }
    CHECK(checked == 1000);

    const BarrierState bad(W, -Eigen::VectorXd::Ones(U));
    CHECK_FALSE(bad.feasible());
    CHECK_THROWS_AS(bad.value(), InfeasibleBarrierPoint);
    CHECK_THROWS_AS(bad.gradient(), InfeasibleBarrierPoint);
    CHECK_THROWS_AS(bad.hessian(), InfeasibleBarrierPoint);
    CHECK_THROWS_AS(bad.hess_vec(Eigen::VectorXd::Ones(U)), InfeasibleBarrierPoint);
    CHECK_THROWS_AS(bad.third_dir(Eigen::VectorXd::Ones(U)), InfeasibleBarrierPoint);
    Eigen::VectorXd sparse = Eigen::VectorXd::Zero(U);
    sparse[0] = 1;
    CHECK_FALSE(BarrierState(W, sparse).feasible());
}
