#include "polyopt/interpolant.hpp"

#include "polyopt/rational.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace polyopt {

Wrapped wrap(std::uint64_t N, std::uint64_t x) {
    // Each shift by 2N flips the sign of the cosine.
    const std::int64_t v = static_cast<std::int64_t>((N + x) % (2 * N)) - static_cast<std::int64_t>(N);
    const auto m = static_cast<std::uint64_t>(v < 0 ? -v : v);
    return {m, ((N + x) / (2 * N)) % 2 == 1, m == N};
}

namespace {

using Row = std::vector<std::pair<std::size_t, std::int64_t>>;

// Last variable with a positive exponent, or -1 for the constant.
int group_of(const Exponents &j) {
    for (int i = static_cast<int>(j.size()) - 1; i >= 0; --i)
        if (j[i]) return i;
    return -1;
}

Row build_row(const Exponents &j, std::uint64_t N, const std::vector<std::uint64_t> &r) {
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < j.size(); ++i)
        if (j[i]) support.push_back(i);
    std::map<std::size_t, std::int64_t> acc;
    if (support.empty()) {
        acc[0] = 1;
    } else {
        const std::size_t free = support.size() - 1;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free); ++mask) {
            std::int64_t x = static_cast<std::int64_t>(r[support[0]] * j[support[0]]);
            for (std::size_t k = 1; k < support.size(); ++k) {
                const auto term = static_cast<std::int64_t>(r[support[k]] * j[support[k]]);
                x += (mask >> (k - 1) & 1) ? -term : term;
            }
            const Wrapped w = wrap(N, static_cast<std::uint64_t>(x < 0 ? -x : x));
            if (w.vanishes) continue;
            acc[w.magnitude] += w.negative ? -1 : 1;
        }
    }
    Row row;
    for (auto [c, v] : acc)
        if (v) row.emplace_back(c, v);
    return row;
}

bool equal_entries(const Row &row) {
    return std::all_of(row.begin(), row.end(), [&](const auto &e) { return e.second == row.front().second; });
}

// Row echelon form grown one row at a time, pivots on the leftmost nonzero entry.
class Echelon {
public:
    explicit Echelon(std::size_t cols) : pivots_(cols) {}

    // Returns false when the row reduces to zero.
    bool add(const Row &row) {
        std::map<std::size_t, Rational> v;
        for (auto [c, x] : row) v.emplace(c, Rational(x));
        while (!v.empty()) {
            auto it = v.begin();
            const std::size_t c = it->first;
            auto &piv = pivots_[c];
            if (piv.empty()) {
                piv.assign(v.begin(), v.end());
                return true;
            }
            const Rational f = it->second / piv.front().second;
            v.erase(it);
            for (std::size_t k = 1; k < piv.size(); ++k) {
                auto [col, val] = piv[k];
                auto [pos, inserted] = v.try_emplace(col, Rational(0));
                pos->second = pos->second - f * val;
                if (pos->second.is_zero()) v.erase(pos);
            }
        }
        return false;
    }

private:
    std::vector<std::vector<std::pair<std::size_t, Rational>>> pivots_;
};

struct Groups {
    std::vector<std::vector<Exponents>> rows; // by last used variable, constant row in group 0
    std::vector<std::vector<bool>> low;       // degree <= d
};

Groups group_rows(std::size_t n, std::uint32_t d) {
    Groups g;
    g.rows.resize(n);
    g.low.resize(n);
    const std::uint64_t U = count_upto(n, 2 * d);
    for (std::uint64_t k = 0; k < U; ++k) {
        Exponents j = unrank_exponents(n, k);
        const int grp = std::max(0, group_of(j));
        std::uint32_t deg = 0;
        for (auto e : j) deg += e;
        g.low[grp].push_back(deg <= d);
        g.rows[grp].push_back(std::move(j));
    }
    return g;
}

bool add_group(Echelon &e, const Groups &g, std::size_t grp, std::uint64_t N, const std::vector<std::uint64_t> &r) {
    for (std::size_t k = 0; k < g.rows[grp].size(); ++k) {
        const Row row = build_row(g.rows[grp][k], N, r);
        if (g.low[grp][k] && !equal_entries(row)) return false;
        if (!e.add(row)) return false;
    }
    return true;
}

// First admissible suffix r(i..) for the given prefix in lexicographic order.
bool extend(const Groups &g, std::size_t i, Echelon &e, std::uint64_t N, std::vector<std::uint64_t> &r,
            const std::atomic<bool> *cancel) {
    const std::size_t n = r.size();
    if (i == n) return true;
    const std::uint64_t hi = N - (n - i); // leaves room for the remaining strictly increasing entries
    for (std::uint64_t v = r[i - 1] + 1; v <= hi; ++v) {
        if (cancel && cancel->load(std::memory_order_relaxed)) return false;
        r[i] = v;
        Echelon next = e;
        if (add_group(next, g, i, N, r) && extend(g, i + 1, next, N, r, cancel)) return true;
    }
    return false;
}

// Smallest admissible r for this N, searched in parallel over r(1).
std::optional<std::vector<std::uint64_t>> search_N(const Groups &g, std::size_t n, std::uint64_t N,
                                                   const SearchOptions &options) {
    if (N < n + 1) return std::nullopt;
    std::vector<std::uint64_t> r(n, 0);
    r[0] = 1;
    Echelon base(N);
    if (!add_group(base, g, 0, N, r)) return std::nullopt;
    if (n == 1) return r;

    const std::uint64_t lo = 2, hi = N - (n - 1);
    std::atomic<std::uint64_t> next{lo};
    std::atomic<std::uint64_t> best{hi + 1};
    std::mutex m;
    std::vector<std::uint64_t> best_r;

    auto worker = [&] {
        for (;;) {
            const std::uint64_t v = next.fetch_add(1);
            if (v > hi || v >= best.load()) return;
            std::vector<std::uint64_t> cand = r;
            cand[1] = v;
            Echelon e = base;
            if (!add_group(e, g, 1, N, cand)) continue;
            if (!extend(g, 2, e, N, cand, nullptr)) continue;
            std::lock_guard lock(m);
            if (v < best.load()) {
                best = v;
                best_r = cand;
            }
        }
    };
    unsigned threads = options.parallel ? (options.threads ? options.threads : std::thread::hardware_concurrency()) : 1;
    threads = std::max(1u, threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }
    if (best_r.empty()) return std::nullopt;
    return best_r;
}

std::uint64_t geometric(std::uint64_t base, std::size_t k) { // (base^k - 1) / (base - 1)
    std::uint64_t s = 0, p = 1;
    for (std::size_t i = 0; i < k; ++i) {
        s += p;
        p *= base;
    }
    return s;
}

double cos_entry(std::uint64_t N, std::uint64_t c, std::uint64_t x) {
    return std::cos(std::numbers::pi / static_cast<double>(N) * (static_cast<double>(c) + 0.5) * static_cast<double>(x));
}

} // namespace

IntMatrix build_A(std::size_t n, std::uint32_t deg, std::uint64_t N, const std::vector<std::uint64_t> &r) {
    if (r.size() != n) throw std::invalid_argument("build_A: r must have n entries");
    IntMatrix A;
    A.rows = count_upto(n, deg);
    A.cols = N;
    A.entries.reserve(A.rows);
    for (std::uint64_t k = 0; k < A.rows; ++k) A.entries.push_back(build_row(unrank_exponents(n, k), N, r));
    return A;
}

std::uint64_t unisolvent_lower_bound(std::size_t n, std::uint32_t d) { return binomial(n + 2 * d, n); }

std::uint64_t predicted_excess(std::size_t n, std::uint32_t d) {
    if (n == 1) return d;
    const std::uint64_t x = n / 2;
    return binomial(x + d, x + 1) * (x + 1) / d - 1;
}

std::uint64_t row_nonzero_bound(std::size_t n, std::uint32_t d) {
    return std::uint64_t{1} << (std::min<std::uint64_t>(n, d) - 1);
}

std::uint64_t column_bound(std::size_t n, std::uint32_t d) {
    std::uint64_t s = 1;
    for (std::uint32_t dp = 1; dp <= d; ++dp)
        for (std::size_t np = 1; np <= n; ++np)
            if (np <= dp) s += binomial(n, np) * binomial(dp - 1, np - 1) * (std::uint64_t{1} << (std::min<std::uint64_t>(np, dp) - 1));
    return s;
}

bool admissible(std::size_t n, std::uint32_t d, std::uint64_t N, const std::vector<std::uint64_t> &r) {
    if (r.size() != n || r.empty() || r[0] != 1) return false;
    for (std::size_t i = 1; i < n; ++i)
        if (r[i] <= r[i - 1]) return false;
    if (r.back() >= N) return false;
    const Groups g = group_rows(n, d);
    Echelon e(N);
    for (std::size_t grp = 0; grp < n; ++grp)
        if (!add_group(e, g, grp, N, r)) return false;
    return true;
}

PointPlan make_plan(std::size_t n, std::uint32_t d, std::uint64_t N, const std::vector<std::uint64_t> &r) {
    if (!admissible(n, d, N, r)) throw std::invalid_argument("make_plan: (N, r) is not admissible");
    PointPlan plan;
    plan.n = n;
    plan.d = d;
    plan.N = N;
    plan.r = r;
    const std::size_t U = plan.U(), L = plan.L();
    const IntMatrix A = build_A(n, 2 * d, N, r);

    // Greedy leftmost independent columns of A D^II.
    Eigen::MatrixXd AD = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < U; ++j)
        for (auto [x, v] : A.entries[j])
            for (std::uint64_t c = 0; c < N; ++c) AD(j, c) += static_cast<double>(v) * cos_entry(N, c, x);
    Eigen::MatrixXd Q(U, 0);
    for (std::uint64_t c = 0; c < N && plan.c.size() < U; ++c) {
        Eigen::VectorXd v = AD.col(c);
        const double norm = v.norm();
        for (int pass = 0; pass < 2; ++pass) v -= Q * (Q.transpose() * v);
        if (v.norm() <= 1e-8 * norm) continue;
        Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
        Q.col(Q.cols() - 1) = v / v.norm();
        plan.c.push_back(c);
    }
    if (plan.c.size() != U) throw std::runtime_error("make_plan: numerically rank deficient cosine matrix");

    std::vector<bool> used(N, false);
    for (std::size_t j = 0; j < L; ++j)
        for (auto [x, v] : A.entries[j]) used[x] = true;
    std::vector<std::size_t> position(N, 0);
    for (std::uint64_t x = 0; x < N; ++x)
        if (used[x]) {
            position[x] = plan.Z.size();
            plan.Z.push_back(x);
        }
    for (std::size_t j = 0; j < L; ++j) {
        std::vector<std::size_t> row;
        for (auto [x, v] : A.entries[j]) row.push_back(position[x]);
        plan.S.push_back(std::move(row));
        plan.row_value.push_back(A.entries[j].front().second);
    }
    return plan;
}

PointPlan fallback_plan(std::size_t n, std::uint32_t d) {
    std::vector<std::uint64_t> r(n);
    for (std::size_t k = 0; k < n; ++k) r[k] = geometric(2 * d, k + 1);
    PointPlan plan = make_plan(n, d, geometric(2 * d, n + 1), r);
    plan.fallback = true;
    return plan;
}

PointPlan search_plan(std::size_t n, std::uint32_t d, const SearchOptions &options) {
    if (n == 0 || d == 0) throw std::invalid_argument("search_plan: n and d must be positive");
    const Groups g = group_rows(n, d);
    const std::uint64_t start = options.start_N.value_or(unisolvent_lower_bound(n, d) + d);
    const std::uint64_t last = options.max_N.value_or(std::max(start, geometric(2 * d, n + 1)));
    for (std::uint64_t N = start; N <= last; ++N)
        if (auto r = search_N(g, n, N, options)) return make_plan(n, d, N, *r);
    return fallback_plan(n, d);
}

std::size_t PointPlan::L() const { return count_upto(n, d); }
std::size_t PointPlan::U() const { return count_upto(n, 2 * d); }

double PointPlan::basis_scale(std::size_t j) const {
    const Exponents e = unrank_exponents(n, j);
    const auto nnz = std::count_if(e.begin(), e.end(), [](auto x) { return x > 0; });
    const double kappa = nnz == 0 ? 1.0 : std::ldexp(1.0, 1 - static_cast<int>(nnz));
    return 1.0 / (kappa * static_cast<double>(row_value[j]));
}

Eigen::MatrixXd PointPlan::nodes() const {
    Eigen::MatrixXd t(c.size(), n);
    for (std::size_t u = 0; u < c.size(); ++u)
        for (std::size_t i = 0; i < n; ++i) t(u, i) = cos_entry(N, c[u], r[i]);
    return t;
}

Eigen::MatrixXd PointPlan::T() const {
    Eigen::MatrixXd t(Z.size(), c.size());
    for (std::size_t z = 0; z < Z.size(); ++z)
        for (std::size_t u = 0; u < c.size(); ++u) t(z, u) = cos_entry(N, c[u], Z[z]);
    return t;
}

Eigen::MatrixXd PointPlan::W() const {
    const Eigen::MatrixXd t = T();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(S.size(), c.size());
    for (std::size_t j = 0; j < S.size(); ++j)
        for (auto z : S[j]) w.row(j) += t.row(z);
    return w;
}

namespace {

constexpr const char *plan_magic = "polyopt-plan 1";

template <class T>
void write_list(std::ostream &os, const char *key, const std::vector<T> &v) {
    os << key << ' ' << v.size();
    for (const auto &x : v) os << ' ' << x;
    os << '\n';
}

template <class T>
std::vector<T> read_list(std::istream &is, const char *key) {
    std::string k;
    std::size_t count = 0;
    if (!(is >> k >> count) || k != key) throw PlanFormatError(std::string("plan file: expected ") + key);
    std::vector<T> v(count);
    for (auto &x : v)
        if (!(is >> x)) throw PlanFormatError(std::string("plan file: truncated ") + key);
    return v;
}

} // namespace

void save_plan(const std::filesystem::path &file, const PointPlan &plan) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << plan_magic << '\n';
    os << "n " << plan.n << "\nd " << plan.d << "\nN " << plan.N << "\nfallback " << (plan.fallback ? 1 : 0) << '\n';
    write_list(os, "r", plan.r);
    write_list(os, "c", plan.c);
    write_list(os, "Z", plan.Z);
    std::vector<std::size_t> triplets;
    for (std::size_t j = 0; j < plan.S.size(); ++j)
        for (auto z : plan.S[j]) {
            triplets.push_back(j);
            triplets.push_back(z);
        }
    os << "S " << triplets.size() / 2;
    for (std::size_t k = 0; k < triplets.size(); k += 2) os << ' ' << triplets[k] << ' ' << triplets[k + 1] << " 1";
    os << '\n';
    write_list(os, "value", plan.row_value);
}

PointPlan load_plan(const std::filesystem::path &file) {
    std::ifstream is(file);
    if (!is) throw PlanFormatError("cannot read " + file.string());
    std::string magic;
    std::getline(is, magic);
    if (magic != plan_magic) throw PlanFormatError("plan file: unknown header '" + magic + "'");
    PointPlan plan;
    auto scalar = [&](const char *key, auto &out) {
        std::string k;
        if (!(is >> k >> out) || k != key) throw PlanFormatError(std::string("plan file: expected ") + key);
    };
    int fb = 0;
    scalar("n", plan.n);
    scalar("d", plan.d);
    scalar("N", plan.N);
    scalar("fallback", fb);
    plan.fallback = fb != 0;
    plan.r = read_list<std::uint64_t>(is, "r");
    plan.c = read_list<std::uint64_t>(is, "c");
    plan.Z = read_list<std::uint64_t>(is, "Z");
    std::string k;
    std::size_t count = 0;
    if (!(is >> k >> count) || k != "S") throw PlanFormatError("plan file: expected S");
    plan.S.assign(plan.L(), {});
    for (std::size_t t = 0; t < count; ++t) {
        std::size_t j, z;
        int one;
        if (!(is >> j >> z >> one) || one != 1 || j >= plan.S.size() || z >= plan.Z.size())
            throw PlanFormatError("plan file: bad S triplet");
        plan.S[j].push_back(z);
    }
    plan.row_value = read_list<std::int64_t>(is, "value");
    if (plan.r.size() != plan.n || plan.c.size() != plan.U() || plan.row_value.size() != plan.L())
        throw PlanFormatError("plan file: inconsistent sizes");
    return plan;
}

PointPlan cached_plan(const std::filesystem::path &dir, std::size_t n, std::uint32_t d, const SearchOptions &options) {
    const auto file = dir / ("plan_n" + std::to_string(n) + "_d" + std::to_string(d) + ".txt");
    if (std::filesystem::exists(file)) {
        PointPlan plan = load_plan(file);
        if (plan.n == n && plan.d == d) return plan;
    }
    PointPlan plan = search_plan(n, d, options);
    std::filesystem::create_directories(dir);
    save_plan(file, plan);
    return plan;
}

WOperator::WOperator(const PointPlan &plan) : L_(plan.L()), U_(plan.U()), S_(plan.S), T_(plan.T()) {}

Eigen::VectorXd WOperator::apply(const Eigen::VectorXd &x) const {
    const Eigen::VectorXd tx = T_ * x;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(L_);
    for (std::size_t j = 0; j < L_; ++j)
        for (auto z : S_[j]) y[j] += tx[z];
    return y;
}

Eigen::VectorXd WOperator::apply_t(const Eigen::VectorXd &y) const {
    Eigen::VectorXd sy = Eigen::VectorXd::Zero(T_.rows());
    for (std::size_t j = 0; j < L_; ++j)
        for (auto z : S_[j]) sy[z] += y[j];
    return T_.transpose() * sy;
}

Eigen::MatrixXd WOperator::apply_columns(const Eigen::MatrixXd &X) const {
    const Eigen::MatrixXd tx = T_ * X;
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(L_, X.cols());
    for (std::size_t j = 0; j < L_; ++j)
        for (auto z : S_[j]) y.row(j) += tx.row(z);
    return y;
}

Eigen::MatrixXd WOperator::apply_t_columns(const Eigen::MatrixXd &Y) const {
    Eigen::MatrixXd sy = Eigen::MatrixXd::Zero(T_.rows(), Y.cols());
    for (std::size_t j = 0; j < L_; ++j)
        for (auto z : S_[j]) sy.row(z) += Y.row(j);
    return T_.transpose() * sy;
}

Eigen::VectorXd apply_W(const PointPlan &plan, const Eigen::VectorXd &x) { return WOperator(plan).apply(x); }
Eigen::VectorXd apply_Wt(const PointPlan &plan, const Eigen::VectorXd &y) { return WOperator(plan).apply_t(y); }

BarrierState::BarrierState(const WOperator &w, Eigen::VectorXd p) : w_(&w), p_(std::move(p)) {
    if (static_cast<std::size_t>(p_.size()) != w.U()) throw std::invalid_argument("barrier: point has wrong length");
    const Eigen::MatrixXd lambda = lambda_of(p_);
    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    if (llt.info() != Eigen::Success) return;
    chol_ = llt.matrixL();
    if (!(chol_.diagonal().array() > 0).all() || !chol_.allFinite()) return;
    feasible_ = true;
    const auto Lid = static_cast<Eigen::Index>(w.L());
    // Lambda = C^T C with C = chol_^T, so C^-1 = chol_^-T.
    chol_inv_ = chol_.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(Lid, Lid));
    lambda_inv_ = chol_inv_ * chol_inv_.transpose();
}

// W Diag(x) W^T, one column per basis row.
Eigen::MatrixXd BarrierState::lambda_of(const Eigen::VectorXd &x) const {
    const auto Lid = static_cast<Eigen::Index>(w_->L());
    const Eigen::MatrixXd rows = w_->apply_t_columns(Eigen::MatrixXd::Identity(Lid, Lid)); // U x L, column l is W^T e_l
    Eigen::MatrixXd lam = w_->apply_columns(x.asDiagonal() * rows);
    return 0.5 * (lam + lam.transpose());
}

void BarrierState::require() const {
    if (!feasible_) throw InfeasibleBarrierPoint("barrier: Lambda(p) is not positive definite");
}

double BarrierState::value() const {
    require();
    return -2.0 * chol_.diagonal().array().log().sum();
}

Eigen::VectorXd BarrierState::gradient() const {
    require();
    const Eigen::MatrixXd G = w_->apply_t_columns(chol_inv_); // W^T C^-1
    return -G.rowwise().squaredNorm();
}

Eigen::MatrixXd BarrierState::hessian() const {
    require();
    const Eigen::MatrixXd Q = w_->apply_t_columns(lambda_inv_);   // W^T Lambda^-1, U x L
    const Eigen::MatrixXd K = w_->apply_t_columns(Q.transpose()); // W^T Lambda^-1 W
    return K.array().square().matrix();
}

Eigen::VectorXd BarrierState::hess_vec(const Eigen::VectorXd &x) const {
    require();
    const Eigen::MatrixXd P = lambda_inv_ * lambda_of(x) * lambda_inv_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
    const Eigen::MatrixXd WV = w_->apply_t_columns(es.eigenvectors());
    return WV.array().square().matrix() * es.eigenvalues();
}

Eigen::VectorXd BarrierState::third_dir(const Eigen::VectorXd &h) const {
    require();
    const Eigen::MatrixXd M = w_->apply_t_columns(lambda_inv_ * lambda_of(h) * chol_inv_);
    return -2.0 * M.rowwise().squaredNorm();
}

} // namespace polyopt
