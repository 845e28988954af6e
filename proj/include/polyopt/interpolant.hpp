#pragma once

#include "polyopt/polyring.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace polyopt {

// Reduction of a cosine argument x * pi / N into [0, N]: cos(pi (c + 1/2) x / N) equals
// sign * cos(pi (c + 1/2) magnitude / N), and vanishes identically when magnitude == N.
struct Wrapped {
    std::uint64_t magnitude;
    bool negative;
    bool vanishes;
};
Wrapped wrap(std::uint64_t N, std::uint64_t x);

// Sparse integer matrix stored by rows, column indices ascending.
struct IntMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> entries;
};

// Rows indexed by the dense basis of degree <= deg, columns by [0, N). Row j lists the wrapped
// cosine frequencies of sum_i sigma_i r(i) j_i over sign vectors sigma on the support of j
// whose first entry is +1.
IntMatrix build_A(std::size_t n, std::uint32_t deg, std::uint64_t N, const std::vector<std::uint64_t> &r);

// Interpolation nodes t_u = cos(pi (c(u) + 1/2) r / N) and the factorisation W = S T of the
// degree-d Chebyshev basis evaluated at them.
struct PointPlan {
    std::size_t n = 0;
    std::uint32_t d = 0;
    std::uint64_t N = 0;
    std::vector<std::uint64_t> r;
    std::vector<std::uint64_t> c;          // U node indices into [0, N)
    std::vector<std::uint64_t> Z;          // N_c cosine frequencies used by the low-degree rows
    std::vector<std::vector<std::size_t>> S; // L rows, positions into Z of the unit entries
    std::vector<std::int64_t> row_value;   // common value of the nonzero entries of row j of A
    bool fallback = false;                 // geometric plan, no search result

    std::size_t L() const;
    std::size_t U() const;
    // Row j of W is basis_scale(j) times the Chebyshev product prod_i T_{j_i} at the nodes.
    double basis_scale(std::size_t j) const;
    Eigen::MatrixXd nodes() const; // U x n
    Eigen::MatrixXd T() const;     // N_c x U
    Eigen::MatrixXd W() const;     // L x U, dense
};

std::uint64_t unisolvent_lower_bound(std::size_t n, std::uint32_t d); // U
std::uint64_t predicted_excess(std::size_t n, std::uint32_t d);       // N - U for the optimal search
std::uint64_t row_nonzero_bound(std::size_t n, std::uint32_t d);      // N_r
std::uint64_t column_bound(std::size_t n, std::uint32_t d);           // upper bound on N_c

struct SearchOptions {
    bool parallel = true;
    unsigned threads = 0; // 0 selects hardware concurrency
    std::optional<std::uint64_t> start_N; // default U + d; U gives the true minimum for n = 1
    std::optional<std::uint64_t> max_N; // beyond this the geometric fallback is returned
};

// Smallest (N, r) in search order such that A has full rank U and every low-degree row of A
// has equal nonzero entries.
PointPlan search_plan(std::size_t n, std::uint32_t d, const SearchOptions &options = {});
PointPlan fallback_plan(std::size_t n, std::uint32_t d);

// Completes a plan from (n, d, N, r); throws std::invalid_argument when (N, r) is unusable.
PointPlan make_plan(std::size_t n, std::uint32_t d, std::uint64_t N, const std::vector<std::uint64_t> &r);

// Checks the search-time conditions on (N, r) without choosing nodes.
bool admissible(std::size_t n, std::uint32_t d, std::uint64_t N, const std::vector<std::uint64_t> &r);

class PlanFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_plan(const std::filesystem::path &file, const PointPlan &plan);
PointPlan load_plan(const std::filesystem::path &file);
// Looks up plan_n<n>_d<d>.txt in dir, searching and storing on a miss.
PointPlan cached_plan(const std::filesystem::path &dir, std::size_t n, std::uint32_t d,
                      const SearchOptions &options = {});

// Products with W and its transpose through the factorisation.
class WOperator {
public:
    explicit WOperator(const PointPlan &plan);
    std::size_t L() const { return L_; }
    std::size_t U() const { return U_; }
    Eigen::VectorXd apply(const Eigen::VectorXd &x) const;    // W x
    Eigen::VectorXd apply_t(const Eigen::VectorXd &y) const;  // W^T y
    Eigen::MatrixXd apply_columns(const Eigen::MatrixXd &X) const;   // W X
    Eigen::MatrixXd apply_t_columns(const Eigen::MatrixXd &Y) const; // W^T Y

private:
    std::size_t L_, U_;
    std::vector<std::vector<std::size_t>> S_;
    Eigen::MatrixXd T_;
};

Eigen::VectorXd apply_W(const PointPlan &plan, const Eigen::VectorXd &x);
Eigen::VectorXd apply_Wt(const PointPlan &plan, const Eigen::VectorXd &y);

class InfeasibleBarrierPoint : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// f(p) = -log det(W Diag(p) W^T) on the interior of the interpolant SOS cone's dual.
class BarrierState {
public:
    BarrierState(const WOperator &w, Eigen::VectorXd p);

    bool feasible() const { return feasible_; }
    double parameter() const { return static_cast<double>(w_->L()); }
    const Eigen::VectorXd &point() const { return p_; }

    double value() const;
    Eigen::VectorXd gradient() const;
    Eigen::MatrixXd hessian() const;
    Eigen::VectorXd hess_vec(const Eigen::VectorXd &x) const;
    // Contraction D^3 f(p)[h, h, .] as a vector.
    Eigen::VectorXd third_dir(const Eigen::VectorXd &h) const;

private:
    void require() const;
    Eigen::MatrixXd lambda_of(const Eigen::VectorXd &x) const;

    const WOperator *w_;
    Eigen::VectorXd p_;
    bool feasible_ = false;
    Eigen::MatrixXd chol_;     // lower Cholesky factor of Lambda(p)
    Eigen::MatrixXd chol_inv_; // C^-1 where Lambda = C^T C
    Eigen::MatrixXd lambda_inv_;
};

} // namespace polyopt
