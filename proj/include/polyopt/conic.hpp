#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace polyopt {

enum class ConeKind { free, nonneg, soc, psd };

struct Cone {
    ConeKind kind = ConeKind::free;
    std::size_t dim = 0;           // entry count, or the side for psd
    bool hermitian_embedded = false; // psd block holding the real form of a Hermitian block

    std::size_t size() const { return kind == ConeKind::psd ? dim * (dim + 1) / 2 : dim; }
    static Cone free_vars(std::size_t k) { return {ConeKind::free, k, false}; }
    static Cone nonneg(std::size_t k) { return {ConeKind::nonneg, k, false}; }
    static Cone soc(std::size_t k) { return {ConeKind::soc, k, false}; }
    static Cone psd(std::size_t side, bool herm = false) { return {ConeKind::psd, side, herm}; }
};

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

// Standard form: minimize <c, x> + offset subject to A x = b, x in C.
// PSD blocks are vectorized row by row over the lower triangle with
// off-diagonal entries multiplied by sqrt(2).
struct ConicProgram {
    std::vector<Cone> cones;
    std::size_t rows = 0;
    std::vector<Triplet> a;
    std::vector<double> b;
    std::vector<double> c;
    double offset = 0.0;

    std::size_t num_vars() const { return c.size(); }
    std::vector<std::size_t> cone_offsets() const;
    std::size_t add_cone(const Cone &k);
    std::size_t add_row(double rhs);
    void add_entry(std::size_t row, std::size_t col, double value) { a.push_back({row, col, value}); }
    // Sorts entries, merges duplicates and drops exact zeros.
    void canonicalize();
};

inline std::size_t svec_index(std::size_t i, std::size_t j) {
    if (i < j) std::swap(i, j);
    return i * (i + 1) / 2 + j;
}
inline double svec_scale(std::size_t i, std::size_t j) { return i == j ? 1.0 : 1.4142135623730951; }

Eigen::VectorXd svec(const Eigen::MatrixXd &m);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd> &v, std::size_t side);

enum class Status { optimal, primal_infeasible, dual_infeasible, limit_feasible_suspect, iteration_limit };
std::string to_string(Status s);

struct SolverSettings {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iterations = 100;
    bool verbose = false;
};

struct Solution {
    Status status = Status::iteration_limit;
    std::vector<double> x; // primal (or the dual-infeasibility ray)
    std::vector<double> y; // equality multipliers (or the primal-infeasibility ray)
    std::vector<double> s; // dual slack
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
};

Solution solve(const ConicProgram &program, const SolverSettings &settings = {});

namespace detail {
class Engine;
}

// LP whose constraint pattern stays fixed while the data vectors change.
class ParametricLp {
public:
    explicit ParametricLp(const ConicProgram &lp_template);
    ~ParametricLp();
    ParametricLp(ParametricLp &&) noexcept;
    ParametricLp &operator=(ParametricLp &&) noexcept;
    ParametricLp(const ParametricLp &) = delete;
    ParametricLp &operator=(const ParametricLp &) = delete;

    void set_rhs(const std::vector<double> &b);
    void set_objective(const std::vector<double> &c);
    // Changes a coefficient that already belongs to the sparsity pattern.
    void set_coefficient(std::size_t row, std::size_t col, double value);
    Solution resolve(const SolverSettings &settings = {});

private:
    std::unique_ptr<detail::Engine> engine_;
};

} // namespace polyopt
