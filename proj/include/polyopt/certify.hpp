#pragma once

#include "polyopt/assemble.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace polyopt {

struct OptimizeOptions {
    Form form = Form::moment; // dd/sdd always use the SOS form
    Representation representation = Representation::psd;
    std::vector<Eigen::MatrixXd> rotations;
    SolverSettings solver;
};

struct OptimizationResult {
    Relaxation relaxation;
    Solution solution;
    MomentVector moments;
    std::vector<Eigen::MatrixXd> grams;
    double bound = std::numeric_limits<double>::quiet_NaN();

    const PopProblem &problem() const { return relaxation.problem; }
    const Groupings &groupings() const { return relaxation.groupings; }
    std::uint32_t order() const { return relaxation.order; }
    Status status() const { return solution.status; }
};

OptimizationResult optimize(const PopProblem &problem, const Groupings &groupings, std::uint32_t d,
                            const OptimizeOptions &options = {});
OptimizationResult optimize(Relaxation relaxation, const SolverSettings &settings = {});

// Moment matrix over the dense basis B_{n,t}; nullopt when a moment is missing.
std::optional<Eigen::MatrixXcd> moment_matrix(const VariableSpace &space, const MomentVector &y, std::uint32_t t);

// Numerical rank: eigenvalues above tol times the largest one.
std::size_t numeric_rank(const Eigen::MatrixXcd &hermitian, double tol);

enum class Optimality { optimal, unknown };
std::string to_string(Optimality o);

struct OptimalityReport {
    Optimality status = Optimality::unknown;
    std::vector<std::size_t> ranks; // rank of M_t for t = 0 .. d
    std::optional<std::uint32_t> flat_order;
    std::vector<std::string> diagnostics;
};

OptimalityReport optimality_certificate(const OptimizationResult &result, double rank_tol = 1e-6);

struct Candidate {
    std::vector<Coeff> point;
    double quality = std::numeric_limits<double>::infinity();
    std::vector<double> real() const;
};

// max(constraint violations, |p(point) - bound|) on the original problem.
double solution_quality(const PopProblem &problem, std::span<const Coeff> point, double bound);

struct ExtractOptions {
    double rank_tol = 1e-6;
    std::uint64_t seed = 1;
    bool heuristic_fallback = true;
};

struct AtomReport {
    std::vector<std::vector<Coeff>> atoms;
    std::optional<std::uint32_t> order; // t of the flat moment matrix that was used
    std::vector<std::string> diagnostics;
    bool ok() const { return order.has_value(); }
};

// Multiplication-matrix extraction from a flat truncated moment matrix of order at most d.
AtomReport extract_atoms(const VariableSpace &space, const MomentVector &y, std::uint32_t d,
                         const ExtractOptions &options = {});

struct Extraction {
    std::vector<Candidate> solutions;
    bool heuristic = false;
    std::vector<std::string> diagnostics;
};

Extraction extract_solutions(const OptimizationResult &result, const ExtractOptions &options = {});

// Lazily enumerates candidates obtained from sign (phase) assignments on single moments.
class HeuristicSolutions {
public:
    HeuristicSolutions(const VariableSpace &space, const MomentVector &y);
    std::optional<std::vector<Coeff>> next();

    struct Partial {
        std::vector<std::optional<double>> magnitude;
        std::vector<std::optional<Coeff>> phase; // unit factor: +-1 for real spaces
    };

private:
    bool propagate(Partial &p) const;

    VariableSpace space_;
    std::vector<std::pair<ExponentKey, Coeff>> moments_; // graded order
    std::vector<Partial> stack_;
    double tol_ = 0.0; // moments at or below tol_ count as zero
};

HeuristicSolutions extract_heuristic(const OptimizationResult &result);

struct SquareTerm {
    std::vector<Polynomial> q; // q^T G q with G the constraint matrix (length 1 for scalars)
};

struct CertificateBlock {
    BlockRef ref;
    Polynomial multiplier; // 1 for the objective block, g_i for scalar constraints
    std::vector<SquareTerm> squares;
};

struct SosCertificate {
    VariableSpace space;
    Polynomial target; // p - bound
    double bound = 0.0;
    std::vector<CertificateBlock> blocks;
    std::vector<std::pair<Polynomial, Polynomial>> equality_terms; // (multiplier, h_j)
    Polynomial residual;   // expansion - target
    double residual_norm = 0.0; // max absolute coefficient
    std::string to_string(const std::vector<std::string> &names = {}) const;
};

class CertificateError : public std::runtime_error {
public:
    CertificateError(const std::string &what, double eigenvalue)
        : std::runtime_error(what), most_negative(eigenvalue) {}
    double most_negative;
};

// Throws CertificateError when a Gram block has an eigenvalue below -tol * max(1, largest);
// eigenvalues within that band are treated as zero and yield no square.
SosCertificate sos_certificate(const OptimizationResult &result, double tol = 1e-7);

} // namespace polyopt
