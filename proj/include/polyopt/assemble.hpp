#pragma once

#include "polyopt/basis.hpp"
#include "polyopt/conic.hpp"

#include <Eigen/Dense>

#include <limits>
#include <map>
#include <optional>
#include <unordered_map>

namespace polyopt {

using MomentVector = std::unordered_map<MonomialId, Coeff, MonomialIdHash>;

// L_y(p) = sum of y_m * coefficient(m); throws std::out_of_range on a missing moment.
Coeff riesz(const Polynomial &p, const MomentVector &y);

// Moments of the Dirac measure at a point (every monomial of B_{n,2d}, both conjugations).
MomentVector point_moments(const VariableSpace &space, std::span<const Coeff> point, std::uint32_t degree);

enum class Form { moment, sos };
enum class Representation { psd, dd, sdd };

std::string to_string(Representation r);

struct BlockRef {
    enum class Kind { objective, nonneg, psd } kind = Kind::objective;
    std::size_t constraint = 0; // index into the problem's list of that kind
    std::size_t part = 0;       // index into the groupings list of that constraint
    Basis basis;
    std::size_t matrix_side = 1;
    std::size_t side() const { return basis.size() * matrix_side; }
};

// Sparse linear form over program variables.
using LinearForm = std::vector<std::pair<std::size_t, double>>;

double evaluate(const LinearForm &f, const std::vector<double> &x);

// How a Gram block is parametrized by program variables: G = sum_v x_v W_v.
struct GramParam {
    std::vector<std::size_t> vars;
    std::vector<std::vector<std::tuple<std::size_t, std::size_t, double>>> shapes; // full (i, j, w) lists
    std::size_t side = 0;
    Eigen::MatrixXd assemble(const std::vector<double> &x) const;
};

// Origin of an equality multiplier: moment form, row `index` carries m * h_c (times sign);
// SOS form, variable `index` is the coefficient of m in the multiplier of h_c.
struct ZeroTerm {
    std::size_t constraint = 0;
    MonomialId multiplier;
    std::size_t index = 0;
    double sign = 1.0;
    int part = 0; // 1: imaginary part of a complex row
};

// A conic program together with the bookkeeping needed to read results back.
struct Relaxation {
    Relaxation(PopProblem p, Groupings g, std::uint32_t d)
        : problem(std::move(p)), groupings(std::move(g)), order(d) {}

    PopProblem problem;
    Groupings groupings;
    std::uint32_t order = 0;
    Form form = Form::moment;
    Representation representation = Representation::psd;
    ConicProgram program;
    std::vector<BlockRef> blocks;
    std::vector<Eigen::MatrixXd> rotations; // per block; empty = identity

    // moment form: each moment component as a form over x (imaginary part only for complex spaces)
    std::map<MonomialId, std::pair<LinearForm, LinearForm>> moment_map;
    std::vector<std::size_t> block_cone; // moment form: cone offset of each block
    // sos form
    std::map<MonomialId, std::size_t> monomial_row;
    std::size_t bound_var = 0;
    std::vector<GramParam> gram_params;
    std::vector<ZeroTerm> zero_terms;
    std::size_t normalization_row = 0; // moment form

    bool trivially_infeasible = false;
    std::vector<std::string> diagnostics;

    MomentVector moments(const Solution &sol) const;
    // Gram (moment form: dual slack) matrix of every block; complex moment form gives the real embedding.
    std::vector<Eigen::MatrixXd> grams(const Solution &sol) const;
    double bound(const Solution &sol) const;
};

// Blocks of linear forms over (possibly complex) moments before lowering to real variables.
using MomentForm = std::vector<std::pair<MonomialId, Coeff>>;

struct MomentBlock {
    BlockRef ref;
    std::size_t side = 0;
    std::vector<MomentForm> entries; // row-major side x side, Hermitian
};

struct MomentRelaxation {
    VariableSpace space;
    std::vector<MomentBlock> blocks;
    std::vector<MomentForm> zeros; // each must vanish
    std::vector<std::pair<std::size_t, MonomialId>> zero_origin; // (constraint, multiplier) per zero
    MomentForm objective;
};

MomentRelaxation moment_forms(const PopProblem &problem, const Groupings &groupings);

// Lowers moment forms to a real conic program: real blocks as is, Hermitian blocks by the
// 2s x 2s embedding [[Re, -Im], [Im, Re]]; equalities split into real and imaginary rows.
Relaxation complex_embed(const MomentRelaxation &forms);

// [[Re H, -Im H], [Im H, Re H]]
Eigen::MatrixXd hermitian_embedding(const Eigen::MatrixXcd &h);

Relaxation build_moment(const PopProblem &problem, const Groupings &groupings, std::uint32_t d);

// Real problems only. rotations: one matrix per block (upper factor U with G = U^T Q U).
Relaxation build_sos(const PopProblem &problem, const Groupings &groupings, std::uint32_t d,
                     Representation representation = Representation::psd,
                     const std::vector<Eigen::MatrixXd> &rotations = {});

Relaxation to_dd(const Relaxation &sos, const std::vector<Eigen::MatrixXd> &rotations = {});
Relaxation to_sdd(const Relaxation &sos, const std::vector<Eigen::MatrixXd> &rotations = {});

bool is_dd(const Eigen::MatrixXd &m, double tol = 0.0);
// Decides membership in the SDD cone (sum of PSD matrices supported on 2 x 2 principal blocks).
bool is_sdd(const Eigen::MatrixXd &m, const SolverSettings &settings = {});

// Upper Cholesky factor U of gram + 1e-10 I, so that gram ~ U^T U.
Eigen::MatrixXd rotation_from_solution(const Eigen::MatrixXd &gram);

struct PerturbationResult {
    double eps = std::numeric_limits<double>::infinity();
    std::size_t gram_side = 0;
    Status status = Status::iteration_limit;
};

// Minimal eps with p + eps * sum_{k=first_k}^{r} sum_j x_j^{2k}/k! a sum of squares.
PerturbationResult perturbation_min_eps(const Polynomial &p, std::uint32_t r, const SolverSettings &settings = {},
                                        std::uint32_t first_k = 0);

struct PrefactorResult {
    bool feasible = false;
    Status status = Status::iteration_limit;
    Basis prefactor_basis;
    Basis square_basis;
    Eigen::MatrixXd prefactor_gram;
    Eigen::MatrixXd square_gram;
};

// Searches q in the SOS cone of degree q_degree with trace(Gram_q) >= 1 and q p a sum of squares.
PrefactorResult prefactor_certify(const Polynomial &p, std::uint32_t q_degree, bool newton = true,
                                  const SolverSettings &settings = {});

// Runs the solver unless the program is infeasible by construction.
Solution solve_relaxation(const Relaxation &relaxation, const SolverSettings &settings = {});

} // namespace polyopt
