#pragma once

#include "polyopt/problem.hpp"

#include <set>
#include <string>
#include <vector>

namespace polyopt {

using Basis = std::vector<MonomialId>;

// Monomial bases indexing every Gram/moment block of a relaxation.
struct Groupings {
    std::vector<Basis> objective;
    std::vector<std::vector<Basis>> nonneg; // per constraint
    std::vector<std::vector<Basis>> psd;    // per constraint
    std::vector<std::vector<Basis>> zero;   // per constraint; multipliers are the pairwise products
    std::vector<std::vector<std::size_t>> cliques;

    std::size_t block_count() const;
    std::size_t largest_block() const;
    // side -> count, over objective, nonneg and psd blocks (psd sides scaled by the matrix side)
    std::vector<std::pair<std::size_t, std::size_t>> block_sizes(const PopProblem &problem) const;
};

Basis dense_basis_over(const VariableSpace &space, const std::vector<std::size_t> &vars, std::uint32_t d);

Groupings dense(const PopProblem &problem, std::uint32_t d);

// Monomials that can occur in the sum-of-squares part: p, all constraint terms expanded
// with their multiplier bases and, with with_bound, the constant of p - l.
std::vector<MonomialId> relaxation_support(const PopProblem &problem, const Groupings &g, bool with_bound = true);

struct NewtonOptions {
    bool akl_toussaint = true;
    bool parallel = true;
    unsigned threads = 0; // 0 = hardware concurrency
    double retain_distance = 1e-6;
    bool with_bound = true; // false: certify p itself (no free constant)
};

struct NewtonReport {
    std::size_t candidates = 0;
    std::size_t kept = 0;
    std::size_t support_points = 0;
    std::size_t reduced_points = 0;
    std::size_t lp_solves = 0;
    std::vector<std::string> diagnostics;
};

// Keeps the candidates m with 2m in the convex hull of the support (real spaces).
Basis newton_filter(const VariableSpace &space, const Basis &candidates, const std::vector<MonomialId> &support,
                    const NewtonOptions &options = {}, NewtonReport *report = nullptr);

Groupings newton_polytope(const PopProblem &problem, const Groupings &g, const NewtonOptions &options = {},
                          NewtonReport *report = nullptr);

Groupings diagonal_consistency(const PopProblem &problem, const Groupings &g, bool with_bound = true);

// Keeps objective-block monomials of degree deg(p)/2 + prefactor_half_degree.
Groupings homogeneous_filter(const Groupings &g, const Polynomial &p, std::uint32_t prefactor_half_degree = 0);

struct CorrelativeOptions {
    bool chordal = true;
    // Empty means every constraint of that kind is high-order.
    std::vector<bool> high_order_nonneg;
    std::vector<bool> high_order_zero;
    std::vector<bool> high_order_psd;
};

Groupings correlative_sparsity(const PopProblem &problem, std::uint32_t d, const CorrelativeOptions &options = {},
                               std::vector<std::string> *diagnostics = nullptr);

enum class Extension { block, cliques };

struct TermSparsityState {
    PopProblem problem;
    std::uint32_t d = 0;
    Extension extension = Extension::block;
    bool diagonal_heuristic = true;
    std::set<MonomialId> base;    // U^(0)
    std::set<MonomialId> support; // current U
    Groupings groupings;
    bool converged = false;
    int iteration = 0;
};

TermSparsityState term_sparsity_init(const PopProblem &problem, std::uint32_t d, Extension extension,
                                     bool diagonal_heuristic = true);
// Advances one iteration; returns the converged flag.
bool term_sparsity_iterate(TermSparsityState &state);

namespace graph {

using Adjacency = std::vector<std::set<std::size_t>>;
std::vector<std::vector<std::size_t>> connected_components(const Adjacency &adj);
// Greedy minimum-degree chordal extension, returning its maximal cliques.
std::vector<std::vector<std::size_t>> chordal_cliques(const Adjacency &adj);
std::vector<std::vector<std::size_t>> maximal_cliques(const Adjacency &adj);
bool is_chordal(const Adjacency &adj);

} // namespace graph

} // namespace polyopt
