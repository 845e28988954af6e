#pragma once

#include "polyopt/polyring.hpp"

#include <string>
#include <vector>

namespace polyopt {

struct PopProblem {
    VariableSpace space;
    Polynomial objective;
    std::vector<Polynomial> zero;   // h_j = 0
    std::vector<Polynomial> nonneg; // g_i >= 0
    std::vector<PolyMatrix> psd;    // G_k >= 0
    std::vector<std::string> names; // optional variable names

    explicit PopProblem(VariableSpace s) : space(s), objective(s) {}
    PopProblem(VariableSpace s, Polynomial p) : space(std::move(s)), objective(std::move(p)) {}

    std::size_t n() const { return space.n(); }
    bool is_complex() const { return space.is_complex(); }
    bool unconstrained() const { return zero.empty() && nonneg.empty() && psd.empty(); }
};

struct Diagnostics {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

Diagnostics validate(const PopProblem &problem);
void validate_or_throw(const PopProblem &problem);

inline std::uint32_t half_degree(std::uint32_t deg) { return (deg + 1) / 2; }

std::uint32_t min_order(const PopProblem &problem);

// Sorted, duplicate-free sum set {a+b}.
std::vector<MonomialId> minkowski_sum(const std::vector<MonomialId> &a, const std::vector<MonomialId> &b,
                                      const VariableSpace &space);
// {a + conj(b)}: the monomials of a Gram form over the basis (real spaces: a+b).
std::vector<MonomialId> gram_support(const std::vector<MonomialId> &basis, const VariableSpace &space);

std::vector<MonomialId> putinar_support(const PopProblem &problem, std::uint32_t d);

} // namespace polyopt
