#include "polyopt/problem.hpp"

#include <algorithm>
#include <set>

namespace polyopt {

Diagnostics validate(const PopProblem &problem) {
    Diagnostics diag;
    const auto &sp = problem.space;
    auto same_space = [&](const Polynomial &p, const std::string &what) {
        if (!(p.space() == sp)) diag.errors.push_back(what + " is defined over a different variable space");
    };
    same_space(problem.objective, "objective");
    if (!problem.objective.is_real_valued(1e-12))
        diag.errors.push_back(sp.is_complex() ? "objective is not real-valued (missing conjugate terms)"
                                              : "objective has complex coefficients");
    for (std::size_t i = 0; i < problem.nonneg.size(); ++i) {
        const auto &g = problem.nonneg[i];
        const std::string tag = "nonneg constraint " + std::to_string(i + 1);
        same_space(g, tag);
        if (g.is_zero()) diag.errors.push_back(tag + " is the zero polynomial");
        if (!g.is_real_valued(1e-12)) diag.errors.push_back(tag + " is not real-valued");
    }
    for (std::size_t j = 0; j < problem.zero.size(); ++j) {
        const auto &h = problem.zero[j];
        const std::string tag = "zero constraint " + std::to_string(j + 1);
        same_space(h, tag);
        if (h.is_zero()) diag.errors.push_back(tag + " is the zero polynomial");
        if (!sp.is_complex() && !h.has_real_coefficients()) diag.errors.push_back(tag + " has complex coefficients");
    }
    for (std::size_t k = 0; k < problem.psd.size(); ++k) {
        const auto &G = problem.psd[k];
        const std::string tag = "psd constraint " + std::to_string(k + 1);
        if (G.side() == 0) {
            diag.errors.push_back(tag + " is empty");
            continue;
        }
        for (auto &e : G.entries()) same_space(e, tag);
        bool all_zero = std::all_of(G.entries().begin(), G.entries().end(), [](auto &p) { return p.is_zero(); });
        if (all_zero) diag.errors.push_back(tag + " is the zero matrix");
        if (!sp.is_complex())
            for (auto &e : G.entries())
                if (!e.has_real_coefficients()) {
                    diag.errors.push_back(tag + " has complex coefficients");
                    break;
                }
    }
    if (problem.unconstrained() && problem.objective.degree() % 2 == 1)
        diag.warnings.push_back("unconstrained objective of odd degree is unbounded below");
    if (!problem.unconstrained())
        diag.warnings.push_back("no archimedean ball constraint is added automatically");
    return diag;
}

void validate_or_throw(const PopProblem &problem) {
    auto d = validate(problem);
    if (!d.ok()) {
        std::string msg = "invalid problem:";
        for (auto &e : d.errors) msg += "\n  " + e;
        throw std::invalid_argument(msg);
    }
}

std::uint32_t min_order(const PopProblem &problem) {
    std::uint32_t d = half_degree(problem.objective.degree());
    for (auto &g : problem.nonneg) d = std::max(d, half_degree(g.degree()));
    for (auto &h : problem.zero) d = std::max(d, half_degree(h.degree()));
    for (auto &G : problem.psd) d = std::max(d, half_degree(G.degree()));
    return d;
}

std::vector<MonomialId> minkowski_sum(const std::vector<MonomialId> &a, const std::vector<MonomialId> &b,
                                      const VariableSpace &space) {
    std::vector<MonomialId> out;
    out.reserve(a.size() * b.size());
    for (auto x : a)
        for (auto y : b) out.push_back(mul(x, y, space));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<MonomialId> gram_support(const std::vector<MonomialId> &basis, const VariableSpace &space) {
    if (!space.is_complex()) return minkowski_sum(basis, basis, space);
    std::vector<MonomialId> conj;
    conj.reserve(basis.size());
    for (auto b : basis) conj.push_back(conjugate(b));
    return minkowski_sum(basis, conj, space);
}

std::vector<MonomialId> putinar_support(const PopProblem &problem, std::uint32_t d) {
    if (d < min_order(problem)) throw std::invalid_argument("relaxation order below the minimal order");
    const auto &sp = problem.space;
    std::set<MonomialId> out;
    auto add = [&](const std::vector<MonomialId> &v) { out.insert(v.begin(), v.end()); };
    add(problem.objective.support());
    for (auto &g : problem.nonneg)
        add(minkowski_sum(g.support(), gram_support(dense_basis_vector(sp, d - half_degree(g.degree())), sp), sp));
    for (auto &h : problem.zero) {
        std::vector<MonomialId> mult;
        if (sp.is_complex()) mult = gram_support(dense_basis_vector(sp, d - half_degree(h.degree())), sp);
        else mult = dense_basis_vector(sp, 2 * d - h.degree());
        add(minkowski_sum(h.support(), mult, sp));
    }
    for (auto &G : problem.psd) {
        auto mult = gram_support(dense_basis_vector(sp, d - half_degree(G.degree())), sp);
        for (auto &e : G.entries()) add(minkowski_sum(e.support(), mult, sp));
    }
    return {out.begin(), out.end()};
}

} // namespace polyopt
