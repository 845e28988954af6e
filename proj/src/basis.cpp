#include "polyopt/basis.hpp"

#include "polyopt/conic.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace polyopt {

std::size_t Groupings::block_count() const {
    std::size_t c = objective.size();
    for (auto &v : nonneg) c += v.size();
    for (auto &v : psd) c += v.size();
    return c;
}

std::size_t Groupings::largest_block() const {
    std::size_t s = 0;
    for (auto &b : objective) s = std::max(s, b.size());
    for (auto &v : nonneg)
        for (auto &b : v) s = std::max(s, b.size());
    for (auto &v : psd)
        for (auto &b : v) s = std::max(s, b.size());
    return s;
}

std::vector<std::pair<std::size_t, std::size_t>> Groupings::block_sizes(const PopProblem &problem) const {
    std::map<std::size_t, std::size_t, std::greater<>> m;
    for (auto &b : objective) ++m[b.size()];
    for (auto &v : nonneg)
        for (auto &b : v) ++m[b.size()];
    for (std::size_t k = 0; k < psd.size(); ++k)
        for (auto &b : psd[k]) ++m[b.size() * problem.psd[k].side()];
    return {m.begin(), m.end()};
}

Basis dense_basis_over(const VariableSpace &space, const std::vector<std::size_t> &vars, std::uint32_t d) {
    Basis out;
    VariableSpace sub(std::max<std::size_t>(vars.size(), 1));
    for (auto m : dense_basis(sub, d)) {
        auto e = unrank_exponents(sub.n(), m.plain);
        Exponents full(space.n(), 0);
        for (std::size_t i = 0; i < vars.size(); ++i) full[vars[i]] = e[i];
        if (vars.empty() && e[0] != 0) continue;
        out.push_back(encode(ExponentKey{full, {}}, space));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Groupings dense(const PopProblem &problem, std::uint32_t d) {
    if (d < min_order(problem)) throw std::invalid_argument("relaxation order below the minimal order");
    const auto &sp = problem.space;
    Groupings g;
    g.objective.push_back(dense_basis_vector(sp, d));
    for (auto &q : problem.nonneg) g.nonneg.push_back({dense_basis_vector(sp, d - half_degree(q.degree()))});
    for (auto &q : problem.psd) g.psd.push_back({dense_basis_vector(sp, d - half_degree(q.degree()))});
    for (auto &q : problem.zero) g.zero.push_back({dense_basis_vector(sp, d - half_degree(q.degree()))});
    std::vector<std::size_t> all(sp.n());
    std::iota(all.begin(), all.end(), 0);
    g.cliques.push_back(all);
    return g;
}

std::vector<MonomialId> relaxation_support(const PopProblem &problem, const Groupings &g, bool with_bound) {
    const auto &sp = problem.space;
    std::set<MonomialId> out;
    auto add = [&](const std::vector<MonomialId> &v) { out.insert(v.begin(), v.end()); };
    add(problem.objective.support());
    if (with_bound) out.insert(MonomialId{});
    for (std::size_t i = 0; i < problem.nonneg.size(); ++i)
        for (auto &b : g.nonneg[i]) add(minkowski_sum(problem.nonneg[i].support(), gram_support(b, sp), sp));
    for (std::size_t j = 0; j < problem.zero.size(); ++j)
        for (auto &b : g.zero[j]) add(minkowski_sum(problem.zero[j].support(), gram_support(b, sp), sp));
    for (std::size_t k = 0; k < problem.psd.size(); ++k)
        for (auto &b : g.psd[k]) {
            auto gs = gram_support(b, sp);
            for (auto &e : problem.psd[k].entries()) add(minkowski_sum(e.support(), gs, sp));
        }
    return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Newton polytope

namespace {

using Point = std::vector<double>;

// L1 distance of a target to conv(points): min sum(e+ + e-) s.t. sum l_i p_i + e+ - e- = t, sum l = 1.
ConicProgram distance_lp(const std::vector<Point> &pts, std::size_t n) {
    ConicProgram p;
    auto lam = p.add_cone(Cone::nonneg(pts.size()));
    auto ep = p.add_cone(Cone::nonneg(n));
    auto em = p.add_cone(Cone::nonneg(n));
    for (std::size_t k = 0; k < n; ++k) {
        auto r = p.add_row(0.0);
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (pts[i][k] != 0.0) p.add_entry(r, lam + i, pts[i][k]);
        p.add_entry(r, ep + k, 1.0);
        p.add_entry(r, em + k, -1.0);
        p.c[ep + k] = 1.0;
        p.c[em + k] = 1.0;
    }
    auto r = p.add_row(1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) p.add_entry(r, lam + i, 1.0);
    p.canonicalize();
    return p;
}

struct DistanceOracle {
    ParametricLp lp;
    std::size_t n;
    SolverSettings st;
    DistanceOracle(const std::vector<Point> &pts, std::size_t dim) : lp(distance_lp(pts, dim)), n(dim) {
        st.feas_tol = 1e-10;
        st.gap_tol = 1e-10;
    }
    // Returns a negative value when the LP did not solve.
    double operator()(const Point &t) {
        std::vector<double> rhs(t);
        rhs.push_back(1.0);
        lp.set_rhs(rhs);
        auto s = lp.resolve(st);
        if (s.status != Status::optimal) return -1.0;
        return std::max(0.0, s.primal_objective);
    }
};

template <class F>
void parallel_for(std::size_t count, bool parallel, unsigned threads, F &&make_worker) {
    unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    if (!parallel || t <= 1 || count < 8) {
        auto w = make_worker();
        for (std::size_t i = 0; i < count; ++i) w(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < std::min<std::size_t>(t, count); ++k)
        pool.emplace_back([&] {
            auto w = make_worker();
            for (std::size_t i = next++; i < count; i = next++) w(i);
        });
    for (auto &th : pool) th.join();
}

} // namespace

Basis newton_filter(const VariableSpace &space, const Basis &candidates, const std::vector<MonomialId> &support,
                    const NewtonOptions &options, NewtonReport *report) {
    NewtonReport local;
    NewtonReport &rep = report ? *report : local;
    rep.candidates += candidates.size();
    if (space.is_complex()) {
        rep.diagnostics.push_back("Newton polytope reduction is only defined for real spaces; basis kept");
        rep.kept += candidates.size();
        return candidates;
    }
    const std::size_t n = space.n();
    std::vector<Point> pts;
    for (auto m : support) {
        auto e = unrank_exponents(n, m.plain);
        pts.emplace_back(e.begin(), e.end());
    }
    rep.support_points += pts.size();
    if (pts.empty()) return {};

    if (options.akl_toussaint && pts.size() > 2 * n + 2) {
        // extreme points along the coordinate axes and the all-ones direction
        std::vector<std::size_t> ext;
        auto extreme = [&](auto key) {
            std::size_t lo = 0, hi = 0;
            for (std::size_t i = 1; i < pts.size(); ++i) {
                if (key(pts[i]) < key(pts[lo])) lo = i;
                if (key(pts[i]) > key(pts[hi])) hi = i;
            }
            ext.push_back(lo);
            ext.push_back(hi);
        };
        for (std::size_t k = 0; k < n; ++k) extreme([k](const Point &p) { return p[k]; });
        extreme([](const Point &p) { return std::accumulate(p.begin(), p.end(), 0.0); });
        std::sort(ext.begin(), ext.end());
        ext.erase(std::unique(ext.begin(), ext.end()), ext.end());
        std::vector<Point> hull;
        for (auto i : ext) hull.push_back(pts[i]);
        std::vector<char> drop(pts.size(), 0);
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (!std::binary_search(ext.begin(), ext.end(), i)) others.push_back(i);
        std::mutex mu;
        parallel_for(others.size(), options.parallel, options.threads, [&] {
            return [&, oracle = std::make_shared<DistanceOracle>(hull, n)](std::size_t k) {
                double dist = (*oracle)(pts[others[k]]);
                std::lock_guard lock(mu);
                ++rep.lp_solves;
                if (dist >= 0.0 && dist <= 1e-9) drop[others[k]] = 1;
            };
        });
        std::vector<Point> kept;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (!drop[i]) kept.push_back(pts[i]);
        pts = std::move(kept);
    }
    rep.reduced_points += pts.size();

    // per-variable and total degree ranges
    Point lo(n + 1, 1e300), hi(n + 1, -1e300);
    for (auto &p : pts) {
        double s = 0;
        for (std::size_t k = 0; k < n; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
            s += p[k];
        }
        lo[n] = std::min(lo[n], s);
        hi[n] = std::max(hi[n], s);
    }
    std::vector<std::size_t> todo;
    std::vector<Point> targets(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto e = unrank_exponents(n, candidates[i].plain);
        Point t(n);
        double s = 0;
        bool ok = true;
        for (std::size_t k = 0; k < n; ++k) {
            t[k] = 2.0 * e[k];
            s += t[k];
            ok = ok && t[k] >= lo[k] && t[k] <= hi[k];
        }
        ok = ok && s >= lo[n] && s <= hi[n];
        targets[i] = t;
        if (ok) todo.push_back(i);
    }
    std::vector<char> keep(candidates.size(), 0);
    std::mutex mu;
    parallel_for(todo.size(), options.parallel, options.threads, [&] {
        return [&, oracle = std::make_shared<DistanceOracle>(pts, n)](std::size_t k) {
            std::size_t i = todo[k];
            double dist = (*oracle)(targets[i]);
            std::lock_guard lock(mu);
            ++rep.lp_solves;
            if (dist < 0.0) {
                rep.diagnostics.push_back("membership LP failed for " + monomial_string(candidates[i], space) +
                                          "; monomial retained");
                keep[i] = 1;
            } else if (dist <= options.retain_distance) {
                keep[i] = 1;
            }
        };
    });
    Basis out;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (keep[i]) out.push_back(candidates[i]);
    rep.kept += out.size();
    return out;
}

Groupings newton_polytope(const PopProblem &problem, const Groupings &g, const NewtonOptions &options,
                          NewtonReport *report) {
    auto support = relaxation_support(problem, g, options.with_bound);
    Groupings out = g;
    for (auto &b : out.objective) b = newton_filter(problem.space, b, support, options, report);
    return out;
}

// ---------------------------------------------------------------------------

Groupings diagonal_consistency(const PopProblem &problem, const Groupings &g, bool with_bound) {
    const auto &sp = problem.space;
    auto sv = relaxation_support(problem, g, with_bound);
    std::unordered_set<MonomialId, MonomialIdHash> support(sv.begin(), sv.end());
    Groupings out = g;
    if (sp.is_complex()) {
        // Hermitian Gram entries map one-to-one to monomials: exactly the occurring factors survive
        std::unordered_set<std::uint64_t> used;
        for (auto m : sv) {
            used.insert(m.plain);
            used.insert(m.conj);
        }
        for (auto &basis : out.objective) std::erase_if(basis, [&](MonomialId m) { return !used.count(m.plain); });
        return out;
    }
    for (auto &basis : out.objective) {
        bool changed = true;
        while (changed) {
            changed = false;
            std::unordered_map<MonomialId, int, MonomialIdHash> cross;
            for (std::size_t a = 0; a < basis.size(); ++a)
                    for (std::size_t b = a + 1; b < basis.size(); ++b) ++cross[mul(basis[a], basis[b], sp)];
            Basis next;
            for (auto j : basis) {
                MonomialId sq = mul(j, j, sp);
                if (support.count(sq) || cross.count(sq)) next.push_back(j);
                else changed = true;
            }
            basis = std::move(next);
        }
    }
    return out;
}

Groupings homogeneous_filter(const Groupings &g, const Polynomial &p, std::uint32_t prefactor_half_degree) {
    if (!p.is_homogeneous()) throw std::invalid_argument("homogeneous filter requires a homogeneous polynomial");
    std::uint32_t deg = p.degree();
    if (deg % 2) throw std::invalid_argument("homogeneous filter requires an even-degree form");
    const std::uint32_t target = deg / 2 + prefactor_half_degree;
    Groupings out = g;
    for (auto &b : out.objective)
        std::erase_if(b, [&](MonomialId m) { return degree(m, p.space()) != target; });
    return out;
}

// ---------------------------------------------------------------------------
// graphs

namespace graph {

std::vector<std::vector<std::size_t>> connected_components(const Adjacency &adj) {
    std::vector<int> comp(adj.size(), -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < adj.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s}, members;
        comp[s] = static_cast<int>(out.size());
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            members.push_back(v);
            for (auto w : adj[v])
                if (comp[w] < 0) {
                    comp[w] = comp[s];
                    stack.push_back(w);
                }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> keep_maximal(std::vector<std::vector<std::size_t>> cl) {
    for (auto &c : cl) std::sort(c.begin(), c.end());
    std::sort(cl.begin(), cl.end(), [](auto &a, auto &b) { return a.size() != b.size() ? a.size() > b.size() : a < b; });
    std::vector<std::vector<std::size_t>> out;
    for (auto &c : cl) {
        bool sub = false;
        for (auto &o : out)
            if (std::includes(o.begin(), o.end(), c.begin(), c.end())) {
                sub = true;
                break;
            }
        if (!sub) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::vector<std::vector<std::size_t>> chordal_cliques(const Adjacency &adj) {
    Adjacency g = adj;
    for (std::size_t v = 0; v < g.size(); ++v) g[v].erase(v);
    std::vector<char> gone(g.size(), 0);
    std::vector<std::vector<std::size_t>> cand;
    for (std::size_t step = 0; step < g.size(); ++step) {
        std::size_t best = g.size(), bd = 0;
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (gone[v]) continue;
            if (best == g.size() || g[v].size() < bd) {
                best = v;
                bd = g[v].size();
            }
        }
        std::vector<std::size_t> nb(g[best].begin(), g[best].end());
        for (auto a : nb)
            for (auto b : nb)
                if (a != b) g[a].insert(b);
        std::vector<std::size_t> c = nb;
        c.push_back(best);
        cand.push_back(c);
        for (auto a : nb) g[a].erase(best);
        g[best].clear();
        gone[best] = 1;
    }
    return keep_maximal(std::move(cand));
}

std::vector<std::vector<std::size_t>> maximal_cliques(const Adjacency &adj) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> r;
    std::function<void(std::set<std::size_t>, std::set<std::size_t>)> bk = [&](std::set<std::size_t> p,
                                                                                 std::set<std::size_t> x) {
        if (p.empty() && x.empty()) {
            out.push_back(r);
            return;
        }
        std::size_t pivot = p.empty() ? *x.begin() : *p.begin();
        std::vector<std::size_t> cand;
        for (auto v : p)
            if (!adj[pivot].count(v)) cand.push_back(v);
        for (auto v : cand) {
            std::set<std::size_t> p2, x2;
            for (auto w : adj[v]) {
                if (w == v) continue;
                if (p.count(w)) p2.insert(w);
                if (x.count(w)) x2.insert(w);
            }
            r.push_back(v);
            bk(p2, x2);
            r.pop_back();
            p.erase(v);
            x.insert(v);
        }
    };
    std::set<std::size_t> all;
    for (std::size_t v = 0; v < adj.size(); ++v) all.insert(v);
    bk(all, {});
    return keep_maximal(std::move(out));
}

bool is_chordal(const Adjacency &adj) {
    // maximum cardinality search followed by a perfect elimination check
    const std::size_t n = adj.size();
    std::vector<int> weight(n, 0);
    std::vector<char> done(n, 0);
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = n;
        for (std::size_t v = 0; v < n; ++v)
            if (!done[v] && (best == n || weight[v] > weight[best])) best = v;
        done[best] = 1;
        order.push_back(best);
        for (auto w : adj[best])
            if (!done[w]) ++weight[w];
    }
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[order[i]] = i;
    for (std::size_t i = 0; i < n; ++i) {
        auto v = order[i];
        std::vector<std::size_t> earlier;
        for (auto w : adj[v])
            if (w != v && pos[w] < i) earlier.push_back(w);
        if (earlier.empty()) continue;
        auto parent = *std::max_element(earlier.begin(), earlier.end(), [&](auto a, auto b) { return pos[a] < pos[b]; });
        for (auto w : earlier)
            if (w != parent && !adj[parent].count(w)) return false;
    }
    return true;
}

} // namespace graph

// ---------------------------------------------------------------------------
// correlative sparsity

namespace {

std::set<std::size_t> variables_of(const Polynomial &p) {
    std::set<std::size_t> v;
    const auto &sp = p.space();
    for (auto &t : p.terms()) {
        auto k = decode(t.id, sp);
        for (std::size_t i = 0; i < sp.n(); ++i)
            if (k.plain[i] || (!k.conj.empty() && k.conj[i])) v.insert(i);
    }
    return v;
}

std::set<std::size_t> variables_of(const PolyMatrix &G) {
    std::set<std::size_t> v;
    for (auto &e : G.entries()) {
        auto w = variables_of(e);
        v.insert(w.begin(), w.end());
    }
    return v;
}

} // namespace

Groupings correlative_sparsity(const PopProblem &problem, std::uint32_t d, const CorrelativeOptions &options,
                               std::vector<std::string> *diagnostics) {
    if (d < min_order(problem)) throw std::invalid_argument("relaxation order below the minimal order");
    const auto &sp = problem.space;
    const std::size_t n = sp.n();
    graph::Adjacency adj(n);
    auto connect = [&](const std::set<std::size_t> &vs) {
        for (auto a : vs)
            for (auto b : vs)
                if (a != b) adj[a].insert(b);
    };
    for (auto &t : problem.objective.terms()) connect(variables_of(Polynomial::monomial(sp, t.id)));
    auto high = [](const std::vector<bool> &marks, std::size_t i) { return marks.empty() || marks.at(i); };
    std::vector<std::set<std::size_t>> nn_vars, z_vars, p_vars;
    for (std::size_t i = 0; i < problem.nonneg.size(); ++i) {
        nn_vars.push_back(variables_of(problem.nonneg[i]));
        if (high(options.high_order_nonneg, i)) connect(nn_vars.back());
    }
    for (std::size_t i = 0; i < problem.zero.size(); ++i) {
        z_vars.push_back(variables_of(problem.zero[i]));
        if (high(options.high_order_zero, i)) connect(z_vars.back());
    }
    for (std::size_t i = 0; i < problem.psd.size(); ++i) {
        p_vars.push_back(variables_of(problem.psd[i]));
        if (high(options.high_order_psd, i)) connect(p_vars.back());
    }
    auto cliques = options.chordal ? graph::chordal_cliques(adj) : graph::maximal_cliques(adj);

    auto assign = [&](const std::set<std::size_t> &vs, const std::string &tag) -> std::size_t {
        for (std::size_t c = 0; c < cliques.size(); ++c)
            if (std::includes(cliques[c].begin(), cliques[c].end(), vs.begin(), vs.end())) return c;
        std::set<std::size_t> merged(vs.begin(), vs.end());
        std::vector<std::vector<std::size_t>> rest;
        for (auto &c : cliques) {
            bool touches = std::any_of(c.begin(), c.end(), [&](auto v) { return vs.count(v) > 0; });
            if (touches) merged.insert(c.begin(), c.end());
            else rest.push_back(c);
        }
        if (diagnostics) diagnostics->push_back(tag + " spans no single clique; cliques merged");
        rest.emplace_back(merged.begin(), merged.end());
        cliques = std::move(rest);
        return cliques.size() - 1;
    };
    std::vector<std::size_t> nn_c, z_c, p_c;
    for (std::size_t i = 0; i < nn_vars.size(); ++i) nn_c.push_back(assign(nn_vars[i], "nonneg constraint " + std::to_string(i + 1)));
    for (std::size_t i = 0; i < z_vars.size(); ++i) z_c.push_back(assign(z_vars[i], "zero constraint " + std::to_string(i + 1)));
    for (std::size_t i = 0; i < p_vars.size(); ++i) p_c.push_back(assign(p_vars[i], "psd constraint " + std::to_string(i + 1)));
    // merging may have renumbered cliques: re-resolve by containment
    auto locate = [&](const std::set<std::size_t> &vs) {
        for (std::size_t c = 0; c < cliques.size(); ++c)
            if (std::includes(cliques[c].begin(), cliques[c].end(), vs.begin(), vs.end())) return c;
        return cliques.size() - 1;
    };

    Groupings g;
    g.cliques = cliques;
    for (auto &c : cliques) g.objective.push_back(dense_basis_over(sp, c, d));
    Basis one{MonomialId{}};
    for (std::size_t i = 0; i < nn_vars.size(); ++i) {
        auto &c = cliques[locate(nn_vars[i])];
        g.nonneg.push_back({high(options.high_order_nonneg, i)
                                ? dense_basis_over(sp, c, d - half_degree(problem.nonneg[i].degree()))
                                : one});
    }
    for (std::size_t i = 0; i < p_vars.size(); ++i) {
        auto &c = cliques[locate(p_vars[i])];
        g.psd.push_back({high(options.high_order_psd, i) ? dense_basis_over(sp, c, d - half_degree(problem.psd[i].degree()))
                                                         : one});
    }
    for (std::size_t i = 0; i < z_vars.size(); ++i) {
        auto &c = cliques[locate(z_vars[i])];
        g.zero.push_back({high(options.high_order_zero, i) ? dense_basis_over(sp, c, d - half_degree(problem.zero[i].degree()))
                                                           : one});
    }
    (void)nn_c;
    (void)z_c;
    (void)p_c;
    return g;
}

// ---------------------------------------------------------------------------
// term sparsity

namespace {

MonomialId gram_product(MonomialId a, MonomialId b, const VariableSpace &sp) {
    return sp.is_complex() ? mul(a, conjugate(b), sp) : mul(a, b, sp);
}

struct TspNode {
    const Basis *vertices;
    std::vector<MonomialId> weight; // supp of the constraint polynomial(s), {1} for the objective
};

std::vector<Basis> extend(const Basis &verts, const graph::Adjacency &adj, Extension ext) {
    auto parts = ext == Extension::block ? graph::connected_components(adj) : graph::chordal_cliques(adj);
    std::vector<Basis> out;
    for (auto &p : parts) {
        Basis b;
        for (auto i : p) b.push_back(verts[i]);
        std::sort(b.begin(), b.end());
        out.push_back(std::move(b));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// One TSP graph per polynomial; returns the extended blocks and adds their supports to `next`.
std::vector<Basis> tsp_blocks(const VariableSpace &sp, const Basis &verts, const std::vector<MonomialId> &weight,
                              const std::set<MonomialId> &U, Extension ext, std::set<MonomialId> &next) {
    graph::Adjacency adj(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i)
        for (std::size_t j = i + 1; j < verts.size(); ++j) {
            MonomialId ij = gram_product(verts[i], verts[j], sp);
            MonomialId ji = gram_product(verts[j], verts[i], sp);
            for (auto a : weight) {
                if (U.count(mul(ij, a, sp)) || U.count(mul(ji, a, sp))) {
                    adj[i].insert(j);
                    adj[j].insert(i);
                    break;
                }
            }
        }
    auto blocks = extend(verts, adj, ext);
    for (auto &b : blocks)
        for (std::size_t i = 0; i < b.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j)
                for (auto a : weight) next.insert(mul(gram_product(b[i], b[j], sp), a, sp));
    return blocks;
}

void term_sparsity_step(TermSparsityState &st) {
    const auto &P = st.problem;
    const auto &sp = P.space;
    auto dn = dense(P, st.d);
    std::set<MonomialId> next = st.base;
    Groupings g;
    g.cliques = dn.cliques;
    g.objective = tsp_blocks(sp, dn.objective[0], {MonomialId{}}, st.support, st.extension, next);
    for (std::size_t i = 0; i < P.nonneg.size(); ++i)
        g.nonneg.push_back(tsp_blocks(sp, dn.nonneg[i][0], P.nonneg[i].support(), st.support, st.extension, next));
    for (std::size_t k = 0; k < P.psd.size(); ++k) {
        std::set<MonomialId> w;
        for (auto &e : P.psd[k].entries())
            for (auto &t : e.terms()) w.insert(t.id);
        g.psd.push_back(tsp_blocks(sp, dn.psd[k][0], {w.begin(), w.end()}, st.support, st.extension, next));
    }
    g.zero = dn.zero;
    st.groupings = std::move(g);
    st.converged = next == st.support;
    st.support = std::move(next);
    ++st.iteration;
}

} // namespace

TermSparsityState term_sparsity_init(const PopProblem &problem, std::uint32_t d, Extension extension,
                                     bool diagonal_heuristic) {
    if (d < min_order(problem)) throw std::invalid_argument("relaxation order below the minimal order");
    TermSparsityState st{problem, d, extension, diagonal_heuristic, {}, {}, {}, false, 0};
    const auto &sp = problem.space;
    auto add = [&](const Polynomial &p) {
        for (auto &t : p.terms()) st.base.insert(t.id);
    };
    add(problem.objective);
    st.base.insert(MonomialId{});
    for (auto &g : problem.nonneg) add(g);
    for (auto &h : problem.zero) add(h);
    for (auto &G : problem.psd)
        for (auto &e : G.entries()) add(e);
    if (diagonal_heuristic)
        for (auto b : dense_basis_vector(sp, d)) st.base.insert(gram_product(b, b, sp));
    st.support = st.base;
    term_sparsity_step(st);
    st.converged = false;
    return st;
}

bool term_sparsity_iterate(TermSparsityState &state) {
    if (state.converged) return true;
    term_sparsity_step(state);
    return state.converged;
}

} // namespace polyopt
