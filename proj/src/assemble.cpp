#include "polyopt/assemble.hpp"

#include <cmath>
#include <set>

namespace polyopt {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

MonomialId gram_product(MonomialId a, MonomialId b, const VariableSpace &sp) {
    return sp.is_complex() ? mul(a, conjugate(b), sp) : mul(a, b, sp);
}

} // namespace

Coeff riesz(const Polynomial &p, const MomentVector &y) {
    Coeff s = 0.0;
    for (auto &t : p.terms()) {
        auto it = y.find(t.id);
        if (it == y.end()) throw std::out_of_range("moment " + monomial_string(t.id, p.space()) + " missing");
        s += t.coeff * it->second;
    }
    return s;
}

MomentVector point_moments(const VariableSpace &space, std::span<const Coeff> point, std::uint32_t degree) {
    MomentVector y;
    auto basis = dense_basis_vector(space, degree);
    auto value = [&](MonomialId m) {
        auto k = decode(m, space);
        Coeff v = 1.0;
        for (std::size_t i = 0; i < space.n(); ++i) {
            for (std::uint32_t e = 0; e < k.plain[i]; ++e) v *= point[i];
            if (!k.conj.empty())
                for (std::uint32_t e = 0; e < k.conj[i]; ++e) v *= std::conj(point[i]);
        }
        return v;
    };
    if (!space.is_complex()) {
        for (auto m : basis) y[m] = value(m);
        return y;
    }
    for (auto a : basis)
        for (auto b : basis) {
            MonomialId m{a.plain, b.plain};
            y[m] = value(m);
        }
    return y;
}

std::string to_string(Representation r) {
    switch (r) {
    case Representation::psd: return "psd";
    case Representation::dd: return "dd";
    case Representation::sdd: return "sdd";
    }
    return "?";
}

double evaluate(const LinearForm &f, const std::vector<double> &x) {
    double s = 0.0;
    for (auto &[v, c] : f) s += c * x.at(v);
    return s;
}

Eigen::MatrixXd GramParam::assemble(const std::vector<double> &x) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(side, side);
    for (std::size_t k = 0; k < vars.size(); ++k)
        for (auto &[i, j, w] : shapes[k]) g(i, j) += w * x.at(vars[k]);
    return g;
}

MomentVector Relaxation::moments(const Solution &sol) const {
    MomentVector y;
    if (form == Form::moment) {
        for (auto &[m, f] : moment_map) {
            double re = evaluate(f.first, sol.x), im = evaluate(f.second, sol.x);
            y[m] = Coeff(re, im);
            if (m.plain != m.conj && problem.is_complex()) y[conjugate(m)] = Coeff(re, -im);
        }
        return y;
    }
    for (auto &[m, r] : monomial_row) y[m] = -sol.y.at(r);
    return y;
}

std::vector<Eigen::MatrixXd> Relaxation::grams(const Solution &sol) const {
    std::vector<Eigen::MatrixXd> out;
    if (form == Form::sos) {
        for (auto &gp : gram_params) out.push_back(gp.assemble(sol.x));
        return out;
    }
    auto offsets = program.cone_offsets();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        auto pos = std::find(offsets.begin(), offsets.end(), block_cone[k]) - offsets.begin();
        const auto &cone = program.cones[pos];
        Eigen::Map<const Eigen::VectorXd> seg(sol.s.data() + block_cone[k], cone.size());
        if (cone.kind == ConeKind::psd) out.push_back(smat(seg, cone.dim));
        else out.push_back(Eigen::MatrixXd::Constant(1, 1, seg(0)));
    }
    return out;
}

double Relaxation::bound(const Solution &sol) const {
    if (form == Form::sos) return sol.x.at(bound_var);
    return sol.primal_objective;
}

// ---------------------------------------------------------------------------
// moment forms

MomentRelaxation moment_forms(const PopProblem &problem, const Groupings &g) {
    const auto &sp = problem.space;
    MomentRelaxation mr;
    mr.space = sp;
    auto shifted = [&](MonomialId base, const Polynomial &q) {
        MomentForm f;
        for (auto &t : q.terms()) f.emplace_back(mul(base, t.id, sp), t.coeff);
        return f;
    };
    auto add_block = [&](BlockRef ref, auto &&entry) {
        MomentBlock b;
        b.side = ref.side();
        b.entries.resize(b.side * b.side);
        for (std::size_t i = 0; i < b.side; ++i)
            for (std::size_t j = 0; j < b.side; ++j) b.entries[i * b.side + j] = entry(i, j);
        b.ref = std::move(ref);
        mr.blocks.push_back(std::move(b));
    };
    for (std::size_t k = 0; k < g.objective.size(); ++k) {
        const auto &B = g.objective[k];
        add_block(BlockRef{BlockRef::Kind::objective, 0, k, B, 1}, [&](std::size_t i, std::size_t j) {
            return MomentForm{{gram_product(B[i], B[j], sp), 1.0}};
        });
    }
    for (std::size_t c = 0; c < problem.nonneg.size(); ++c)
        for (std::size_t k = 0; k < g.nonneg[c].size(); ++k) {
            const auto &B = g.nonneg[c][k];
            add_block(BlockRef{BlockRef::Kind::nonneg, c, k, B, 1}, [&](std::size_t i, std::size_t j) {
                return shifted(gram_product(B[i], B[j], sp), problem.nonneg[c]);
            });
        }
    for (std::size_t c = 0; c < problem.psd.size(); ++c)
        for (std::size_t k = 0; k < g.psd[c].size(); ++k) {
            const auto &B = g.psd[c][k];
            const auto &G = problem.psd[c];
            const std::size_t m = G.side();
            add_block(BlockRef{BlockRef::Kind::psd, c, k, B, m}, [&](std::size_t a, std::size_t b) {
                return shifted(gram_product(B[a / m], B[b / m], sp), G.at(a % m, b % m));
            });
        }
    for (std::size_t c = 0; c < problem.zero.size(); ++c)
        for (auto &B : g.zero[c])
            for (auto m : gram_support(B, sp)) {
                mr.zeros.push_back(shifted(m, problem.zero[c]));
                mr.zero_origin.emplace_back(c, m);
            }
    for (auto &t : problem.objective.terms()) mr.objective.emplace_back(t.id, t.coeff);
    return mr;
}

// ---------------------------------------------------------------------------
// lowering to a real program

namespace {

using RealForm = std::map<std::size_t, double>;

struct Components {
    bool complex = false;
    std::map<std::pair<MonomialId, int>, std::size_t> index;
    std::vector<std::pair<MonomialId, int>> keys;

    std::size_t get(MonomialId canon, int part) {
        auto [it, fresh] = index.try_emplace({canon, part}, keys.size());
        if (fresh) keys.push_back({canon, part});
        return it->second;
    }

    // real and imaginary parts of a complex linear form
    std::pair<RealForm, RealForm> realify(const MomentForm &f) {
        RealForm re, im;
        for (auto &[m, c] : f) {
            MonomialId canon = m;
            double sgn = 1.0;
            if (complex && m.plain < m.conj) {
                canon = conjugate(m);
                sgn = -1.0;
            }
            std::size_t r = get(canon, 0);
            re[r] += c.real();
            im[r] += c.imag();
            if (complex && canon.plain != canon.conj) {
                std::size_t i = get(canon, 1);
                re[i] -= c.imag() * sgn;
                im[i] += c.real() * sgn;
            }
        }
        std::erase_if(re, [](auto &kv) { return kv.second == 0.0; });
        std::erase_if(im, [](auto &kv) { return kv.second == 0.0; });
        return {re, im};
    }
};

struct RowSet {
    std::set<std::pair<std::vector<std::pair<std::size_t, double>>, double>> seen;
    ConicProgram *prog;

    // Returns the row and the sign it was stored with, or nothing for empty and repeated rows.
    std::optional<std::pair<std::size_t, double>> add(const RealForm &row, double rhs) {
        double mx = 0.0;
        for (auto &kv : row) mx = std::max(mx, std::abs(kv.second));
        std::vector<std::pair<std::size_t, double>> v;
        for (auto &kv : row)
            if (std::abs(kv.second) > 1e-14 * std::max(1.0, mx)) v.push_back(kv);
        if (v.empty()) return std::nullopt;
        double sign = 1.0;
        if (v.front().second < 0) {
            for (auto &kv : v) kv.second = -kv.second;
            rhs = -rhs;
            sign = -1.0;
        }
        if (!seen.insert({v, rhs}).second) return std::nullopt;
        auto r = prog->add_row(rhs);
        for (auto &[c, val] : v) prog->add_entry(r, c, val);
        return std::make_pair(r, sign);
    }
};

struct EntryRef {
    std::size_t var;
    double scale;
    RealForm form;
};

} // namespace

Relaxation complex_embed(const MomentRelaxation &mr) {
    const bool herm = mr.space.is_complex();
    Relaxation rel(PopProblem(mr.space), {}, 0);
    rel.form = Form::moment;
    Components comp;
    comp.complex = herm;
    comp.get(MonomialId{}, 0);
    auto &prog = rel.program;

    std::vector<EntryRef> entries;
    for (auto &blk : mr.blocks) {
        const std::size_t s = blk.side;
        auto at = [&](std::size_t i, std::size_t j) { return comp.realify(blk.entries[i * s + j]); };
        if (s == 1) {
            auto off = prog.add_cone(Cone::nonneg(1));
            rel.block_cone.push_back(off);
            entries.push_back({off, 1.0, at(0, 0).first});
        } else {
            const std::size_t S = herm ? 2 * s : s;
            auto off = prog.add_cone(Cone::psd(S, herm));
            rel.block_cone.push_back(off);
            for (std::size_t a = 0; a < S; ++a)
                for (std::size_t b = 0; b <= a; ++b) {
                    RealForm f;
                    if (!herm || (a < s && b < s)) f = at(a, b).first;
                    else if (a >= s && b >= s) f = at(a - s, b - s).first;
                    else f = at(a - s, b).second;
                    entries.push_back({off + svec_index(a, b), svec_scale(a, b), std::move(f)});
                }
        }
        rel.blocks.push_back(blk.ref);
    }
    std::vector<std::pair<RealForm, RealForm>> zeros;
    for (auto &z : mr.zeros) zeros.push_back(comp.realify(z));
    auto objective = comp.realify(mr.objective);

    // canonical locations: first single-term occurrence in a block
    std::vector<std::optional<LinearForm>> expr(comp.keys.size());
    std::vector<char> is_loc(entries.size(), 0);
    for (std::size_t e = 0; e < entries.size(); ++e) {
        auto &f = entries[e].form;
        if (f.size() != 1) continue;
        auto [k, c] = *f.begin();
        if (expr[k]) continue;
        expr[k] = LinearForm{{entries[e].var, 1.0 / (c * entries[e].scale)}};
        is_loc[e] = 1;
    }
    std::size_t unlocated = 0;
    for (auto &e : expr) unlocated += !e;
    if (unlocated) {
        auto off = prog.add_cone(Cone::free_vars(unlocated));
        for (auto &e : expr)
            if (!e) e = LinearForm{{off++, 1.0}};
    }
    auto substitute = [&](const RealForm &f, RealForm &out, double w) {
        for (auto &[k, c] : f)
            for (auto &[v, a] : *expr[k]) out[v] += w * c * a;
    };

    RowSet rows{{}, &prog};
    for (std::size_t e = 0; e < entries.size(); ++e) {
        if (is_loc[e]) continue;
        RealForm r;
        r[entries[e].var] += 1.0 / entries[e].scale;
        substitute(entries[e].form, r, -1.0);
        rows.add(r, 0.0);
    }
    for (std::size_t z = 0; z < zeros.size(); ++z) {
        auto &[re, im] = zeros[z];
        RealForm r1, r2;
        substitute(re, r1, 1.0);
        substitute(im, r2, 1.0);
        auto [c, m] = z < mr.zero_origin.size() ? mr.zero_origin[z] : std::pair<std::size_t, MonomialId>{};
        if (auto added = rows.add(r1, 0.0)) rel.zero_terms.push_back({c, m, added->first, added->second, 0});
        if (auto added = rows.add(r2, 0.0)) rel.zero_terms.push_back({c, m, added->first, added->second, 1});
    }
    {
        RealForm r;
        substitute(RealForm{{0, 1.0}}, r, 1.0);
        if (auto added = rows.add(r, 1.0)) rel.normalization_row = added->first;
    }
    RealForm obj;
    substitute(objective.first, obj, 1.0);
    for (auto &[v, c] : obj) prog.c[v] += c;

    for (std::size_t k = 0; k < comp.keys.size(); ++k) {
        auto [m, part] = comp.keys[k];
        auto &slot = rel.moment_map[m];
        (part == 0 ? slot.first : slot.second) = *expr[k];
    }
    prog.canonicalize();
    return rel;
}

Eigen::MatrixXd hermitian_embedding(const Eigen::MatrixXcd &h) {
    const auto s = h.rows();
    Eigen::MatrixXd r(2 * s, 2 * s);
    r << h.real(), -h.imag(), h.imag(), h.real();
    return r;
}

Relaxation build_moment(const PopProblem &problem, const Groupings &groupings, std::uint32_t d) {
    validate_or_throw(problem);
    auto rel = complex_embed(moment_forms(problem, groupings));
    rel.problem = problem;
    rel.groupings = groupings;
    rel.order = d;
    return rel;
}

// ---------------------------------------------------------------------------
// SOS form

namespace {

using EntryPoly = std::vector<std::pair<MonomialId, double>>;

std::vector<EntryPoly> block_entries(const VariableSpace &sp, const Basis &B, const PolyMatrix *G,
                                     const Polynomial *g) {
    const std::size_t m = G ? G->side() : 1;
    const std::size_t s = B.size() * m;
    std::vector<EntryPoly> out(s * s);
    for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = 0; b < s; ++b) {
            MonomialId base = mul(B[a / m], B[b / m], sp);
            const Polynomial *q = G ? &G->at(a % m, b % m) : g;
            if (!q) out[a * s + b].emplace_back(base, 1.0);
            else
                for (auto &t : q->terms()) out[a * s + b].emplace_back(mul(base, t.id, sp), t.coeff.real());
        }
    return out;
}

struct SosBuilder {
    const VariableSpace &sp;
    ConicProgram prog;
    std::map<MonomialId, std::map<std::size_t, double>> rows;

    explicit SosBuilder(const VariableSpace &s) : sp(s) {}

    GramParam add_gram(const std::vector<EntryPoly> &entry, std::size_t side, Representation rep,
                       const Eigen::MatrixXd *U, double sign) {
        GramParam gp;
        gp.side = side;
        using Shape = std::vector<std::tuple<std::size_t, std::size_t, double>>;
        auto outer = [&](const Eigen::VectorXd &u, const Eigen::VectorXd &v, double w) {
            Shape sh;
            for (std::size_t i = 0; i < side; ++i)
                for (std::size_t j = 0; j < side; ++j) {
                    double val = w * 0.5 * (u(i) * v(j) + v(i) * u(j));
                    if (val != 0.0) sh.emplace_back(i, j, val);
                }
            return sh;
        };
        auto row = [&](std::size_t k) -> Eigen::VectorXd {
            if (U && U->size()) return U->row(k).transpose();
            return Eigen::VectorXd::Unit(side, k);
        };
        if (side == 1) {
            auto off = prog.add_cone(Cone::nonneg(1));
            gp.vars.push_back(off);
            Eigen::VectorXd u = row(0);
            gp.shapes.push_back(outer(u, u, 1.0));
        } else if (rep == Representation::psd) {
            auto off = prog.add_cone(Cone::psd(side));
            for (std::size_t i = 0; i < side; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    gp.vars.push_back(off + svec_index(i, j));
                    if (i == j) gp.shapes.push_back({{i, i, 1.0}});
                    else gp.shapes.push_back({{i, j, 1.0 / kSqrt2}, {j, i, 1.0 / kSqrt2}});
                }
        } else if (rep == Representation::dd) {
            auto off = prog.add_cone(Cone::nonneg(side * side));
            std::size_t v = off;
            for (std::size_t k = 0; k < side; ++k) {
                Eigen::VectorXd u = row(k);
                gp.vars.push_back(v++);
                gp.shapes.push_back(outer(u, u, 1.0));
            }
            for (std::size_t k = 0; k < side; ++k)
                for (std::size_t l = k + 1; l < side; ++l) {
                    Eigen::VectorXd p = row(k) + row(l), q = row(k) - row(l);
                    gp.vars.push_back(v++);
                    gp.shapes.push_back(outer(p, p, 1.0));
                    gp.vars.push_back(v++);
                    gp.shapes.push_back(outer(q, q, 1.0));
                }
        } else {
            for (std::size_t k = 0; k < side; ++k)
                for (std::size_t l = k + 1; l < side; ++l) {
                    auto off = prog.add_cone(Cone::soc(3));
                    Eigen::VectorXd uk = row(k), ul = row(l);
                    Shape s0 = outer(uk, uk, 0.5), s1 = outer(uk, uk, 0.5), s2 = outer(uk, ul, 1.0);
                    for (auto &t : outer(ul, ul, 0.5)) s0.push_back(t);
                    for (auto &t : outer(ul, ul, -0.5)) s1.push_back(t);
                    gp.vars.insert(gp.vars.end(), {off, off + 1, off + 2});
                    gp.shapes.push_back(std::move(s0));
                    gp.shapes.push_back(std::move(s1));
                    gp.shapes.push_back(std::move(s2));
                }
        }
        for (std::size_t k = 0; k < gp.vars.size(); ++k)
            for (auto &[i, j, w] : gp.shapes[k])
                for (auto &[m, c] : entry[i * side + j]) rows[m][gp.vars[k]] += sign * w * c;
        return gp;
    }

    void add_var_poly(std::size_t var, const Polynomial &q, double sign) {
        for (auto &t : q.terms()) rows[t.id][var] += sign * t.coeff.real();
    }

    // Emits one row per monomial; returns false when some row reads 0 = nonzero.
    bool finalize(const Polynomial &rhs, std::map<MonomialId, std::size_t> &monomial_row) {
        for (auto &t : rhs.terms()) rows[t.id];
        bool ok = true;
        for (auto &[m, coefs] : rows) {
            double b = rhs.coefficient(m).real();
            double mx = 0.0;
            for (auto &kv : coefs) mx = std::max(mx, std::abs(kv.second));
            std::vector<std::pair<std::size_t, double>> v;
            for (auto &kv : coefs)
                if (std::abs(kv.second) > 1e-14 * std::max(1.0, mx)) v.push_back(kv);
            if (v.empty()) {
                if (b != 0.0) ok = false;
                continue;
            }
            auto r = prog.add_row(b);
            monomial_row[m] = r;
            for (auto &[c, val] : v) prog.add_entry(r, c, val);
        }
        prog.canonicalize();
        return ok;
    }
};

} // namespace

Relaxation build_sos(const PopProblem &problem, const Groupings &groupings, std::uint32_t d,
                     Representation representation, const std::vector<Eigen::MatrixXd> &rotations) {
    validate_or_throw(problem);
    if (problem.is_complex()) throw std::invalid_argument("the SOS form is built for real problems only");
    const auto &sp = problem.space;
    Relaxation rel(problem, groupings, d);
    rel.form = Form::sos;
    rel.representation = representation;
    rel.rotations = rotations;
    SosBuilder sb(sp);
    rel.bound_var = sb.prog.add_cone(Cone::free_vars(1));
    sb.prog.c[rel.bound_var] = -1.0;
    sb.rows[MonomialId{}][rel.bound_var] += 1.0;

    auto rotation = [&](std::size_t k) -> const Eigen::MatrixXd * {
        if (k < rotations.size() && rotations[k].size()) return &rotations[k];
        return nullptr;
    };
    auto add = [&](BlockRef ref, const PolyMatrix *G, const Polynomial *g) {
        if (const auto *U = rotation(rel.blocks.size()); U && (std::size_t)U->rows() != ref.side())
            throw std::invalid_argument("rotation size does not match its block");
        if (const auto *U = rotation(rel.blocks.size()); U && std::abs(U->determinant()) < 1e-300)
            throw std::invalid_argument("singular rotation matrix");
        auto entries = block_entries(sp, ref.basis, G, g);
        rel.gram_params.push_back(sb.add_gram(entries, ref.side(), representation, rotation(rel.blocks.size()), 1.0));
        rel.blocks.push_back(std::move(ref));
    };
    for (std::size_t k = 0; k < groupings.objective.size(); ++k)
        add(BlockRef{BlockRef::Kind::objective, 0, k, groupings.objective[k], 1}, nullptr, nullptr);
    for (std::size_t c = 0; c < problem.nonneg.size(); ++c)
        for (std::size_t k = 0; k < groupings.nonneg[c].size(); ++k)
            add(BlockRef{BlockRef::Kind::nonneg, c, k, groupings.nonneg[c][k], 1}, nullptr, &problem.nonneg[c]);
    for (std::size_t c = 0; c < problem.psd.size(); ++c)
        for (std::size_t k = 0; k < groupings.psd[c].size(); ++k)
            add(BlockRef{BlockRef::Kind::psd, c, k, groupings.psd[c][k], problem.psd[c].side()}, &problem.psd[c],
                nullptr);
    for (std::size_t c = 0; c < problem.zero.size(); ++c)
        for (auto &B : groupings.zero[c]) {
            auto ms = gram_support(B, sp);
            auto off = sb.prog.add_cone(Cone::free_vars(ms.size()));
            for (std::size_t i = 0; i < ms.size(); ++i) {
                sb.add_var_poly(off + i, Polynomial::monomial(sp, ms[i]) * problem.zero[c], 1.0);
                rel.zero_terms.push_back({c, ms[i], off + i, 1.0, 0});
            }
        }
    if (!sb.finalize(problem.objective, rel.monomial_row)) {
        rel.trivially_infeasible = true;
        rel.diagnostics.push_back("a monomial of the objective cannot be matched by any block");
    }
    rel.program = std::move(sb.prog);
    return rel;
}

Relaxation to_dd(const Relaxation &sos, const std::vector<Eigen::MatrixXd> &rotations) {
    return build_sos(sos.problem, sos.groupings, sos.order, Representation::dd, rotations);
}

Relaxation to_sdd(const Relaxation &sos, const std::vector<Eigen::MatrixXd> &rotations) {
    return build_sos(sos.problem, sos.groupings, sos.order, Representation::sdd, rotations);
}

bool is_dd(const Eigen::MatrixXd &m, double tol) {
    for (long i = 0; i < m.rows(); ++i) {
        double off = 0.0;
        for (long j = 0; j < m.cols(); ++j)
            if (j != i) off += std::abs(m(i, j));
        if (m(i, i) < off - tol) return false;
    }
    return true;
}

bool is_sdd(const Eigen::MatrixXd &m, const SolverSettings &settings) {
    const auto n = static_cast<std::size_t>(m.rows());
    if (n == 1) return m(0, 0) >= 0;
    // m = sum over pairs k < l of [[a, b], [b, c]] embedded at (k, l), each with (a + c, a - c, 2b) in SOC
    ConicProgram prog;
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) pairs.emplace_back(k, l, prog.add_cone(Cone::soc(3)));
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> row;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) row[{i, j}] = prog.add_row(m(static_cast<long>(i), static_cast<long>(j)));
    for (auto [k, l, o] : pairs) {
        // a = (v0 + v1)/2, c = (v0 - v1)/2, b = v2/2
        prog.add_entry(row[{k, k}], o, 0.5);
        prog.add_entry(row[{k, k}], o + 1, 0.5);
        prog.add_entry(row[{l, l}], o, 0.5);
        prog.add_entry(row[{l, l}], o + 1, -0.5);
        prog.add_entry(row[{k, l}], o + 2, 0.5);
    }
    prog.canonicalize();
    return solve(prog, settings).status == Status::optimal;
}

Eigen::MatrixXd rotation_from_solution(const Eigen::MatrixXd &gram) {
    const auto n = gram.rows();
    Eigen::MatrixXd g = 0.5 * (gram + gram.transpose()) + 1e-10 * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (gram + gram.transpose()));
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).array() + 1e-10;
        g = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        llt.compute(g);
    }
    return llt.matrixU();
}

PerturbationResult perturbation_min_eps(const Polynomial &p, std::uint32_t r, const SolverSettings &settings,
                                        std::uint32_t first_k) {
    const auto &sp = p.space();
    if (sp.is_complex()) throw std::invalid_argument("perturbation certificates are real-only");
    Polynomial theta(sp);
    double fact = 1.0;
    for (std::uint32_t k = 0; k <= r; ++k) {
        if (k > 0) fact *= k;
        if (k < first_k) continue;
        for (std::size_t j = 0; j < sp.n(); ++j) theta += pow(Polynomial::variable(sp, j), 2 * k) * (1.0 / fact);
    }
    auto B = dense_basis_vector(sp, std::max(half_degree(p.degree()), r));
    SosBuilder sb(sp);
    auto eps = sb.prog.add_cone(Cone::nonneg(1));
    sb.prog.c[eps] = 1.0;
    sb.add_var_poly(eps, theta, -1.0);
    sb.add_gram(block_entries(sp, B, nullptr, nullptr), B.size(), Representation::psd, nullptr, 1.0);
    std::map<MonomialId, std::size_t> rowmap;
    PerturbationResult res;
    res.gram_side = B.size();
    if (!sb.finalize(p, rowmap)) {
        res.status = Status::primal_infeasible;
        return res;
    }
    auto sol = solve(sb.prog, settings);
    res.status = sol.status;
    if (sol.status == Status::optimal) res.eps = sol.x[eps];
    return res;
}

PrefactorResult prefactor_certify(const Polynomial &p, std::uint32_t q_degree, bool newton,
                                  const SolverSettings &settings) {
    const auto &sp = p.space();
    if (sp.is_complex()) throw std::invalid_argument("prefactor certificates are real-only");
    PrefactorResult res;
    res.prefactor_basis = dense_basis_vector(sp, q_degree / 2);
    res.square_basis = dense_basis_vector(sp, half_degree(p.degree() + 2 * (q_degree / 2)));
    if (newton) {
        auto support = minkowski_sum(p.support(), gram_support(res.prefactor_basis, sp), sp);
        NewtonOptions o;
        o.with_bound = false;
        res.square_basis = newton_filter(sp, res.square_basis, support, o);
    }
    SosBuilder sb(sp);
    auto gq = sb.add_gram(block_entries(sp, res.prefactor_basis, nullptr, &p), res.prefactor_basis.size(),
                          Representation::psd, nullptr, 1.0);
    auto gs = sb.add_gram(block_entries(sp, res.square_basis, nullptr, nullptr), res.square_basis.size(),
                          Representation::psd, nullptr, -1.0);
    std::map<MonomialId, std::size_t> rowmap;
    if (!sb.finalize(Polynomial(sp), rowmap)) {
        res.status = Status::primal_infeasible;
        return res;
    }
    // trace(Gram_q) = 1; both sides are homogeneous in the Gram data, so this equals trace >= 1
    auto r = sb.prog.add_row(1.0);
    for (std::size_t k = 0; k < gq.vars.size(); ++k)
        for (auto &[i, j, w] : gq.shapes[k])
            if (i == j) sb.prog.add_entry(r, gq.vars[k], w);
    sb.prog.canonicalize();
    auto sol = solve(sb.prog, settings);
    res.status = sol.status;
    res.feasible = sol.status == Status::optimal;
    if (res.feasible) {
        res.prefactor_gram = gq.assemble(sol.x);
        res.square_gram = gs.assemble(sol.x);
    }
    return res;
}

Solution solve_relaxation(const Relaxation &relaxation, const SolverSettings &settings) {
    if (relaxation.trivially_infeasible) {
        Solution s;
        s.status = Status::primal_infeasible;
        return s;
    }
    return solve(relaxation.program, settings);
}

} // namespace polyopt
