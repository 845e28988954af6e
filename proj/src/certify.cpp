#include "polyopt/certify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace polyopt {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

MonomialId gram_product(MonomialId a, MonomialId b, const VariableSpace &sp) {
    return sp.is_complex() ? MonomialId{a.plain, b.plain} : mul(a, b, sp);
}

bool has_solution(const Solution &s) {
    return s.status == Status::optimal || s.status == Status::limit_feasible_suspect ||
           s.status == Status::iteration_limit;
}

Eigen::VectorXd hermitian_eigenvalues(const MatrixXcd &h) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

bool is_psd(const MatrixXcd &h, double tol) {
    auto ev = hermitian_eigenvalues(h);
    return ev(0) >= -tol * std::max(1.0, ev(ev.size() - 1));
}

// L(q * a * conj(b)) over B_t for complex spaces (L(q * a * b) for real ones)
std::optional<MatrixXcd> localizing(const VariableSpace &sp, const MomentVector &y, std::uint32_t t,
                                    const Polynomial &q) {
    auto B = dense_basis_vector(sp, t);
    MatrixXcd m(B.size(), B.size());
    for (std::size_t i = 0; i < B.size(); ++i)
        for (std::size_t j = 0; j < B.size(); ++j) {
            Coeff s = 0.0;
            for (auto &term : q.terms()) {
                auto it = y.find(mul(gram_product(B[i], B[j], sp), term.id, sp));
                if (it == y.end()) return std::nullopt;
                s += term.coeff * it->second;
            }
            m(i, j) = s;
        }
    return m;
}

std::uint32_t max_half_degree(const PopProblem &p) {
    std::uint32_t m = 0;
    for (auto &h : p.zero) m = std::max(m, half_degree(h.degree()));
    for (auto &g : p.nonneg) m = std::max(m, half_degree(g.degree()));
    for (auto &G : p.psd) m = std::max(m, half_degree(G.degree()));
    return m;
}

// c - a * sum |z_i|^2 with c, a > 0
bool is_ball(const Polynomial &g) {
    const auto &sp = g.space();
    if (g.size() != sp.n() + 1) return false;
    if (g.coefficient(MonomialId{}).real() <= 0.0) return false;
    const Coeff a = g.coefficient(mul(variable_id(0, sp), variable_id(0, sp, true), sp));
    if (a.imag() != 0.0 || a.real() >= 0.0) return false;
    for (std::size_t i = 1; i < sp.n(); ++i)
        if (g.coefficient(mul(variable_id(i, sp), variable_id(i, sp, true), sp)) != a) return false;
    return true;
}

} // namespace

OptimizationResult optimize(Relaxation relaxation, const SolverSettings &settings) {
    OptimizationResult r{std::move(relaxation), {}, {}, {}};
    r.solution = solve_relaxation(r.relaxation, settings);
    if (has_solution(r.solution)) {
        r.moments = r.relaxation.moments(r.solution);
        r.grams = r.relaxation.grams(r.solution);
        r.bound = r.relaxation.bound(r.solution);
    }
    return r;
}

OptimizationResult optimize(const PopProblem &problem, const Groupings &groupings, std::uint32_t d,
                            const OptimizeOptions &options) {
    if (options.representation != Representation::psd || options.form == Form::sos)
        return optimize(build_sos(problem, groupings, d, options.representation, options.rotations), options.solver);
    return optimize(build_moment(problem, groupings, d), options.solver);
}

std::optional<MatrixXcd> moment_matrix(const VariableSpace &space, const MomentVector &y, std::uint32_t t) {
    return localizing(space, y, t, Polynomial::constant(space, 1.0));
}

std::size_t numeric_rank(const MatrixXcd &hermitian, double tol) {
    if (hermitian.size() == 0) return 0;
    auto ev = hermitian_eigenvalues(hermitian);
    const double top = ev(ev.size() - 1);
    if (top <= 0.0) return 0;
    return static_cast<std::size_t>((ev.array() > tol * top).count());
}

std::string to_string(Optimality o) { return o == Optimality::optimal ? "Optimal" : "Unknown"; }

OptimalityReport optimality_certificate(const OptimizationResult &result, double rank_tol) {
    OptimalityReport rep;
    const auto &prob = result.problem();
    const auto &sp = prob.space;
    const std::uint32_t d = result.order();
    if (result.moments.empty()) {
        rep.diagnostics.push_back("no moment data (solver status " + to_string(result.status()) + ")");
        return rep;
    }
    std::vector<MatrixXcd> M;
    for (std::uint32_t t = 0; t <= d; ++t) {
        auto m = moment_matrix(sp, result.moments, t);
        if (!m) break;
        M.push_back(std::move(*m));
        rep.ranks.push_back(numeric_rank(M.back(), rank_tol));
    }
    if (M.size() != d + 1) {
        rep.diagnostics.push_back("the dense moment matrix of order " + std::to_string(d) +
                                  " is not available (sparse groupings)");
        return rep;
    }
    if (!is_psd(M[d], rank_tol)) {
        rep.diagnostics.push_back("moment matrix is not positive semidefinite");
        return rep;
    }
    const std::uint32_t dJ = max_half_degree(prob);

    if (!sp.is_complex()) {
        const std::uint32_t dK = std::max<std::uint32_t>(1, dJ);
        for (std::uint32_t t = dK; t <= d; ++t)
            if (rep.ranks[t] == rep.ranks[t - dK]) {
                rep.status = Optimality::optimal;
                rep.flat_order = t;
                return rep;
            }
        if (rep.ranks[d] + dK <= sp.n() + 1) {
            rep.status = Optimality::optimal;
            rep.diagnostics.push_back("rank of M_d is small against the number of variables");
            return rep;
        }
        rep.diagnostics.push_back("no flat truncation found");
        return rep;
    }

    if (std::none_of(prob.nonneg.begin(), prob.nonneg.end(), is_ball)) {
        rep.diagnostics.push_back("complex problem without a ball constraint: rank test not applicable");
        return rep;
    }
    const std::uint32_t lower = std::max(dJ, half_degree(prob.objective.degree()));
    const std::uint32_t dK = std::max<std::uint32_t>(2, dJ);
    auto var = [&](std::size_t i, bool c) { return Polynomial::variable(sp, i, c); };
    for (std::uint32_t t = lower; t <= d; ++t) {
        if (rep.ranks[t] == 1) {
            rep.status = Optimality::optimal;
            rep.flat_order = t;
            return rep;
        }
        if (t < 2 || t < dK || rep.ranks[t] != rep.ranks[t - dK]) continue;
        const std::uint32_t s = t - dK;
        bool all = true;
        for (std::size_t i = 0; i < sp.n() && all; ++i)
            for (std::size_t j = i + 1; j < sp.n() && all; ++j) {
                const Polynomial q[3] = {Polynomial::constant(sp, 1.0), var(i, true), var(j, true)};
                const std::size_t b = M[s].rows();
                MatrixXcd big(3 * b, 3 * b);
                for (int u = 0; u < 3 && all; ++u)
                    for (int v = 0; v < 3 && all; ++v) {
                        auto blk = localizing(sp, result.moments, s, q[u] * q[v].conjugate());
                        if (!blk) all = false;
                        else big.block(u * b, v * b, b, b) = *blk;
                    }
                if (all) all = is_psd(big, rank_tol);
            }
        if (all) {
            rep.status = Optimality::optimal;
            rep.flat_order = t;
            return rep;
        }
    }
    rep.diagnostics.push_back("no flat truncation found");
    return rep;
}

std::vector<double> Candidate::real() const {
    std::vector<double> r;
    for (auto &c : point) r.push_back(c.real());
    return r;
}

double solution_quality(const PopProblem &problem, std::span<const Coeff> point, double bound) {
    double q = std::abs(problem.objective.evaluate(point).real() - bound);
    for (auto &h : problem.zero) q = std::max(q, std::abs(h.evaluate(point)));
    for (auto &g : problem.nonneg) q = std::max(q, -g.evaluate(point).real());
    for (auto &G : problem.psd) {
        const auto m = G.side();
        MatrixXcd v(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) v(i, j) = G.at(i, j).evaluate(point);
        q = std::max(q, -hermitian_eigenvalues(v)(0));
    }
    return q;
}

AtomReport extract_atoms(const VariableSpace &space, const MomentVector &y, std::uint32_t d,
                         const ExtractOptions &options) {
    AtomReport rep;
    const std::size_t n = space.n();
    std::vector<MatrixXcd> M;
    std::vector<std::size_t> ranks;
    for (std::uint32_t t = 0; t <= d; ++t) {
        auto m = moment_matrix(space, y, t);
        if (!m) break;
        M.push_back(std::move(*m));
        ranks.push_back(numeric_rank(M.back(), options.rank_tol));
    }
    std::optional<std::uint32_t> flat;
    for (std::uint32_t t = static_cast<std::uint32_t>(M.size()); t-- > 1;)
        if (ranks[t] == ranks[t - 1]) {
            flat = t;
            break;
        }
    if (!flat) {
        rep.diagnostics.push_back("no pair of consecutive moment matrices with equal rank");
        return rep;
    }
    const std::uint32_t t = *flat;
    const std::size_t r = ranks[t];
    if (r == 0) {
        rep.diagnostics.push_back("moment matrix is zero");
        return rep;
    }

    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (M[t] + M[t].adjoint()));
    const auto rows = M[t].rows();
    MatrixXcd V(rows, r);
    for (std::size_t k = 0; k < r; ++k) {
        const auto col = rows - 1 - static_cast<long>(k);
        V.col(k) = es.eigenvectors().col(col) * std::sqrt(std::max(0.0, es.eigenvalues()(col)));
    }

    // greedy row pivots in graded order, restricted to degree <= t - 1
    const std::size_t lower_rows = count_upto(n, t - 1);
    const double maxnorm = V.rowwise().norm().maxCoeff();
    std::vector<std::size_t> pivots;
    MatrixXcd Q(r, 0);
    for (std::size_t i = 0; i < lower_rows && pivots.size() < r; ++i) {
        Eigen::VectorXcd v = V.row(i).transpose();
        Eigen::VectorXcd res = v - Q * (Q.adjoint() * v);
        const double nr = res.norm();
        if (nr > options.rank_tol * maxnorm) {
            pivots.push_back(i);
            Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
            Q.col(Q.cols() - 1) = res / nr;
        }
    }
    if (pivots.size() < r) {
        rep.diagnostics.push_back("rows of degree below " + std::to_string(t) + " do not span the moment matrix");
        return rep;
    }
    MatrixXcd VP(r, r);
    for (std::size_t k = 0; k < r; ++k) VP.row(k) = V.row(pivots[k]);
    MatrixXcd U = V * VP.partialPivLu().inverse();

    std::vector<MatrixXcd> N(n, MatrixXcd(r, r));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            auto row = mul(variable_id(i, space), MonomialId{pivots[j], 0}, space).plain;
            N[i].row(j) = U.row(static_cast<long>(row));
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = (N[i] * N[j] - N[j] * N[i]).norm();
            if (c > 1e-5 * std::max(1.0, N[i].norm() * N[j].norm())) {
                std::ostringstream os;
                os << "multiplication matrices do not commute (" << c << ")";
                rep.diagnostics.push_back(os.str());
                return rep;
            }
        }

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> lambda(n);
    double total = 0.0;
    for (auto &l : lambda) total += (l = unif(rng));
    MatrixXcd comb = MatrixXcd::Zero(r, r);
    for (std::size_t i = 0; i < n; ++i) comb += (lambda[i] / total) * N[i];
    Eigen::ComplexSchur<MatrixXcd> schur(comb);
    const MatrixXcd &Z = schur.matrixU();
    for (std::size_t j = 0; j < r; ++j) {
        std::vector<Coeff> atom(n);
        for (std::size_t i = 0; i < n; ++i) {
            Coeff v = Z.col(j).dot(N[i] * Z.col(j));
            atom[i] = space.is_complex() ? v : Coeff(v.real(), 0.0);
        }
        rep.atoms.push_back(std::move(atom));
    }
    rep.order = t;
    return rep;
}

Extraction extract_solutions(const OptimizationResult &result, const ExtractOptions &options) {
    Extraction ex;
    const auto &prob = result.problem();
    if (result.moments.empty()) {
        ex.diagnostics.push_back("no moment data");
        return ex;
    }
    auto atoms = extract_atoms(prob.space, result.moments, result.order(), options);
    ex.diagnostics = atoms.diagnostics;
    if (atoms.ok()) {
        for (auto &a : atoms.atoms) ex.solutions.push_back({a, solution_quality(prob, a, result.bound)});
        return ex;
    }
    if (!options.heuristic_fallback) return ex;
    ex.heuristic = true;
    ex.diagnostics.push_back("falling back to the heuristic extraction");
    auto it = extract_heuristic(result);
    for (int k = 0; k < 64; ++k) {
        auto p = it.next();
        if (!p) break;
        ex.solutions.push_back({*p, solution_quality(prob, *p, result.bound)});
    }
    std::stable_sort(ex.solutions.begin(), ex.solutions.end(),
                     [](const Candidate &a, const Candidate &b) { return a.quality < b.quality; });
    return ex;
}

// ---------------------------------------------------------------------------
// heuristic

HeuristicSolutions::HeuristicSolutions(const VariableSpace &space, const MomentVector &y) : space_(space) {
    std::vector<std::pair<MonomialId, Coeff>> sorted;
    double scale = 1.0;
    for (auto &[m, v] : y) {
        if (m.is_one()) continue;
        if (space.is_complex() && m.plain < m.conj) continue; // the conjugate moment carries the same data
        sorted.emplace_back(m, v);
        scale = std::max(scale, std::abs(v));
    }
    std::sort(sorted.begin(), sorted.end(), [&](auto &a, auto &b) {
        auto da = degree(a.first, space), db = degree(b.first, space);
        return da != db ? da < db : a.first < b.first;
    });
    for (auto &[m, v] : sorted) moments_.emplace_back(decode(m, space), v);
    tol_ = 1e-7 * scale;
    Partial root;
    root.magnitude.resize(space.n());
    root.phase.resize(space.n());
    stack_.push_back(std::move(root));
}

bool HeuristicSolutions::propagate(Partial &p) const {
    const std::size_t n = space_.n();
    const bool cx = space_.is_complex();
    auto a_of = [](const ExponentKey &k, std::size_t i) { return k.plain[i]; };
    auto b_of = [](const ExponentKey &k, std::size_t i) { return k.conj.empty() ? 0u : k.conj[i]; };
    // exponent of the phase of variable i (sign exponent mod 2 for real spaces)
    auto phase_exp = [&](const ExponentKey &k, std::size_t i) -> int {
        int e = static_cast<int>(a_of(k, i)) - static_cast<int>(b_of(k, i));
        return cx ? e : (e % 2);
    };

    // magnitude from a moment in which i is the only variable of unknown size
    auto magnitudes = [&](bool even_only) {
        bool changed = false;
        for (auto &[k, v] : moments_) {
            std::optional<std::size_t> unknown;
            bool several = false, other_zero = false;
            double known = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto e = a_of(k, i) + b_of(k, i);
                if (!e) continue;
                if (!p.magnitude[i]) {
                    several = several || unknown.has_value();
                    unknown = i;
                } else if (*p.magnitude[i] == 0.0) other_zero = true;
                else known *= std::pow(*p.magnitude[i], e);
            }
            if (!unknown || several || other_zero) continue;
            const std::size_t i = *unknown;
            const auto e = a_of(k, i) + b_of(k, i);
            const bool even = phase_exp(k, i) == 0;
            if (even_only && !even) continue;
            if (std::abs(v) <= tol_) {
                p.magnitude[i] = 0.0;
                p.phase[i] = 1.0;
                changed = true;
                if (!even_only) return true;
                continue;
            }
            bool pure = true;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && a_of(k, j) + b_of(k, j)) pure = false;
            if (even && pure && (v.real() < 0 || std::abs(v.imag()) > tol_)) continue; // negative even power
            p.magnitude[i] = std::pow(std::abs(v) / known, 1.0 / e);
            changed = true;
            if (!even_only) return true;
        }
        return changed;
    };

    auto phases = [&]() {
        bool changed = false;
        for (auto &[k, v] : moments_) {
            if (std::abs(v) <= tol_) continue;
            std::optional<std::size_t> unknown;
            bool several = false, blocked = false;
            Coeff known = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!(a_of(k, i) + b_of(k, i))) continue;
                if (!p.magnitude[i] || *p.magnitude[i] == 0.0) blocked = true;
                const int e = phase_exp(k, i);
                if (!e) continue;
                if (!p.phase[i]) {
                    several = several || unknown.has_value();
                    unknown = i;
                } else known *= std::pow(*p.phase[i], e);
            }
            if (blocked || !unknown || several) continue;
            const std::size_t i = *unknown;
            const int e = phase_exp(k, i);
            const Coeff target = (v / std::abs(v)) / known;
            if (!cx) p.phase[i] = target.real() >= 0 ? 1.0 : -1.0;
            else if (e == 1) p.phase[i] = target / std::abs(target);
            else if (e == -1) p.phase[i] = std::conj(target) / std::abs(target);
            else continue;
            changed = true;
        }
        return changed;
    };

    for (;;) {
        if (magnitudes(true)) continue;
        if (phases()) continue;
        if (magnitudes(false)) continue;
        break;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!p.magnitude[i] || !p.phase[i]) return false;
    return true;
}

std::optional<std::vector<Coeff>> HeuristicSolutions::next() {
    const std::size_t n = space_.n();
    while (!stack_.empty()) {
        Partial p = std::move(stack_.back());
        stack_.pop_back();
        propagate(p);
        for (std::size_t i = 0; i < n; ++i)
            if (!p.magnitude[i]) p.magnitude[i] = 0.0; // no information at all
        std::optional<std::size_t> open;
        for (std::size_t i = 0; i < n && !open; ++i) {
            if (*p.magnitude[i] == 0.0) p.phase[i] = 1.0;
            else if (!p.phase[i]) open = i;
        }
        if (!open) {
            std::vector<Coeff> z(n);
            for (std::size_t i = 0; i < n; ++i) z[i] = *p.magnitude[i] * *p.phase[i];
            return z;
        }
        const std::size_t i = *open;
        std::vector<Coeff> choices;
        if (!space_.is_complex()) choices = {1.0, -1.0};
        else {
            // a moment fixing phase_i^e for some |e| > 1 yields e candidate roots
            for (auto &[k, v] : moments_) {
                if (std::abs(v) <= tol_) continue;
                const int e = static_cast<int>(k.plain[i]) - static_cast<int>(k.conj[i]);
                if (e == 0) continue;
                bool ok = true;
                Coeff known = 1.0;
                for (std::size_t j = 0; j < n && ok; ++j) {
                    if (j == i || !(k.plain[j] + k.conj[j])) continue;
                    const int ej = static_cast<int>(k.plain[j]) - static_cast<int>(k.conj[j]);
                    if (!p.magnitude[j] || *p.magnitude[j] == 0.0 || (ej && !p.phase[j])) ok = false;
                    else if (ej) known *= std::pow(*p.phase[j], ej);
                }
                if (!ok) continue;
                Coeff target = (v / std::abs(v)) / known;
                if (e < 0) target = std::conj(target);
                const int m = std::abs(e);
                const double base = std::arg(target) / m;
                for (int r = 0; r < m; ++r) choices.push_back(std::polar(1.0, base + 2.0 * std::numbers::pi * r / m));
                break;
            }
            if (choices.empty()) choices = {1.0}; // global phase left arbitrary
        }
        for (auto it = choices.rbegin(); it != choices.rend(); ++it) {
            Partial q = p;
            q.phase[i] = *it;
            stack_.push_back(std::move(q));
        }
    }
    return std::nullopt;
}

HeuristicSolutions extract_heuristic(const OptimizationResult &result) {
    return HeuristicSolutions(result.problem().space, result.moments);
}

// ---------------------------------------------------------------------------
// SOS certificates

std::string SosCertificate::to_string(const std::vector<std::string> &names) const {
    std::ostringstream os;
    os.precision(10);
    os << "p - " << bound << " =\n";
    for (auto &b : blocks) {
        const bool one = b.multiplier.size() == 1 && b.multiplier.terms()[0].id.is_one() &&
                         b.multiplier.terms()[0].coeff == Coeff(1.0);
        for (auto &sq : b.squares) {
            os << "  + ";
            if (!one) os << '(' << polyopt::to_string(b.multiplier, names, 10) << ") * ";
            if (sq.q.size() == 1) os << '(' << polyopt::to_string(sq.q[0], names, 10) << ")^2\n";
            else {
                os << "[";
                for (std::size_t i = 0; i < sq.q.size(); ++i)
                    os << (i ? ", " : "") << polyopt::to_string(sq.q[i], names, 10);
                os << "]^T G [...]\n";
            }
        }
    }
    for (auto &[m, h] : equality_terms)
        os << "  + (" << polyopt::to_string(m, names, 10) << ") * (" << polyopt::to_string(h, names, 10) << ")\n";
    os << "residual norm " << residual_norm << '\n';
    return os.str();
}

SosCertificate sos_certificate(const OptimizationResult &result, double tol) {
    const auto &rel = result.relaxation;
    const auto &prob = rel.problem;
    const auto &sp = prob.space;
    if (sp.is_complex()) throw std::invalid_argument("SOS certificates are produced for real problems only");
    if (!has_solution(result.solution)) throw std::invalid_argument("no solution to build a certificate from");
    SosCertificate cert;
    cert.space = sp;
    std::vector<MatrixXd> grams;
    std::vector<Polynomial> eq_mult(prob.zero.size(), Polynomial(sp));
    if (rel.form == Form::sos) {
        cert.bound = result.solution.x.at(rel.bound_var);
        grams = rel.grams(result.solution);
        for (auto &z : rel.zero_terms)
            eq_mult[z.constraint] += Polynomial::monomial(sp, z.multiplier, result.solution.x.at(z.index));
    } else {
        cert.bound = result.solution.dual_objective;
        grams = rel.grams(result.solution);
        for (auto &z : rel.zero_terms)
            if (z.part == 0)
                eq_mult[z.constraint] += Polynomial::monomial(sp, z.multiplier, result.solution.y.at(z.index) * z.sign);
    }
    cert.target = prob.objective - Polynomial::constant(sp, cert.bound);
    Polynomial expansion(sp);

    for (std::size_t k = 0; k < rel.blocks.size(); ++k) {
        const auto &ref = rel.blocks[k];
        CertificateBlock blk{ref, Polynomial::constant(sp, 1.0), {}};
        if (ref.kind == BlockRef::Kind::nonneg) blk.multiplier = prob.nonneg[ref.constraint];
        const PolyMatrix *G = ref.kind == BlockRef::Kind::psd ? &prob.psd[ref.constraint] : nullptr;
        const std::size_t m = ref.matrix_side;
        MatrixXd g = 0.5 * (grams[k] + grams[k].transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
        const auto &ev = es.eigenvalues();
        const double top = std::max(1.0, ev(ev.size() - 1));
        if (ev(0) < -tol * top) {
            std::ostringstream os;
            os << "Gram block " << k << " is indefinite: eigenvalue " << ev(0);
            throw CertificateError(os.str(), ev(0));
        }
        for (long e = ev.size() - 1; e >= 0; --e) {
            if (ev(e) <= tol * top) break; // numerically zero
            const double w = std::sqrt(ev(e));
            SquareTerm sq{std::vector<Polynomial>(m, Polynomial(sp))};
            for (std::size_t a = 0; a < ref.side(); ++a)
                if (double c = w * es.eigenvectors()(static_cast<long>(a), e); c != 0.0)
                    sq.q[a % m] += Polynomial::monomial(sp, ref.basis[a / m], c);
            if (G) {
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t s = 0; s < m; ++s) expansion += sq.q[r] * sq.q[s] * G->at(r, s);
            } else expansion += sq.q[0] * sq.q[0] * blk.multiplier;
            blk.squares.push_back(std::move(sq));
        }
        cert.blocks.push_back(std::move(blk));
    }
    for (std::size_t c = 0; c < prob.zero.size(); ++c) {
        if (eq_mult[c].is_zero()) continue;
        expansion += eq_mult[c] * prob.zero[c];
        cert.equality_terms.emplace_back(eq_mult[c], prob.zero[c]);
    }
    cert.residual = expansion - cert.target;
    for (auto &t : cert.residual.terms()) cert.residual_norm = std::max(cert.residual_norm, std::abs(t.coeff));
    return cert;
}

} // namespace polyopt
