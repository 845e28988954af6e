#include "polyopt/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace polyopt {

std::vector<std::size_t> ConicProgram::cone_offsets() const {
    std::vector<std::size_t> off;
    std::size_t o = 0;
    for (auto &k : cones) {
        off.push_back(o);
        o += k.size();
    }
    return off;
}

std::size_t ConicProgram::add_cone(const Cone &k) {
    std::size_t off = c.size();
    cones.push_back(k);
    c.resize(off + k.size(), 0.0);
    return off;
}

std::size_t ConicProgram::add_row(double rhs) {
    b.push_back(rhs);
    return rows++;
}

void ConicProgram::canonicalize() {
    std::sort(a.begin(), a.end(), [](const Triplet &x, const Triplet &y) {
        return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
    std::vector<Triplet> out;
    out.reserve(a.size());
    for (auto &t : a) {
        if (!out.empty() && out.back().row == t.row && out.back().col == t.col) out.back().value += t.value;
        else out.push_back(t);
    }
    std::erase_if(out, [](const Triplet &t) { return t.value == 0.0; });
    a = std::move(out);
}

Eigen::VectorXd svec(const Eigen::MatrixXd &m) {
    const auto s = static_cast<std::size_t>(m.rows());
    Eigen::VectorXd v(s * (s + 1) / 2);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j <= i; ++j) v(svec_index(i, j)) = m(i, j) * svec_scale(i, j);
    return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd> &v, std::size_t side) {
    Eigen::MatrixXd m(side, side);
    for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = v(svec_index(i, j)) / svec_scale(i, j);
    return m;
}

std::string to_string(Status s) {
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::primal_infeasible: return "primal-infeasible";
    case Status::dual_infeasible: return "dual-infeasible";
    case Status::limit_feasible_suspect: return "limit-feasible-suspect";
    case Status::iteration_limit: return "iteration-limit";
    }
    return "unknown";
}

namespace detail {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, long>;

namespace {

struct Block {
    ConeKind kind;
    std::size_t off, len, side;
};

struct SvecEntry {
    std::size_t p, q;
    double a; // coefficient of the scaled vector entry
};

struct RowEntries {
    std::size_t row;
    std::vector<SvecEntry> entries;
};

struct Scaling {
    Vec w;         // nonneg
    Mat W, Winv;   // soc (symmetric)
    Mat R, Rinv;   // psd
    Mat Wnt;       // psd: R R^T
    Vec lam;       // nonneg/soc: lambda; psd: eigenvalue diagonal
};

constexpr double kSqrt2 = 1.4142135623730951;

double soc_det(const Eigen::Ref<const Vec> &v) { return v(0) * v(0) - v.tail(v.size() - 1).squaredNorm(); }

// Largest alpha with v + alpha d in the second-order cone, v interior.
double soc_step(const Eigen::Ref<const Vec> &v, const Eigen::Ref<const Vec> &d) {
    const auto k = v.size() - 1;
    double a = d(0) * d(0) - d.tail(k).squaredNorm();
    double bb = v(0) * d(0) - v.tail(k).dot(d.tail(k));
    double c = soc_det(v);
    double inf = std::numeric_limits<double>::infinity();
    double best = inf;
    auto consider = [&](double r) {
        if (r > 0 && r < best) best = r;
    };
    if (std::abs(a) < 1e-300) {
        if (bb < 0) consider(-c / (2 * bb));
    } else {
        double disc = bb * bb - a * c;
        if (disc >= 0) {
            double sq = std::sqrt(disc);
            double qq = -(bb + (bb >= 0 ? sq : -sq));
            if (qq != 0) {
                consider(qq / a);
                consider(c / qq);
            } else {
                consider(-bb / a);
            }
        }
    }
    if (d(0) < 0) consider(-v(0) / d(0));
    return best;
}

} // namespace

class Engine {
public:
    explicit Engine(const ConicProgram &p);

    Solution run(const SolverSettings &st);

    void set_rhs(const std::vector<double> &b) {
        if (b.size() != m_) throw std::invalid_argument("right-hand side has the wrong length");
        b_ = row_scale_.cwiseProduct(Eigen::Map<const Vec>(b.data(), static_cast<long>(b.size())));
    }
    void set_objective(const std::vector<double> &c) {
        if (c.size() != n_) throw std::invalid_argument("objective has the wrong length");
        c_ = Eigen::Map<const Vec>(c.data(), static_cast<long>(c.size()));
    }
    void set_coefficient(std::size_t row, std::size_t col, double v) {
        if (row >= m_ || col >= n_) throw std::out_of_range("coefficient outside the program");
        for (SpMat::InnerIterator it(A_, static_cast<long>(col)); it; ++it)
            if (static_cast<std::size_t>(it.row()) == row) {
                it.valueRef() = v * row_scale_(it.row());
                rebuild_structure();
                return;
            }
        throw std::invalid_argument("coefficient is not part of the constraint pattern");
    }
    bool pure_lp() const {
        return std::all_of(blocks_.begin(), blocks_.end(),
                           [](const Block &b) { return b.kind == ConeKind::free || b.kind == ConeKind::nonneg; });
    }

private:
    void rebuild_structure();
    bool compute_scaling(const Vec &x, const Vec &s);
    Vec apply_W(const Vec &v) const;    // primal scaling
    Vec apply_Winv(const Vec &v) const;
    Vec apply_Winvt(const Vec &v) const; // dual scaling W^{-T}
    Vec apply_Wt(const Vec &v) const;
    Vec apply_Hinv(const Vec &v) const;
    Vec jordan(const Vec &u, const Vec &v) const;
    Vec lam_div(const Vec &r) const;
    Vec lam_vec() const;
    Vec identity() const;
    double max_step(const Vec &dscaled) const;
    void assemble_kkt();
    void solve_kkt(const Vec &fC, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const;
    void solve_reduced(const Vec &fc, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const;
    void solve_reduced_qr(const Vec &fc, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const;
    bool assemble_qr();
    void zero_free(Vec &v) const {
        for (auto i : free_idx_) v(static_cast<long>(i)) = 0.0;
    }

    std::size_t m_ = 0, n_ = 0;
    SpMat A_;
    Vec b_, c_;
    Vec row_scale_; // rows are stored divided by their Euclidean norm
    double offset_ = 0.0;
    std::vector<Block> blocks_;
    std::vector<std::size_t> free_idx_;
    double nu_ = 0.0;
    std::vector<std::vector<RowEntries>> psd_rows_; // per block index
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> psd_pq_;
    Mat AF_; // dense free columns

    std::vector<Scaling> sc_;
    Mat K_;
    Eigen::PartialPivLU<Mat> lu_;
    double reg_ = 0.0;
    // Orthogonal factorization of [A F; sqrt(reg) I]^T with H^{-1} = F F^T. It avoids forming
    // A H^{-1} A^T, whose condition number squares that of A F near the optimum.
    bool use_qr_ = false;
    Eigen::HouseholderQR<Mat> qr_;
    Mat qr_r_;                    // m x m upper triangle
    Mat qr_z_;                    // R^{-T} A_F
    Eigen::PartialPivLU<Mat> qr_zz_; // Z^T Z
};

Engine::Engine(const ConicProgram &p) {
    m_ = p.rows;
    n_ = p.num_vars();
    if (p.b.size() != m_) throw std::invalid_argument("right-hand side length does not match row count");
    std::size_t total = 0;
    for (auto &k : p.cones) total += k.size();
    if (total != n_) throw std::invalid_argument("cone sizes do not match the variable count");
    std::vector<Eigen::Triplet<double, long>> trip;
    trip.reserve(p.a.size());
    for (auto &t : p.a) {
        if (t.row >= m_ || t.col >= n_) throw std::invalid_argument("constraint entry outside the program");
        trip.emplace_back(static_cast<long>(t.row), static_cast<long>(t.col), t.value);
    }
    A_.resize(static_cast<long>(m_), static_cast<long>(n_));
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();
    row_scale_ = Vec::Ones(static_cast<long>(m_));
    {
        Vec nr = Vec::Zero(static_cast<long>(m_));
        for (long k = 0; k < A_.outerSize(); ++k)
            for (SpMat::InnerIterator it(A_, k); it; ++it) nr(it.row()) += it.value() * it.value();
        for (long i = 0; i < static_cast<long>(m_); ++i)
            if (nr(i) > 0) row_scale_(i) = 1.0 / std::sqrt(nr(i));
    }
    A_ = row_scale_.asDiagonal() * A_;
    A_.makeCompressed();
    b_ = row_scale_.cwiseProduct(Eigen::Map<const Vec>(p.b.data(), static_cast<long>(m_)));
    c_ = Eigen::Map<const Vec>(p.c.data(), static_cast<long>(n_));
    offset_ = p.offset;
    std::size_t off = 0;
    for (auto &k : p.cones) {
        if (k.kind == ConeKind::soc && k.dim < 1) throw std::invalid_argument("empty second-order cone");
        blocks_.push_back({k.kind, off, k.size(), k.dim});
        if (k.kind == ConeKind::free)
            for (std::size_t i = 0; i < k.size(); ++i) free_idx_.push_back(off + i);
        else if (k.kind == ConeKind::nonneg) nu_ += static_cast<double>(k.dim);
        else if (k.kind == ConeKind::soc) nu_ += 1.0;
        else nu_ += static_cast<double>(k.dim);
        off += k.size();
    }
    rebuild_structure();
}

void Engine::rebuild_structure() {
    psd_rows_.assign(blocks_.size(), {});
    psd_pq_.assign(blocks_.size(), {});
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        if (blk.kind != ConeKind::psd) continue;
        auto &pq = psd_pq_[bi];
        pq.resize(blk.len);
        for (std::size_t i = 0; i < blk.side; ++i)
            for (std::size_t j = 0; j <= i; ++j) pq[svec_index(i, j)] = {i, j};
        std::map<std::size_t, std::vector<SvecEntry>> rows;
        for (std::size_t k = 0; k < blk.len; ++k)
            for (SpMat::InnerIterator it(A_, static_cast<long>(blk.off + k)); it; ++it)
                rows[static_cast<std::size_t>(it.row())].push_back({pq[k].first, pq[k].second, it.value()});
        for (auto &[r, e] : rows) psd_rows_[bi].push_back({r, std::move(e)});
    }
    AF_ = Mat::Zero(static_cast<long>(m_), static_cast<long>(free_idx_.size()));
    for (std::size_t f = 0; f < free_idx_.size(); ++f)
        for (SpMat::InnerIterator it(A_, static_cast<long>(free_idx_[f])); it; ++it)
            AF_(it.row(), static_cast<long>(f)) = it.value();
}

Vec Engine::identity() const {
    Vec e = Vec::Zero(static_cast<long>(n_));
    for (auto &blk : blocks_) {
        auto o = static_cast<long>(blk.off);
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: e.segment(o, static_cast<long>(blk.len)).setOnes(); break;
        case ConeKind::soc: e(o) = 1.0; break;
        case ConeKind::psd:
            for (std::size_t i = 0; i < blk.side; ++i) e(o + static_cast<long>(svec_index(i, i))) = 1.0;
            break;
        }
    }
    return e;
}

bool Engine::compute_scaling(const Vec &x, const Vec &s) {
    sc_.assign(blocks_.size(), {});
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: {
            Vec xs = x.segment(o, len), ss = s.segment(o, len);
            if ((xs.array() <= 0).any() || (ss.array() <= 0).any()) return false;
            S.w = (ss.array() / xs.array()).sqrt();
            S.lam = (xs.array() * ss.array()).sqrt();
            break;
        }
        case ConeKind::soc: {
            Vec xv = x.segment(o, len), sv = s.segment(o, len);
            double dx = soc_det(xv), ds = soc_det(sv);
            if (dx <= 0 || ds <= 0 || xv(0) <= 0 || sv(0) <= 0) return false;
            Vec xb = xv / std::sqrt(dx), sb = sv / std::sqrt(ds);
            double gamma = std::sqrt((1.0 + xb.dot(sb)) / 2.0);
            Vec Jsb = sb;
            Jsb.tail(len - 1) *= -1.0;
            Vec wb = (xb + Jsb) / (2.0 * gamma);
            double eta = std::pow(dx / ds, 0.25);
            const long k = len - 1;
            // We maps s to lambda; its inverse maps x to lambda.
            Mat We(len, len), Wi(len, len);
            double w0 = wb(0);
            Vec w1 = wb.tail(k);
            We(0, 0) = w0;
            We.block(0, 1, 1, k) = w1.transpose();
            We.block(1, 0, k, 1) = w1;
            We.block(1, 1, k, k) = Mat::Identity(k, k) + w1 * w1.transpose() / (1.0 + w0);
            Wi = We;
            Wi.block(0, 1, 1, k) *= -1.0;
            Wi.block(1, 0, k, 1) *= -1.0;
            We *= eta;
            Wi /= eta;
            S.W = Wi;
            S.Winv = We;
            S.lam = S.W * xv;
            break;
        }
        case ConeKind::psd: {
            const auto side = static_cast<long>(blk.side);
            Mat X = smat(x.segment(o, len), blk.side), Sm = smat(s.segment(o, len), blk.side);
            Eigen::LLT<Mat> lx(X), ls(Sm);
            if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) return false;
            Mat L = lx.matrixL(), Ls = ls.matrixL();
            Eigen::JacobiSVD<Mat> svd(Ls.transpose() * L, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Vec d = svd.singularValues();
            if ((d.array() <= 0).any()) return false;
            Vec dis = d.array().rsqrt();
            S.R = L * svd.matrixV() * dis.asDiagonal();
            S.Rinv = dis.asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
            S.Wnt = S.R * S.R.transpose();
            S.lam = d;
            (void)side;
            break;
        }
        }
    }
    return true;
}

Vec Engine::apply_W(const Vec &v) const {
    Vec r = Vec::Zero(v.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = S.w.array() * v.segment(o, len).array(); break;
        case ConeKind::soc: r.segment(o, len) = S.W * v.segment(o, len); break;
        case ConeKind::psd: {
            Mat V = smat(v.segment(o, len), blk.side);
            r.segment(o, len) = svec(S.Rinv * V * S.Rinv.transpose());
            break;
        }
        }
    }
    return r;
}

Vec Engine::apply_Winv(const Vec &v) const {
    Vec r = Vec::Zero(v.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = v.segment(o, len).array() / S.w.array(); break;
        case ConeKind::soc: r.segment(o, len) = S.Winv * v.segment(o, len); break;
        case ConeKind::psd: {
            Mat V = smat(v.segment(o, len), blk.side);
            r.segment(o, len) = svec(S.R * V * S.R.transpose());
            break;
        }
        }
    }
    return r;
}

Vec Engine::apply_Winvt(const Vec &v) const {
    Vec r = Vec::Zero(v.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = v.segment(o, len).array() / S.w.array(); break;
        case ConeKind::soc: r.segment(o, len) = S.Winv * v.segment(o, len); break;
        case ConeKind::psd: {
            Mat V = smat(v.segment(o, len), blk.side);
            r.segment(o, len) = svec(S.R.transpose() * V * S.R);
            break;
        }
        }
    }
    return r;
}

Vec Engine::apply_Wt(const Vec &v) const {
    Vec r = Vec::Zero(v.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = S.w.array() * v.segment(o, len).array(); break;
        case ConeKind::soc: r.segment(o, len) = S.W * v.segment(o, len); break;
        case ConeKind::psd: {
            Mat V = smat(v.segment(o, len), blk.side);
            r.segment(o, len) = svec(S.Rinv.transpose() * V * S.Rinv);
            break;
        }
        }
    }
    return r;
}

Vec Engine::apply_Hinv(const Vec &v) const {
    Vec r = Vec::Zero(v.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = v.segment(o, len).array() / S.w.array().square(); break;
        case ConeKind::soc: r.segment(o, len) = S.Winv * (S.Winv * v.segment(o, len)); break;
        case ConeKind::psd: {
            Mat V = smat(v.segment(o, len), blk.side);
            r.segment(o, len) = svec(S.Wnt * V * S.Wnt);
            break;
        }
        }
    }
    return r;
}

Vec Engine::jordan(const Vec &u, const Vec &v) const {
    Vec r = Vec::Zero(u.size());
    for (const auto &blk : blocks_) {
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: r.segment(o, len) = u.segment(o, len).array() * v.segment(o, len).array(); break;
        case ConeKind::soc: {
            auto us = u.segment(o, len), vs = v.segment(o, len);
            r(o) = us.dot(vs);
            r.segment(o + 1, len - 1) = us(0) * vs.tail(len - 1) + vs(0) * us.tail(len - 1);
            break;
        }
        case ConeKind::psd: {
            Mat U = smat(u.segment(o, len), blk.side), V = smat(v.segment(o, len), blk.side);
            Mat P = U * V;
            r.segment(o, len) = svec(0.5 * (P + P.transpose()));
            break;
        }
        }
    }
    return r;
}

Vec Engine::lam_div(const Vec &rv) const {
    Vec z = Vec::Zero(rv.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &lam = sc_[bi].lam;
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg: z.segment(o, len) = rv.segment(o, len).array() / lam.array(); break;
        case ConeKind::soc: {
            auto r = rv.segment(o, len);
            const long k = len - 1;
            double det = soc_det(lam);
            double z0 = (lam(0) * r(0) - lam.tail(k).dot(r.tail(k))) / det;
            z(o) = z0;
            z.segment(o + 1, k) = (r.tail(k) - z0 * lam.tail(k)) / lam(0);
            break;
        }
        case ConeKind::psd:
            for (std::size_t idx = 0; idx < blk.len; ++idx) {
                auto [p, q] = psd_pq_[bi][idx];
                z(o + static_cast<long>(idx)) =
                    2.0 * rv(o + static_cast<long>(idx)) / (lam(static_cast<long>(p)) + lam(static_cast<long>(q)));
            }
            break;
        }
    }
    return z;
}

Vec Engine::lam_vec() const {
    Vec l = Vec::Zero(static_cast<long>(n_));
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg:
        case ConeKind::soc: l.segment(o, static_cast<long>(blk.len)) = sc_[bi].lam; break;
        case ConeKind::psd:
            for (std::size_t i = 0; i < blk.side; ++i)
                l(o + static_cast<long>(svec_index(i, i))) = sc_[bi].lam(static_cast<long>(i));
            break;
        }
    }
    return l;
}

double Engine::max_step(const Vec &d) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        auto o = static_cast<long>(blk.off);
        auto len = static_cast<long>(blk.len);
        const auto &lam = sc_[bi].lam;
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg:
            for (long i = 0; i < len; ++i)
                if (d(o + i) < 0) alpha = std::min(alpha, -lam(i) / d(o + i));
            break;
        case ConeKind::soc: alpha = std::min(alpha, soc_step(lam, d.segment(o, len))); break;
        case ConeKind::psd: {
            Mat D = smat(d.segment(o, len), blk.side);
            Vec is = lam.array().rsqrt();
            Mat T = is.asDiagonal() * D * is.asDiagonal();
            Eigen::SelfAdjointEigenSolver<Mat> es(T, Eigen::EigenvaluesOnly);
            double mn = es.eigenvalues()(0);
            if (mn < 0) alpha = std::min(alpha, -1.0 / mn);
            break;
        }
        }
    }
    return alpha;
}

bool Engine::assemble_qr() {
    const long m = static_cast<long>(m_);
    const long n = static_cast<long>(n_);
    const long nf = static_cast<long>(free_idx_.size());
    if (m == 0) return false;
    // Rows of G are F^T a_i, so G G^T = A H^{-1} A^T.
    Mat G = Mat::Zero(m, n);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        const auto &S = sc_[bi];
        const long o = static_cast<long>(blk.off);
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg:
            for (std::size_t k = 0; k < blk.len; ++k) {
                const long col = o + static_cast<long>(k);
                for (SpMat::InnerIterator it(A_, col); it; ++it) G(it.row(), col) = it.value() / S.w(static_cast<long>(k));
            }
            break;
        case ConeKind::soc: {
            const long len = static_cast<long>(blk.len);
            Mat Ab = Mat::Zero(m, len);
            for (long k = 0; k < len; ++k)
                for (SpMat::InnerIterator it(A_, o + k); it; ++it) Ab(it.row(), k) = it.value();
            G.middleCols(o, len) = Ab * S.Winv;
            break;
        }
        case ConeKind::psd: {
            const auto side = static_cast<long>(blk.side);
            const Mat &R = S.R;
            for (const auto &ri : psd_rows_[bi]) {
                Mat C;
                if (ri.entries.size() > 2 * blk.side) {
                    Mat Ai = Mat::Zero(side, side);
                    for (auto &e : ri.entries) {
                        if (e.p == e.q) Ai(static_cast<long>(e.p), static_cast<long>(e.p)) += e.a;
                        else {
                            Ai(static_cast<long>(e.p), static_cast<long>(e.q)) += e.a / kSqrt2;
                            Ai(static_cast<long>(e.q), static_cast<long>(e.p)) += e.a / kSqrt2;
                        }
                    }
                    C = R.transpose() * Ai * R;
                } else {
                    C = Mat::Zero(side, side);
                    for (auto &e : ri.entries) {
                        auto p = static_cast<long>(e.p), q = static_cast<long>(e.q);
                        if (p == q) C.noalias() += e.a * R.row(p).transpose() * R.row(p);
                        else {
                            C.noalias() += (e.a / kSqrt2) * R.row(p).transpose() * R.row(q);
                            C.noalias() += (e.a / kSqrt2) * R.row(q).transpose() * R.row(p);
                        }
                    }
                    C = 0.5 * (C + C.transpose()).eval();
                }
                G.row(static_cast<long>(ri.row)).segment(o, static_cast<long>(blk.len)) = svec(C).transpose();
            }
            break;
        }
        }
    }
    double scale = 1.0;
    for (long i = 0; i < m; ++i) scale = std::max(scale, G.row(i).squaredNorm());
    reg_ = 1e-13 * scale;
    Mat T(n + m, m);
    T.topRows(n) = G.transpose();
    T.bottomRows(m) = std::sqrt(reg_) * Mat::Identity(m, m);
    qr_.compute(T);
    qr_r_ = qr_.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    if (!qr_r_.allFinite()) return false;
    if (nf > 0) {
        qr_z_ = qr_r_.transpose().triangularView<Eigen::Lower>().solve(AF_);
        Mat zz = qr_z_.transpose() * qr_z_;
        for (long i = 0; i < nf; ++i) zz(i, i) += reg_;
        qr_zz_.compute(zz);
    }
    return true;
}

// Solves the same system as solve_reduced through the factorization of A F: with dx = F u,
// u - G^T dy = F^T fc and G u + A_F dx_F = fP.
void Engine::solve_reduced_qr(const Vec &fc, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const {
    const long m = static_cast<long>(m_);
    const long n = static_cast<long>(n_);
    const long nf = static_cast<long>(free_idx_.size());
    Vec g = Vec::Zero(n + m);
    g.head(n) = apply_Winvt(fc);
    Vec c = qr_.householderQ().transpose() * g;
    Vec xf = Vec::Zero(nf);
    Vec rhs = fP;
    if (nf > 0) {
        Vec t = qr_r_.transpose().triangularView<Eigen::Lower>().solve(fP) - c.head(m);
        xf = qr_zz_.solve(qr_z_.transpose() * t - fF);
        rhs -= AF_ * xf;
    }
    Vec a = qr_r_.transpose().triangularView<Eigen::Lower>().solve(rhs);
    dy = qr_r_.triangularView<Eigen::Upper>().solve(a - c.head(m));
    Vec coef = c;
    coef.head(m) = a;
    Vec u = qr_.householderQ() * coef;
    dx = apply_Winv(u.head(n));
    for (long f = 0; f < nf; ++f) dx(static_cast<long>(free_idx_[static_cast<std::size_t>(f)])) = xf(f);
}

void Engine::assemble_kkt() {
    const long m = static_cast<long>(m_);
    const long nf = static_cast<long>(free_idx_.size());
    {
        const double rows = static_cast<double>(n_ + m_), cols = static_cast<double>(m_);
        use_qr_ = rows * cols * cols <= 4e9 && assemble_qr();
        if (use_qr_) return;
    }
    Mat M = Mat::Zero(m, m);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto &blk = blocks_[bi];
        const auto &S = sc_[bi];
        switch (blk.kind) {
        case ConeKind::free: break;
        case ConeKind::nonneg:
            for (std::size_t k = 0; k < blk.len; ++k) {
                const long col = static_cast<long>(blk.off + k);
                double h = 1.0 / (S.w(static_cast<long>(k)) * S.w(static_cast<long>(k)));
                for (SpMat::InnerIterator i1(A_, col); i1; ++i1)
                    for (SpMat::InnerIterator i2(A_, col); i2; ++i2)
                        M(i1.row(), i2.row()) += h * i1.value() * i2.value();
            }
            break;
        case ConeKind::soc: {
            std::map<long, long> local;
            for (std::size_t k = 0; k < blk.len; ++k)
                for (SpMat::InnerIterator it(A_, static_cast<long>(blk.off + k)); it; ++it)
                    local.emplace(it.row(), 0);
            long cnt = 0;
            std::vector<long> rows;
            for (auto &[r, idx] : local) {
                idx = cnt++;
                rows.push_back(r);
            }
            Mat Ab = Mat::Zero(cnt, static_cast<long>(blk.len));
            for (std::size_t k = 0; k < blk.len; ++k)
                for (SpMat::InnerIterator it(A_, static_cast<long>(blk.off + k)); it; ++it)
                    Ab(local[it.row()], static_cast<long>(k)) = it.value();
            Mat H = S.Winv * S.Winv;
            Mat C = Ab * H * Ab.transpose();
            for (long i = 0; i < cnt; ++i)
                for (long j = 0; j < cnt; ++j) M(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]) += C(i, j);
            break;
        }
        case ConeKind::psd: {
            const auto &rows = psd_rows_[bi];
            const auto side = static_cast<long>(blk.side);
            const Mat &W = S.Wnt;
            for (const auto &rj : rows) {
                Mat B;
                if (rj.entries.size() > 2 * blk.side) {
                    Mat Aj = Mat::Zero(side, side);
                    for (auto &e : rj.entries) {
                        if (e.p == e.q) Aj(static_cast<long>(e.p), static_cast<long>(e.p)) += e.a;
                        else {
                            Aj(static_cast<long>(e.p), static_cast<long>(e.q)) += e.a / kSqrt2;
                            Aj(static_cast<long>(e.q), static_cast<long>(e.p)) += e.a / kSqrt2;
                        }
                    }
                    B = W * Aj * W;
                } else {
                    B = Mat::Zero(side, side);
                    for (auto &e : rj.entries) {
                        auto p = static_cast<long>(e.p), q = static_cast<long>(e.q);
                        if (p == q) B.noalias() += e.a * W.col(p) * W.row(p);
                        else {
                            B.noalias() += (e.a / kSqrt2) * W.col(p) * W.row(q);
                            B.noalias() += (e.a / kSqrt2) * W.col(q) * W.row(p);
                        }
                    }
                }
                const long j = static_cast<long>(rj.row);
                for (const auto &ri : rows) {
                    double v = 0.0;
                    for (auto &e : ri.entries) {
                        auto p = static_cast<long>(e.p), q = static_cast<long>(e.q);
                        v += p == q ? e.a * B(p, p) : kSqrt2 * e.a * B(p, q);
                    }
                    M(static_cast<long>(ri.row), j) += v;
                }
            }
            break;
        }
        }
    }
    M = 0.5 * (M + M.transpose()).eval();
    double scale = 1.0;
    for (long i = 0; i < m; ++i) scale = std::max(scale, std::abs(M(i, i)));
    reg_ = 1e-13 * scale;
    K_ = Mat::Zero(m + nf, m + nf);
    K_.topLeftCorner(m, m) = M;
    K_.topRightCorner(m, nf) = AF_;
    K_.bottomLeftCorner(nf, m) = AF_.transpose();
    Mat Kr = K_;
    for (long i = 0; i < m; ++i) Kr(i, i) += reg_;
    for (long i = 0; i < nf; ++i) Kr(m + i, m + i) -= reg_;
    lu_.compute(Kr);
}

void Engine::solve_reduced(const Vec &fc, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const {
    const long m = static_cast<long>(m_);
    const long nf = static_cast<long>(free_idx_.size());
    Vec t = apply_Hinv(fc);
    Vec rhs(m + nf);
    rhs.head(m) = fP - A_ * t;
    rhs.tail(nf) = fF;
    Vec z = lu_.solve(rhs);
    for (int it = 0; it < 3; ++it) {
        Vec res = rhs - K_ * z;
        if (!res.allFinite()) break;
        z += lu_.solve(res);
    }
    dy = z.head(m);
    Vec aty = A_.transpose() * dy;
    zero_free(aty);
    dx = apply_Hinv(fc + aty);
    for (long f = 0; f < nf; ++f) dx(static_cast<long>(free_idx_[static_cast<std::size_t>(f)])) = z(m + f);
}

// Solves  H dx_C - A_C^T dy = fC,  A dx = fP,  A_F^T dy = fF  with refinement on the full system.
void Engine::solve_kkt(const Vec &fC, const Vec &fF, const Vec &fP, Vec &dx, Vec &dy) const {
    const long nf = static_cast<long>(free_idx_.size());
    Vec fc = fC;
    zero_free(fc);
    auto reduced = [&](const Vec &a, const Vec &b, const Vec &c, Vec &ox, Vec &oy) {
        if (use_qr_) solve_reduced_qr(a, b, c, ox, oy);
        else solve_reduced(a, b, c, ox, oy);
    };
    reduced(fc, fF, fP, dx, dy);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 10; ++it) {
        Vec aty = A_.transpose() * dy;
        Vec r1 = fc - apply_Wt(apply_W(dx)) + aty;
        zero_free(r1);
        Vec r2 = fP - A_ * dx;
        Vec r3(nf);
        for (long f = 0; f < nf; ++f) r3(f) = fF(f) - aty(static_cast<long>(free_idx_[static_cast<std::size_t>(f)]));
        double nr = std::sqrt(std::abs(apply_Hinv(r1).dot(r1)) + r2.squaredNorm() + r3.squaredNorm());
        if (!std::isfinite(nr) || nr >= 0.9 * prev) break;
        prev = nr;
        Vec ex, ey;
        reduced(r1, r3, r2, ex, ey);
        if (!ex.allFinite() || !ey.allFinite()) break;
        dx += ex;
        dy += ey;
    }
}

Solution Engine::run(const SolverSettings &st) {
    const long m = static_cast<long>(m_);
    const long n = static_cast<long>(n_);
    const long nf = static_cast<long>(free_idx_.size());
    Vec x = identity(), s = identity(), y = Vec::Zero(m);
    double tau = 1.0, kappa = 1.0;
    const Vec e = identity();
    const Vec unscale = row_scale_.cwiseInverse();
    const double nb = unscale.cwiseProduct(b_).norm(), ncn = c_.norm();

    Solution best;
    double best_score = std::numeric_limits<double>::infinity();
    auto fill = [&](Solution &sol, const Vec &xv, const Vec &yv, const Vec &sv) {
        sol.x.assign(xv.data(), xv.data() + xv.size());
        Vec yo = row_scale_.cwiseProduct(yv);
        sol.y.assign(yo.data(), yo.data() + yo.size());
        sol.s.assign(sv.data(), sv.data() + sv.size());
    };
    int stalls = 0;
    Solution out;
    for (int iter = 0;; ++iter) {
        Vec rp = tau * b_ - A_ * x;
        Vec aty = A_.transpose() * y;
        Vec rd = tau * c_ - aty - s;
        double cx = c_.dot(x), by = b_.dot(y);
        double rg = kappa + cx - by;
        double pres = unscale.cwiseProduct(rp).norm() / tau / (1.0 + nb);
        double dres = rd.norm() / tau / (1.0 + ncn);
        double pobj = cx / tau + offset_, dobj = by / tau + offset_;
        double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        double mu = (x.dot(s) + tau * kappa) / (nu_ + 1.0);
        if (st.verbose)
            std::fprintf(stderr, "%3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e mu %.2e\n",
                         iter, pobj, dobj, pres, dres, gap, tau, kappa, mu);
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(mu)) break;
        double score = std::max({pres, dres, gap});
        if (score < best_score) {
            best_score = score;
            best.primal_objective = pobj;
            best.dual_objective = dobj;
            best.primal_residual = pres;
            best.dual_residual = dres;
            best.gap = gap;
            best.iterations = iter;
            fill(best, x / tau, y / tau, s / tau);
        }
        if (pres <= st.feas_tol && dres <= st.feas_tol && gap <= st.gap_tol) {
            out = best;
            out.status = Status::optimal;
            out.primal_objective = pobj;
            out.dual_objective = dobj;
            out.primal_residual = pres;
            out.dual_residual = dres;
            out.gap = gap;
            out.iterations = iter;
            fill(out, x / tau, y / tau, s / tau);
            return out;
        }
        if (by > 0) {
            Vec r = aty + s;
            if (r.norm() / by <= st.feas_tol) {
                out.status = Status::primal_infeasible;
                out.iterations = iter;
                out.primal_objective = std::numeric_limits<double>::infinity();
                out.dual_objective = std::numeric_limits<double>::infinity();
                fill(out, Vec::Zero(n), y / by, s / by);
                return out;
            }
        }
        if (cx < 0) {
            Vec r = unscale.cwiseProduct(A_ * x);
            if (r.norm() / (-cx) <= st.feas_tol) {
                out.status = Status::dual_infeasible;
                out.iterations = iter;
                out.primal_objective = -std::numeric_limits<double>::infinity();
                out.dual_objective = -std::numeric_limits<double>::infinity();
                fill(out, x / (-cx), Vec::Zero(m), Vec::Zero(n));
                return out;
            }
        }
        if (iter >= st.max_iterations || stalls >= 3) break;

        if (!compute_scaling(x, s)) break;
        assemble_kkt();
        const Vec lam = lam_vec();
        Vec rdC = rd, rdF(nf);
        for (long f = 0; f < nf; ++f) rdF(f) = rd(static_cast<long>(free_idx_[static_cast<std::size_t>(f)]));
        Vec cF(nf);
        for (long f = 0; f < nf; ++f) cF(f) = c_(static_cast<long>(free_idx_[static_cast<std::size_t>(f)]));

        Vec dx2, dy2;
        solve_kkt(-c_, cF, b_, dx2, dy2);

        auto direction = [&](const Vec &rc, double rtau, double eta, Vec &dx, Vec &dy, Vec &ds, double &dtau,
                             double &dkap, Vec &dcs) {
            dcs = lam_div(rc);
            Vec fC = apply_Wt(dcs) - eta * rdC;
            Vec fF = eta * rdF;
            Vec fP = eta * rp;
            Vec dx1, dy1;
            solve_kkt(fC, fF, fP, dx1, dy1);
            double num = eta * rg + rtau / tau + c_.dot(dx1) - b_.dot(dy1);
            double den = -c_.dot(dx2) + b_.dot(dy2) + kappa / tau;
            dtau = num / den;
            dx = dx1 + dtau * dx2;
            dy = dy1 + dtau * dy2;
            dkap = (rtau - kappa * dtau) / tau;
            // the dual step from the (linear) dual residual equation keeps that residual exact
            ds = eta * rd + dtau * c_ - A_.transpose() * dy;
            zero_free(ds);
        };
        auto step_len = [&](const Vec &dx, const Vec &ds, double dtau, double dkap) {
            double a = std::min(max_step(apply_W(dx)), max_step(apply_Winvt(ds)));
            if (dtau < 0) a = std::min(a, -tau / dtau);
            if (dkap < 0) a = std::min(a, -kappa / dkap);
            return a;
        };

        Vec dxa, dya, dsa, dcsa;
        double dtaua, dkapa;
        Vec rc_aff = -jordan(lam, lam);
        direction(rc_aff, -tau * kappa, 1.0, dxa, dya, dsa, dtaua, dkapa, dcsa);
        double alpha_a = std::min(1.0, step_len(dxa, dsa, dtaua, dkapa));
        double sigma = std::pow(1.0 - alpha_a, 3);
        sigma = std::clamp(sigma, 0.0, 1.0);

        Vec wdxa = apply_W(dxa);
        Vec wdsa = apply_Winvt(dsa);
        Vec rc = -jordan(lam, lam) - jordan(wdxa, wdsa) + sigma * mu * e;
        double rtau = -tau * kappa - dtaua * dkapa + sigma * mu;
        Vec dx, dy, ds, dcs;
        double dtau, dkap;
        direction(rc, rtau, 1.0 - sigma, dx, dy, ds, dtau, dkap, dcs);
        double amax = step_len(dx, ds, dtau, dkap);
        double alpha = std::min(1.0, 0.99 * amax);
        if (!std::isfinite(alpha) || !dx.allFinite() || !dy.allFinite() || !ds.allFinite()) break;
        if (st.verbose) std::fprintf(stderr, "    alpha_a %.2e sigma %.2e alpha %.2e\n", alpha_a, sigma, alpha);
        if (alpha < 1e-8) ++stalls;
        else stalls = 0;
        x += alpha * dx;
        y += alpha * dy;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkap;
        if (tau <= 0 || kappa <= 0) break;
    }
    out = best;
    bool finite = std::isfinite(best.primal_objective) && std::isfinite(best.dual_objective);
    if (finite && best.primal_residual <= 1e-6 && best.dual_residual <= 1e-6 && best.gap > st.gap_tol)
        out.status = Status::limit_feasible_suspect;
    else out.status = Status::iteration_limit;
    return out;
}

} // namespace detail

Solution solve(const ConicProgram &program, const SolverSettings &settings) {
    detail::Engine eng(program);
    return eng.run(settings);
}

ParametricLp::ParametricLp(const ConicProgram &lp_template)
    : engine_(std::make_unique<detail::Engine>(lp_template)) {
    if (!engine_->pure_lp()) throw std::invalid_argument("parametric LP template must only use free and nonnegative variables");
}
ParametricLp::~ParametricLp() = default;
ParametricLp::ParametricLp(ParametricLp &&) noexcept = default;
ParametricLp &ParametricLp::operator=(ParametricLp &&) noexcept = default;

void ParametricLp::set_rhs(const std::vector<double> &b) { engine_->set_rhs(b); }
void ParametricLp::set_objective(const std::vector<double> &c) { engine_->set_objective(c); }
void ParametricLp::set_coefficient(std::size_t row, std::size_t col, double value) {
    engine_->set_coefficient(row, col, value);
}
Solution ParametricLp::resolve(const SolverSettings &settings) { return engine_->run(settings); }

} // namespace polyopt
