#include "polyopt/polyring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace polyopt {

VariableSpace::VariableSpace(std::size_t n, Field kind,
                             std::vector<std::optional<std::uint32_t>> caps)
    : n_(n), kind_(kind), caps_(std::move(caps)) {
    if (n_ == 0) throw std::invalid_argument("variable space needs at least one variable");
    if (!caps_.empty() && caps_.size() != n_)
        throw std::invalid_argument("degree caps must be given for every variable");
}

std::optional<std::uint32_t> VariableSpace::cap(std::size_t i) const {
    if (caps_.empty()) return std::nullopt;
    return caps_.at(i);
}

std::uint32_t ExponentKey::degree() const {
    std::uint32_t p = 0, q = 0;
    for (auto e : plain) p += e;
    for (auto e : conj) q += e;
    return std::max(p, q);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max())
            throw CapacityError("binomial coefficient exceeds 64-bit range");
    }
    return static_cast<std::uint64_t>(r);
}

std::uint64_t count_upto(std::size_t n, std::uint32_t d) { return binomial(n + d, n); }

namespace {

// number of tuples of length k with total degree exactly d
std::uint64_t count_exact(std::size_t k, std::uint32_t d) {
    if (k == 0) return d == 0 ? 1 : 0;
    return binomial(k - 1 + d, k - 1);
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw CapacityError("monomial rank exceeds 64-bit range");
    return r;
}

} // namespace

std::uint64_t rank_exponents(std::span<const std::uint32_t> e) {
    const std::size_t n = e.size();
    std::uint64_t d = 0;
    for (auto v : e) d += v;
    if (d > std::numeric_limits<std::uint32_t>::max()) throw CapacityError("degree too large");
    std::uint64_t r = d == 0 ? 0 : count_upto(n, static_cast<std::uint32_t>(d - 1));
    auto rem = static_cast<std::uint32_t>(d);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t k = n - i - 1;
        if (e[i] > 0) {
            // tuples whose i-th entry is smaller: remaining degree in (rem - e_i, rem]
            std::uint64_t hi = count_upto(k, rem);
            std::uint64_t lo = count_upto(k, rem - e[i]);
            r = checked_add(r, hi - lo);
        }
        rem -= e[i];
    }
    return r;
}

std::uint32_t degree_of_rank(std::size_t n, std::uint64_t r) {
    std::uint32_t d = 0;
    while (count_upto(n, d) <= r) ++d;
    return d;
}

Exponents unrank_exponents(std::size_t n, std::uint64_t r) {
    const std::uint32_t d = degree_of_rank(n, r);
    std::uint64_t t = r - (d == 0 ? 0 : count_upto(n, d - 1));
    Exponents e(n, 0);
    std::uint32_t rem = d;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t k = n - i - 1;
        for (std::uint32_t v = 0;; ++v) {
            std::uint64_t cnt = count_exact(k, rem - v);
            if (t < cnt) {
                e[i] = v;
                break;
            }
            t -= cnt;
        }
        rem -= e[i];
    }
    e[n - 1] = rem;
    return e;
}

namespace {

void check_caps(const Exponents &e, const VariableSpace &space) {
    if (e.size() != space.n()) throw std::invalid_argument("exponent vector length does not match space");
    for (std::size_t i = 0; i < e.size(); ++i) {
        auto c = space.cap(i);
        if (c && e[i] > *c) throw std::invalid_argument("exponent exceeds degree cap of variable");
    }
}

} // namespace

MonomialId encode(const ExponentKey &key, const VariableSpace &space) {
    check_caps(key.plain, space);
    MonomialId id{rank_exponents(key.plain), 0};
    if (space.is_complex()) {
        if (!key.conj.empty()) {
            check_caps(key.conj, space);
            id.conj = rank_exponents(key.conj);
        }
    } else {
        for (auto v : key.conj)
            if (v != 0) throw std::invalid_argument("conjugate exponents in a real space");
    }
    return id;
}

ExponentKey decode(MonomialId id, const VariableSpace &space) {
    ExponentKey k;
    k.plain = unrank_exponents(space.n(), id.plain);
    if (space.is_complex()) k.conj = unrank_exponents(space.n(), id.conj);
    return k;
}

MonomialId mul(MonomialId a, MonomialId b, const VariableSpace &space) {
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    const std::size_t n = space.n();
    auto ea = unrank_exponents(n, a.plain), eb = unrank_exponents(n, b.plain);
    for (std::size_t i = 0; i < n; ++i) ea[i] += eb[i];
    check_caps(ea, space);
    MonomialId r{rank_exponents(ea), 0};
    if (a.conj != 0 || b.conj != 0) {
        if (!space.is_complex()) throw std::invalid_argument("conjugate part in a real space");
        auto ca = unrank_exponents(n, a.conj), cb = unrank_exponents(n, b.conj);
        for (std::size_t i = 0; i < n; ++i) ca[i] += cb[i];
        check_caps(ca, space);
        r.conj = rank_exponents(ca);
    }
    return r;
}

MonomialId conjugate(MonomialId id) { return MonomialId{id.conj, id.plain}; }

std::uint32_t plain_degree(MonomialId id, const VariableSpace &space) {
    return degree_of_rank(space.n(), id.plain);
}

std::uint32_t conj_degree(MonomialId id, const VariableSpace &space) {
    return degree_of_rank(space.n(), id.conj);
}

std::uint32_t degree(MonomialId id, const VariableSpace &space) {
    return std::max(plain_degree(id, space), conj_degree(id, space));
}

MonomialId variable_id(std::size_t i, const VariableSpace &space, bool conj) {
    if (i >= space.n()) throw std::out_of_range("variable index out of range");
    if (conj && !space.is_complex()) throw std::invalid_argument("conjugate variable in a real space");
    Exponents e(space.n(), 0);
    e[i] = 1;
    std::uint64_t r = rank_exponents(e);
    return conj ? MonomialId{0, r} : MonomialId{r, 0};
}

std::string monomial_string(MonomialId id, const VariableSpace &space,
                            const std::vector<std::string> &names) {
    auto key = decode(id, space);
    auto name = [&](std::size_t i) {
        return i < names.size() ? names[i] : "x" + std::to_string(i + 1);
    };
    std::ostringstream os;
    bool first = true;
    auto emit = [&](const Exponents &e, bool conj) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            if (!first) os << '*';
            first = false;
            if (conj) os << "conj(" << name(i) << ')';
            else os << name(i);
            if (e[i] > 1) os << '^' << e[i];
        }
    };
    emit(key.plain, false);
    emit(key.conj, true);
    if (first) os << '1';
    return os.str();
}

DenseBasis dense_basis(const VariableSpace &space, std::uint32_t d) {
    for (std::size_t i = 0; i < space.n(); ++i)
        if (auto c = space.cap(i); c && *c < d)
            throw std::invalid_argument("dense basis degree exceeds a variable cap");
    return DenseBasis(space.n(), d);
}

std::vector<MonomialId> dense_basis_vector(const VariableSpace &space, std::uint32_t d) {
    auto b = dense_basis(space, d);
    return {b.begin(), b.end()};
}

// ---------------------------------------------------------------------------

Polynomial::Polynomial(VariableSpace space, std::vector<Term> terms)
    : space_(std::move(space)), terms_(std::move(terms)) {
    if (!space_.is_complex())
        for (auto &t : terms_)
            if (t.id.conj != 0) throw std::invalid_argument("conjugate monomial in a real space");
    normalize();
}

void Polynomial::normalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term &a, const Term &b) { return a.id < b.id; });
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (auto &t : terms_) {
        if (!out.empty() && out.back().id == t.id) out.back().coeff += t.coeff;
        else out.push_back(t);
    }
    std::erase_if(out, [](const Term &t) { return t.coeff == Coeff(0.0); });
    terms_ = std::move(out);
}

Polynomial Polynomial::constant(const VariableSpace &space, Coeff c) {
    return Polynomial(space, {Term{MonomialId{}, c}});
}

Polynomial Polynomial::variable(const VariableSpace &space, std::size_t i, bool conj) {
    return Polynomial(space, {Term{variable_id(i, space, conj), 1.0}});
}

Polynomial Polynomial::monomial(const VariableSpace &space, MonomialId id, Coeff c) {
    return Polynomial(space, {Term{id, c}});
}

std::uint32_t Polynomial::degree() const {
    std::uint32_t d = 0;
    for (auto &t : terms_) d = std::max(d, polyopt::degree(t.id, space_));
    return d;
}

Coeff Polynomial::coefficient(MonomialId id) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), id,
                               [](const Term &t, MonomialId v) { return t.id < v; });
    return it != terms_.end() && it->id == id ? it->coeff : Coeff(0.0);
}

std::vector<MonomialId> Polynomial::support() const {
    std::vector<MonomialId> s;
    s.reserve(terms_.size());
    for (auto &t : terms_) s.push_back(t.id);
    return s;
}

bool Polynomial::has_real_coefficients() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term &t) { return t.coeff.imag() == 0.0; });
}

bool Polynomial::is_real_valued(double tol) const {
    if (!space_.is_complex())
        return std::all_of(terms_.begin(), terms_.end(),
                           [&](const Term &t) { return std::abs(t.coeff.imag()) <= tol; });
    for (auto &t : terms_) {
        Coeff c = coefficient(polyopt::conjugate(t.id));
        if (std::abs(c - std::conj(t.coeff)) > tol) return false;
    }
    return true;
}

bool Polynomial::is_homogeneous() const {
    if (terms_.empty()) return true;
    auto d0 = polyopt::plain_degree(terms_.front().id, space_) + polyopt::conj_degree(terms_.front().id, space_);
    for (auto &t : terms_)
        if (polyopt::plain_degree(t.id, space_) + polyopt::conj_degree(t.id, space_) != d0) return false;
    return true;
}

Polynomial Polynomial::operator-() const {
    Polynomial r = *this;
    for (auto &t : r.terms_) t.coeff = -t.coeff;
    return r;
}

Polynomial &Polynomial::operator+=(const Polynomial &o) {
    if (!(space_ == o.space_)) throw std::invalid_argument("polynomials over different spaces");
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    normalize();
    return *this;
}

Polynomial &Polynomial::operator-=(const Polynomial &o) { return *this += -o; }

Polynomial &Polynomial::operator*=(Coeff c) {
    for (auto &t : terms_) t.coeff *= c;
    normalize();
    return *this;
}

Polynomial Polynomial::conjugate() const {
    std::vector<Term> t;
    t.reserve(terms_.size());
    for (auto &x : terms_) t.push_back(Term{polyopt::conjugate(x.id), std::conj(x.coeff)});
    return Polynomial(space_, std::move(t));
}

Coeff Polynomial::evaluate(std::span<const Coeff> z) const {
    if (z.size() != space_.n()) throw std::invalid_argument("evaluation point has wrong dimension");
    Coeff sum = 0.0;
    for (auto &t : terms_) {
        auto k = decode(t.id, space_);
        Coeff v = t.coeff;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (k.plain[i]) v *= std::pow(z[i], static_cast<int>(k.plain[i]));
            if (!k.conj.empty() && k.conj[i]) v *= std::pow(std::conj(z[i]), static_cast<int>(k.conj[i]));
        }
        sum += v;
    }
    return sum;
}

double Polynomial::evaluate(std::span<const double> x) const {
    std::vector<Coeff> z(x.begin(), x.end());
    return evaluate(std::span<const Coeff>(z)).real();
}

bool Polynomial::operator==(const Polynomial &o) const {
    if (!(space_ == o.space_) || terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i)
        if (terms_[i].id != o.terms_[i].id || terms_[i].coeff != o.terms_[i].coeff) return false;
    return true;
}

Polynomial operator+(Polynomial a, const Polynomial &b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial &b) { return a -= b; }
Polynomial operator*(Polynomial a, Coeff c) { return a *= c; }
Polynomial operator*(Coeff c, Polynomial a) { return a *= c; }

Polynomial operator*(const Polynomial &a, const Polynomial &b) {
    if (!(a.space() == b.space())) throw std::invalid_argument("polynomials over different spaces");
    const auto &sp = a.space();
    const std::size_t n = sp.n();
    std::vector<ExponentKey> kb;
    kb.reserve(b.size());
    for (auto &t : b.terms()) kb.push_back(decode(t.id, sp));
    std::vector<Term> out;
    out.reserve(a.size() * b.size());
    for (auto &ta : a.terms()) {
        auto ka = decode(ta.id, sp);
        for (std::size_t j = 0; j < b.size(); ++j) {
            ExponentKey k = ka;
            for (std::size_t i = 0; i < n; ++i) k.plain[i] += kb[j].plain[i];
            for (std::size_t i = 0; i < k.conj.size(); ++i) k.conj[i] += kb[j].conj[i];
            out.push_back(Term{encode(k, sp), ta.coeff * b.terms()[j].coeff});
        }
    }
    return Polynomial(sp, std::move(out));
}

Polynomial pow(const Polynomial &a, unsigned k) {
    Polynomial r = Polynomial::constant(a.space(), 1.0);
    for (unsigned i = 0; i < k; ++i) r = r * a;
    return r;
}

PolyMatrix::PolyMatrix(std::size_t m, std::vector<Polynomial> entries) : m_(m), entries_(std::move(entries)) {
    if (m_ == 0 || entries_.size() != m_ * m_) throw std::invalid_argument("polynomial matrix must be square and nonempty");
    for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < m_; ++j) {
            if (!(entries_[i * m_ + j].space() == entries_[0].space()))
                throw std::invalid_argument("polynomial matrix entries over different spaces");
            const auto &a = at(i, j), &b = at(j, i);
            bool ok = entries_[0].space().is_complex() ? a == b.conjugate() : a == b;
            if (!ok) throw std::invalid_argument("polynomial matrix is not symmetric/Hermitian");
        }
}

PolyMatrix PolyMatrix::from_rows(const std::vector<std::vector<Polynomial>> &rows) {
    std::vector<Polynomial> e;
    for (auto &r : rows) {
        if (r.size() != rows.size()) throw std::invalid_argument("polynomial matrix must be square");
        e.insert(e.end(), r.begin(), r.end());
    }
    return PolyMatrix(rows.size(), std::move(e));
}

std::uint32_t PolyMatrix::degree() const {
    std::uint32_t d = 0;
    for (auto &p : entries_) d = std::max(d, p.degree());
    return d;
}

std::string to_string(const Polynomial &p, const std::vector<std::string> &names, int precision) {
    if (p.is_zero()) return "0";
    std::ostringstream os;
    os.precision(precision);
    bool first = true;
    for (auto &t : p.terms()) {
        const bool one = t.id.is_one();
        if (t.coeff.imag() != 0.0) {
            os << (first ? "" : " + ") << '(' << t.coeff.real() << (t.coeff.imag() < 0 ? "-" : "+")
               << std::abs(t.coeff.imag()) << "im)";
            if (!one) os << '*' << monomial_string(t.id, p.space(), names);
        } else {
            double c = t.coeff.real();
            if (first) {
                if (c < 0) os << '-';
            } else os << (c < 0 ? " - " : " + ");
            c = std::abs(c);
            if (one) os << c;
            else {
                if (c != 1.0) os << c << '*';
                os << monomial_string(t.id, p.space(), names);
            }
        }
        first = false;
    }
    return os.str();
}

} // namespace polyopt
