#include "polyopt/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace polyopt {

ParseError::ParseError(std::size_t line, std::size_t column, const std::string &message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line), column_(column), message_(message) {}

namespace {

enum class Tok { ident, number, symbol, eol, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    double value = 0.0;
    bool imaginary = false;
    std::size_t line = 1, column = 1;
};

const std::set<std::string> reserved = {"vars", "real", "complex", "min", "zero", "nonneg", "psd", "conj", "im"};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        int depth = 0;
        while (true) {
            skip_blank();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= s_.size()) {
                t.kind = Tok::end;
                out.push_back(t);
                return out;
            }
            const char c = s_[pos_];
            if (c == '\n') {
                advance();
                if (depth > 0) continue;
                t.kind = Tok::eol;
                out.push_back(t);
                continue;
            }
            if (ident_start(c)) {
                t.kind = Tok::ident;
                while (pos_ < s_.size() && ident_char(s_[pos_])) t.text += advance();
            } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && next_is_digit())) {
                t.kind = Tok::number;
                lex_number(t);
            } else if (c == '.' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '.') {
                t.kind = Tok::symbol;
                t.text = "..";
                advance();
                advance();
            } else if (std::string_view("+-*^()[],;").find(c) != std::string_view::npos) {
                t.kind = Tok::symbol;
                t.text = std::string(1, advance());
                if (c == '(' || c == '[') ++depth;
                if ((c == ')' || c == ']') && depth > 0) --depth;
            } else {
                throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
            }
            out.push_back(t);
        }
    }

private:
    char advance() {
        const char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else ++col_;
        return c;
    }
    bool next_is_digit() const {
        return pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]));
    }
    void skip_blank() {
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (c == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r') advance();
            else break;
        }
    }
    void lex_number(Token &t) {
        std::string text;
        auto digits = [&] {
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) text += advance();
        };
        digits();
        if (pos_ < s_.size() && s_[pos_] == '.' && !(pos_ + 1 < s_.size() && s_[pos_ + 1] == '.')) {
            text += advance();
            digits();
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t ahead = pos_ + 1;
            if (ahead < s_.size() && (s_[ahead] == '+' || s_[ahead] == '-')) ++ahead;
            if (ahead < s_.size() && std::isdigit(static_cast<unsigned char>(s_[ahead]))) {
                while (pos_ < ahead) text += advance();
                digits();
            }
        }
        if (pos_ + 1 < s_.size() && s_[pos_] == 'i' && s_[pos_ + 1] == 'm' &&
            !(pos_ + 2 < s_.size() && ident_char(s_[pos_ + 2]))) {
            advance();
            advance();
            t.imaginary = true;
        }
        if (pos_ < s_.size() && ident_char(s_[pos_]))
            throw ParseError(line_, col_, "malformed number '" + text + s_[pos_] + "'");
        t.text = text;
        t.value = std::stod(text);
    }

    std::string_view s_;
    std::size_t pos_ = 0, line_ = 1, col_ = 1;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    PopProblem run() {
        skip_eols();
        header();
        PopProblem prob(space_);
        prob.names = names_;
        bool have_min = false;
        while (true) {
            skip_eols();
            if (peek().kind == Tok::end) break;
            const Token &kw = peek();
            if (kw.kind != Tok::ident) error(kw, "expected min, zero, nonneg or psd");
            get();
            if (kw.text == "min") {
                if (have_min) error(kw, "second objective");
                have_min = true;
                prob.objective = poly();
            } else if (kw.text == "zero") {
                prob.zero.push_back(poly());
            } else if (kw.text == "nonneg") {
                prob.nonneg.push_back(poly());
            } else if (kw.text == "psd") {
                prob.psd.push_back(matrix());
            } else {
                error(kw, "expected min, zero, nonneg or psd, got '" + kw.text + "'");
            }
            end_of_statement();
        }
        return prob;
    }

private:
    const Token &peek() const { return t_[i_]; }
    const Token &get() { return t_[i_ < t_.size() - 1 ? i_++ : i_]; }
    bool is_symbol(const char *s) const { return peek().kind == Tok::symbol && peek().text == s; }
    [[noreturn]] void error(const Token &t, const std::string &msg) const { throw ParseError(t.line, t.column, msg); }
    void expect(const char *s) {
        if (!is_symbol(s)) error(peek(), std::string("expected '") + s + "'");
        get();
    }
    void skip_eols() {
        while (peek().kind == Tok::eol) get();
    }
    void end_of_statement() {
        if (peek().kind != Tok::eol && peek().kind != Tok::end) error(peek(), "unexpected '" + peek().text + "'");
    }

    void header() {
        const Token &kw = get();
        if (kw.kind != Tok::ident || kw.text != "vars") error(kw, "problem must start with 'vars'");
        Field field = Field::real;
        bool have_field = false;
        while (peek().kind == Tok::ident) {
            const Token &id = get();
            if (id.text == "real" || id.text == "complex") {
                field = id.text == "real" ? Field::real : Field::complex;
                have_field = true;
                break;
            }
            if (reserved.count(id.text)) error(id, "'" + id.text + "' cannot name a variable");
            if (is_symbol("..")) {
                get();
                const Token &last = get();
                if (last.kind != Tok::ident) error(last, "expected variable after '..'");
                expand_range(id, last);
            } else add_name(id, id.text);
        }
        if (!have_field) error(peek(), "expected 'real' or 'complex' after the variable list");
        if (names_.empty()) error(kw, "no variables declared");
        end_of_statement();
        space_ = VariableSpace(names_.size(), field);
    }

    void add_name(const Token &t, const std::string &name) {
        if (std::find(names_.begin(), names_.end(), name) != names_.end()) error(t, "duplicate variable '" + name + "'");
        names_.push_back(name);
    }

    void expand_range(const Token &first, const Token &last) {
        auto split = [&](const Token &t) {
            std::size_t k = t.text.size();
            while (k > 0 && std::isdigit(static_cast<unsigned char>(t.text[k - 1]))) --k;
            if (k == t.text.size() || k == 0) error(t, "range bounds need a name and a number");
            return std::pair{t.text.substr(0, k), std::stoul(t.text.substr(k))};
        };
        auto [p1, a] = split(first);
        auto [p2, b] = split(last);
        if (p1 != p2 || b < a) error(last, "invalid variable range");
        for (auto k = a; k <= b; ++k) add_name(first, p1 + std::to_string(k));
    }

    Polynomial poly() {
        Polynomial acc(space_);
        bool first = true;
        while (true) {
            double sign = 1.0;
            if (is_symbol("+") || is_symbol("-")) {
                sign = get().text == "-" ? -1.0 : 1.0;
            } else if (!first) {
                break;
            }
            Polynomial t = term();
            if (sign < 0) acc -= t;
            else acc += t;
            first = false;
        }
        return acc;
    }

    Polynomial term() {
        Polynomial acc = factor();
        while (is_symbol("*")) {
            get();
            acc = acc * factor();
        }
        return acc;
    }

    Polynomial factor() {
        Polynomial base = atom();
        if (is_symbol("^")) {
            get();
            const Token &e = peek();
            if (e.kind != Tok::number || e.imaginary || e.value < 0 || e.value != std::floor(e.value) ||
                e.text.find_first_of(".eE") != std::string::npos || e.value > 1e6)
                error(e, "malformed exponent");
            get();
            base = pow(base, static_cast<unsigned>(e.value));
        }
        return base;
    }

    std::size_t variable(const Token &t) {
        auto it = std::find(names_.begin(), names_.end(), t.text);
        if (it == names_.end()) error(t, "unknown variable '" + t.text + "'");
        return static_cast<std::size_t>(it - names_.begin());
    }

    Polynomial atom() {
        const Token &t = peek();
        if (t.kind == Tok::number) {
            get();
            if (t.imaginary && !space_.is_complex()) error(t, "imaginary coefficient in a real problem");
            return Polynomial::constant(space_, t.imaginary ? Coeff(0, t.value) : Coeff(t.value, 0));
        }
        if (t.kind == Tok::ident) {
            get();
            if (t.text == "im") {
                if (!space_.is_complex()) error(t, "imaginary coefficient in a real problem");
                return Polynomial::constant(space_, Coeff(0, 1));
            }
            if (t.text == "conj") {
                if (!space_.is_complex()) error(t, "conj() in a real problem");
                expect("(");
                const Token &v = peek();
                if (v.kind != Tok::ident) error(v, "expected variable inside conj()");
                get();
                const std::size_t i = variable(v);
                expect(")");
                return Polynomial::variable(space_, i, true);
            }
            return Polynomial::variable(space_, variable(t));
        }
        if (is_symbol("(")) {
            get();
            Polynomial p = poly();
            expect(")");
            return p;
        }
        if (t.kind == Tok::eol || t.kind == Tok::end) error(t, "unexpected end of expression");
        error(t, "unexpected '" + t.text + "'");
    }

    PolyMatrix matrix() {
        const Token &open = peek();
        expect("[");
        std::vector<std::vector<Polynomial>> rows;
        while (is_symbol("[")) {
            get();
            std::vector<Polynomial> row{poly()};
            while (is_symbol(",")) {
                get();
                row.push_back(poly());
            }
            expect("]");
            rows.push_back(std::move(row));
            if (is_symbol(",") || is_symbol(";")) get();
        }
        expect("]");
        if (rows.empty()) error(open, "empty matrix");
        for (auto &r : rows)
            if (r.size() != rows.size()) error(open, "matrix is not square");
        return PolyMatrix::from_rows(rows);
    }

    std::vector<Token> t_;
    std::size_t i_ = 0;
    VariableSpace space_;
    std::vector<std::string> names_;
};

std::vector<std::string> display_names(const PopProblem &p) {
    if (p.names.size() == p.n()) return p.names;
    std::vector<std::string> v;
    for (std::size_t i = 0; i < p.n(); ++i) v.push_back("x" + std::to_string(i + 1));
    return v;
}

std::string fmt17(double v) {
    if (v == 0.0) v = 0.0; // no "-0"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

PopProblem parse_problem(std::string_view text) {
    Lexer lx(text);
    Parser ps(lx.run());
    return ps.run();
}

PopProblem read_problem(const std::filesystem::path &file) {
    std::ifstream is(file);
    if (!is) throw std::runtime_error("cannot read " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_problem(ss.str());
}

std::string print_problem(const PopProblem &problem) {
    const auto names = display_names(problem);
    std::ostringstream os;
    os << "vars";
    for (auto &n : names) os << ' ' << n;
    os << (problem.is_complex() ? " complex\n" : " real\n");
    os << "min " << to_string(problem.objective, names) << '\n';
    for (auto &h : problem.zero) os << "zero " << to_string(h, names) << '\n';
    for (auto &g : problem.nonneg) os << "nonneg " << to_string(g, names) << '\n';
    for (auto &G : problem.psd) {
        os << "psd [";
        for (std::size_t i = 0; i < G.side(); ++i) {
            os << (i ? "; [" : "[");
            for (std::size_t j = 0; j < G.side(); ++j) os << (j ? ", " : "") << to_string(G.at(i, j), names);
            os << ']';
        }
        os << "]\n";
    }
    return os.str();
}

std::string to_sdpa(const ConicProgram &input) {
    ConicProgram prog = input;
    prog.canonicalize();
    const auto offsets = prog.cone_offsets();
    struct Slot {
        std::size_t block, i, j; // 1-based, i <= j
        double factor;
    };
    std::vector<Slot> slot(prog.num_vars());
    std::vector<long long> structure;
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        const Cone &cone = prog.cones[k];
        const std::size_t off = offsets[k];
        if (cone.kind == ConeKind::free) throw UnsupportedCone("block " + std::to_string(k + 1) + ": free variables are not representable in SDPA");
        if (cone.kind == ConeKind::soc) throw UnsupportedCone("block " + std::to_string(k + 1) + ": second-order cone is not representable in SDPA");
        if (cone.kind == ConeKind::nonneg) {
            structure.push_back(-static_cast<long long>(cone.dim));
            for (std::size_t t = 0; t < cone.dim; ++t) slot[off + t] = {k + 1, t + 1, t + 1, 1.0};
        } else {
            structure.push_back(static_cast<long long>(cone.dim));
            for (std::size_t a = 0; a < cone.dim; ++a)
                for (std::size_t b = 0; b <= a; ++b)
                    slot[off + svec_index(a, b)] = {k + 1, b + 1, a + 1, a == b ? 1.0 : 1.0 / svec_scale(a, b)};
        }
    }
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, double>> entries;
    for (std::size_t v = 0; v < prog.c.size(); ++v)
        if (prog.c[v] != 0.0) {
            const Slot &s = slot[v];
            entries.emplace_back(0, s.block, s.i, s.j, -prog.c[v] * s.factor);
        }
    for (const auto &t : prog.a) {
        const Slot &s = slot[t.col];
        entries.emplace_back(t.row + 1, s.block, s.i, s.j, t.value * s.factor);
    }
    std::sort(entries.begin(), entries.end());

    std::ostringstream os;
    os << "* sparse SDPA, dual form: max F0.Y s.t. Fi.Y = ci\n";
    os << "* offset " << fmt17(prog.offset) << '\n';
    os << prog.rows << '\n' << prog.cones.size() << '\n';
    for (std::size_t k = 0; k < structure.size(); ++k) os << (k ? " " : "") << structure[k];
    os << '\n';
    for (std::size_t r = 0; r < prog.rows; ++r) os << (r ? " " : "") << fmt17(prog.b[r]);
    os << '\n';
    for (auto &[m, blk, i, j, v] : entries) os << m << ' ' << blk << ' ' << i << ' ' << j << ' ' << fmt17(v) << '\n';
    return os.str();
}

ConicProgram from_sdpa(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    double offset = 0.0;
    std::vector<std::string> data;
    while (std::getline(is, line)) {
        if (!line.empty() && (line[0] == '*' || line[0] == '"')) {
            std::istringstream c(line.substr(1));
            std::string key;
            if (c >> key && key == "offset") c >> offset;
            continue;
        }
        for (char &ch : line)
            if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
        data.push_back(line);
    }
    std::istringstream body;
    std::string joined;
    for (auto &l : data) joined += l + '\n';
    body.str(joined);
    long long m = 0, nblocks = 0;
    if (!(body >> m >> nblocks) || m < 0 || nblocks < 0) throw std::runtime_error("SDPA: bad header");
    ConicProgram prog;
    std::vector<std::size_t> block_off;
    std::vector<long long> block_size;
    for (long long k = 0; k < nblocks; ++k) {
        long long s;
        if (!(body >> s) || s == 0) throw std::runtime_error("SDPA: bad block structure");
        block_size.push_back(s);
        block_off.push_back(prog.add_cone(s < 0 ? Cone::nonneg(static_cast<std::size_t>(-s)) : Cone::psd(static_cast<std::size_t>(s))));
    }
    for (long long r = 0; r < m; ++r) {
        double b;
        if (!(body >> b)) throw std::runtime_error("SDPA: truncated constraint vector");
        prog.add_row(b);
    }
    long long mat, blk, i, j;
    double v;
    while (body >> mat >> blk >> i >> j >> v) {
        if (mat < 0 || mat > m || blk < 1 || blk > nblocks) throw std::runtime_error("SDPA: entry out of range");
        const long long s = block_size[blk - 1];
        const long long side = s < 0 ? -s : s;
        if (i < 1 || j < 1 || i > side || j > side) throw std::runtime_error("SDPA: entry index out of range");
        if (s < 0 && i != j) throw std::runtime_error("SDPA: off-diagonal entry in a diagonal block");
        const auto a = static_cast<std::size_t>(std::max(i, j) - 1), b = static_cast<std::size_t>(std::min(i, j) - 1);
        const std::size_t var = block_off[blk - 1] + (s < 0 ? a : svec_index(a, b));
        const double coef = s < 0 || a == b ? v : v * svec_scale(a, b);
        if (mat == 0) prog.c[var] += -coef;
        else prog.add_entry(static_cast<std::size_t>(mat - 1), var, coef);
    }
    if (!body.eof()) throw std::runtime_error("SDPA: malformed entry line");
    prog.offset = offset;
    prog.canonicalize();
    return prog;
}

void export_sdpa(const ConicProgram &program, const std::filesystem::path &file) {
    const std::string text = to_sdpa(program);
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << text;
}

ConicProgram import_sdpa(const std::filesystem::path &file) {
    std::ifstream is(file);
    if (!is) throw std::runtime_error("cannot read " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return from_sdpa(ss.str());
}

namespace {

using json = nlohmann::ordered_json;

json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number(const json &j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::runtime_error("report: bad number '" + s + "'");
    }
    return j.get<double>();
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

} // namespace

bool Report::operator==(const Report &o) const {
    auto same_vec = [](const std::vector<double> &a, const std::vector<double> &b) {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), same);
    };
    if (solutions.size() != o.solutions.size()) return false;
    for (std::size_t k = 0; k < solutions.size(); ++k)
        if (solutions[k].point != o.solutions[k].point || !same(solutions[k].quality, o.solutions[k].quality)) return false;
    if (timings.size() != o.timings.size()) return false;
    for (auto &[k, v] : timings) {
        auto it = o.timings.find(k);
        if (it == o.timings.end() || !same(v, it->second)) return false;
    }
    return status == o.status && method == o.method && form == o.form && representation == o.representation &&
           order == o.order && same(bound, o.bound) && same_vec(bound_history, o.bound_history) &&
           certificate == o.certificate && ranks == o.ranks && block_sizes == o.block_sizes &&
           diagnostics == o.diagnostics;
}

std::string to_json(const Report &r) {
    json j;
    j["schema"] = "polyopt-report 1";
    j["status"] = r.status;
    j["method"] = r.method;
    j["form"] = r.form;
    j["representation"] = r.representation;
    j["order"] = r.order;
    j["bound"] = number(r.bound);
    json hist = json::array();
    for (double b : r.bound_history) hist.push_back(number(b));
    j["bound_history"] = hist;
    j["certificate"] = r.certificate;
    j["ranks"] = r.ranks;
    json sols = json::array();
    for (auto &s : r.solutions) {
        json re = json::array(), im = json::array();
        bool complex = false;
        for (auto &c : s.point) {
            re.push_back(number(c.real()));
            im.push_back(number(c.imag()));
            complex |= c.imag() != 0.0;
        }
        json e;
        e["point"] = re;
        if (complex) e["imag"] = im;
        e["quality"] = number(s.quality);
        sols.push_back(e);
    }
    j["solutions"] = sols;
    json t = json::object();
    for (auto &[k, v] : r.timings) t[k] = number(v);
    j["timings"] = t;
    json bs = json::array();
    for (auto &[side, count] : r.block_sizes) bs.push_back({side, count});
    j["block_sizes"] = bs;
    j["diagnostics"] = r.diagnostics;
    return j.dump(2);
}

Report report_from_json(std::string_view text) {
    const json j = json::parse(text);
    if (j.value("schema", "") != "polyopt-report 1") throw std::runtime_error("report: unknown schema");
    Report r;
    r.status = j.at("status").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.form = j.at("form").get<std::string>();
    r.representation = j.at("representation").get<std::string>();
    r.order = j.at("order").get<std::uint32_t>();
    r.bound = number(j.at("bound"));
    for (auto &b : j.at("bound_history")) r.bound_history.push_back(number(b));
    r.certificate = j.at("certificate").get<std::string>();
    r.ranks = j.at("ranks").get<std::vector<std::size_t>>();
    for (auto &e : j.at("solutions")) {
        ReportSolution s;
        const auto &re = e.at("point");
        for (std::size_t k = 0; k < re.size(); ++k)
            s.point.emplace_back(number(re[k]), e.contains("imag") ? number(e["imag"][k]) : 0.0);
        s.quality = number(e.at("quality"));
        r.solutions.push_back(std::move(s));
    }
    for (auto &[k, v] : j.at("timings").items()) r.timings[k] = number(v);
    for (auto &p : j.at("block_sizes")) r.block_sizes.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return r;
}

} // namespace polyopt
