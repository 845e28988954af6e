#include "polyopt/interpolant.hpp"
#include "polyopt/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace polyopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string coeff_string(Coeff c) {
    if (c.imag() == 0.0) return g17(c.real());
    return "(" + g17(c.real()) + (c.imag() < 0 ? "" : "+") + g17(c.imag()) + "im)";
}

std::vector<std::string> names_of(const PopProblem &p) {
    if (p.names.size() == p.n()) return p.names;
    std::vector<std::string> v;
    for (std::size_t i = 0; i < p.n(); ++i) v.push_back("x" + std::to_string(i + 1));
    return v;
}

const std::map<std::string, std::string> method_names = {
    {"dense", "Dense"},
    {"newton", "Newton"},
    {"correlative", "SparsityCorrelative"},
    {"term-block", "SparsityTermBlock"},
    {"term-cliques", "SparsityTermCliques"},
};

struct Common {
    std::string file;
    int order = 0; // 0: minimal admissible order
    std::string sparsity = "dense";
    int ts_steps = 0;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("file", c.file, "problem file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--order", c.order, "relaxation order (default: smallest admissible)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--sparsity", c.sparsity, "basis construction")
        ->check(CLI::IsMember({"dense", "newton", "correlative", "term-block", "term-cliques"}));
    cmd->add_option("--ts-steps", c.ts_steps, "extra term sparsity iterations")->check(CLI::NonNegativeNumber);
}

struct Setup {
    PopProblem problem;
    std::uint32_t order = 0;
    Groupings groupings;
    std::vector<std::string> diagnostics;
    double basis_time = 0.0;
};

Setup prepare(const Common &c) {
    PopProblem prob = read_problem(c.file);
    validate_or_throw(prob);
    const std::uint32_t d = c.order > 0 ? static_cast<std::uint32_t>(c.order) : min_order(prob);
    if (d < min_order(prob))
        throw std::invalid_argument("order " + std::to_string(d) + " is below the minimal order " +
                                    std::to_string(min_order(prob)));
    Setup s{prob, d, {}, {}, 0.0};
    const auto t0 = Clock::now();
    if (c.sparsity == "dense") {
        s.groupings = dense(prob, d);
    } else if (c.sparsity == "newton") {
        NewtonReport rep;
        s.groupings = newton_polytope(prob, dense(prob, d), {}, &rep);
        s.diagnostics = rep.diagnostics;
    } else if (c.sparsity == "correlative") {
        s.groupings = correlative_sparsity(prob, d, {}, &s.diagnostics);
    } else {
        auto st = term_sparsity_init(prob, d, c.sparsity == "term-block" ? Extension::block : Extension::cliques);
        for (int k = 0; k < c.ts_steps && !st.converged; ++k) term_sparsity_iterate(st);
        s.groupings = st.groupings;
    }
    s.basis_time = seconds_since(t0);
    return s;
}

std::string block_summary(const std::vector<std::pair<std::size_t, std::size_t>> &sizes) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < sizes.size(); ++k) os << (k ? ", " : "") << sizes[k].first << " => " << sizes[k].second;
    os << ']';
    return os.str();
}

void print_bases(std::ostream &out, const std::string &label, const std::vector<Basis> &parts, const VariableSpace &sp,
                 const std::vector<std::string> &names) {
    out << label << ": " << parts.size() << (parts.size() == 1 ? " block" : " blocks") << '\n';
    for (auto &b : parts) {
        out << b.size() << " [";
        for (std::size_t k = 0; k < b.size(); ++k) out << (k ? ", " : "") << monomial_string(b[k], sp, names);
        out << "]\n";
    }
}

void print_groupings(std::ostream &out, const PopProblem &prob, const Groupings &g) {
    const auto names = names_of(prob);
    out << "Variable cliques\n=====\n";
    if (g.cliques.empty()) {
        out << '[';
        for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ", " : "") << names[i];
        out << "]\n";
    }
    for (auto &c : g.cliques) {
        out << '[';
        for (std::size_t i = 0; i < c.size(); ++i) out << (i ? ", " : "") << names[c[i]];
        out << "]\n";
    }
    out << "\nBlock groupings\n=====\n";
    print_bases(out, "Objective", g.objective, prob.space, names);
    for (std::size_t i = 0; i < g.zero.size(); ++i)
        print_bases(out, "Equality constraint " + std::to_string(i + 1), g.zero[i], prob.space, names);
    for (std::size_t i = 0; i < g.nonneg.size(); ++i)
        print_bases(out, "Nonnegative constraint " + std::to_string(i + 1), g.nonneg[i], prob.space, names);
    for (std::size_t i = 0; i < g.psd.size(); ++i)
        print_bases(out, "PSD constraint " + std::to_string(i + 1), g.psd[i], prob.space, names);
}

Form parse_form(const std::string &s) { return s == "sos" ? Form::sos : Form::moment; }

Representation parse_representation(const std::string &s) {
    if (s == "dd") return Representation::dd;
    if (s == "sdd") return Representation::sdd;
    return Representation::psd;
}

int cmd_solve(const Common &c, const std::string &form, const std::string &repr, int rotations, double tol,
              double solver_tol, std::uint64_t seed, const std::string &report_path, std::ostream &out) {
    Setup s = prepare(c);
    Report rep;
    rep.method = method_names.at(c.sparsity);
    rep.representation = repr;
    rep.order = s.order;
    rep.block_sizes = s.groupings.block_sizes(s.problem);
    rep.diagnostics = s.diagnostics;
    rep.timings["basis"] = s.basis_time;

    OptimizeOptions opts;
    opts.form = parse_form(form);
    opts.representation = parse_representation(repr);
    opts.solver.feas_tol = solver_tol;
    opts.solver.gap_tol = solver_tol;
    rep.form = opts.representation == Representation::psd ? form : "sos";

    auto t0 = Clock::now();
    OptimizationResult res = optimize(s.problem, s.groupings, s.order, opts);
    rep.bound_history.push_back(res.bound);
    for (int k = 0; k < rotations && res.status() == Status::optimal; ++k) {
        opts.rotations.clear();
        for (auto &G : res.grams) opts.rotations.push_back(rotation_from_solution(G));
        res = optimize(s.problem, s.groupings, s.order, opts);
        rep.bound_history.push_back(res.bound);
    }
    rep.timings["solve"] = seconds_since(t0);
    rep.status = to_string(res.status());
    rep.bound = res.bound;
    for (auto &d : res.relaxation.diagnostics) rep.diagnostics.push_back(d);

    Optimality verdict = Optimality::unknown;
    if (res.status() == Status::optimal) {
        t0 = Clock::now();
        const auto oc = optimality_certificate(res, tol);
        verdict = oc.status;
        rep.ranks = oc.ranks;
        for (auto &d : oc.diagnostics) rep.diagnostics.push_back(d);
        ExtractOptions eo;
        eo.rank_tol = tol;
        eo.seed = seed;
        const auto ex = extract_solutions(res, eo);
        for (auto &cand : ex.solutions) rep.solutions.push_back({cand.point, cand.quality});
        for (auto &d : ex.diagnostics) rep.diagnostics.push_back(d);
        rep.timings["certify"] = seconds_since(t0);
    }
    rep.certificate = to_string(verdict);

    const auto names = names_of(s.problem);
    out << "Polynomial optimization result\n";
    out << "Relaxation method: " << rep.method << '\n';
    out << "Used optimization method: " << (rep.form == "sos" ? "SOS" : "Moment") << " (" << repr << ")\n";
    out << "Relaxation degree: " << rep.order << '\n';
    out << "PSD block sizes: " << block_summary(rep.block_sizes) << '\n';
    out << "Status of the solver: " << rep.status << '\n';
    out << "Lower bound to optimum (in case of good status): " << g17(rep.bound) << '\n';
    if (rep.bound_history.size() > 1) {
        out << "Bounds after each rotation:";
        for (std::size_t k = 1; k < rep.bound_history.size(); ++k) out << ' ' << g17(rep.bound_history[k]);
        out << '\n';
    }
    out << "Time required for optimization: " << g17(rep.timings["solve"]) << " seconds\n";
    out << "Optimality certificate: " << rep.certificate << '\n';
    out << "Solutions: " << rep.solutions.size() << '\n';
    for (auto &sol : rep.solutions) {
        out << "  [";
        for (std::size_t i = 0; i < sol.point.size(); ++i) out << (i ? ", " : "") << coeff_string(sol.point[i]);
        out << "]  quality " << g17(sol.quality) << '\n';
    }

    if (!report_path.empty()) {
        std::ofstream os(report_path);
        if (!os) throw std::runtime_error("cannot write " + report_path);
        os << to_json(rep) << '\n';
    }
    if (res.status() != Status::optimal) return 2;
    return verdict == Optimality::optimal ? 0 : 1;
}

int cmd_newton(const Common &c, std::ostream &out) {
    PopProblem prob = read_problem(c.file);
    validate_or_throw(prob);
    const std::uint32_t d = c.order > 0 ? static_cast<std::uint32_t>(c.order) : min_order(prob);
    NewtonReport rep;
    const auto t0 = Clock::now();
    auto g = newton_polytope(prob, dense(prob, d), {}, &rep);
    const double t = seconds_since(t0);
    out << "Newton polytope: kept " << rep.kept << " of " << rep.candidates << " candidates\n";
    out << "Support points: " << rep.support_points << " (" << rep.reduced_points << " after reduction)\n";
    out << "Linear programs: " << rep.lp_solves << ", " << g17(t) << " seconds\n\n";
    for (auto &m : rep.diagnostics) out << "note: " << m << '\n';
    print_groupings(out, prob, g);
    return 0;
}

int cmd_certify(const Common &c, const std::string &form, double tol, std::ostream &out) {
    Setup s = prepare(c);
    OptimizeOptions opts;
    opts.form = parse_form(form);
    auto res = optimize(s.problem, s.groupings, s.order, opts);
    if (res.status() != Status::optimal) {
        out << "Status of the solver: " << to_string(res.status()) << '\n';
        return 2;
    }
    const auto cert = sos_certificate(res, tol);
    out << cert.to_string(names_of(s.problem)) << '\n';
    out << "Residual (largest coefficient): " << g17(cert.residual_norm) << '\n';
    return optimality_certificate(res).status == Optimality::optimal ? 0 : 1;
}

int cmd_export(const Common &c, const std::string &form, const std::string &repr, const std::string &path,
               std::ostream &out) {
    Setup s = prepare(c);
    const Representation r = parse_representation(repr);
    Relaxation rel = r == Representation::psd && parse_form(form) == Form::moment
                         ? build_moment(s.problem, s.groupings, s.order)
                         : build_sos(s.problem, s.groupings, s.order, r);
    export_sdpa(rel.program, path);
    out << "wrote " << path << ": " << rel.program.rows << " constraints, " << rel.program.cones.size()
        << " blocks\n";
    return 0;
}

int cmd_plan(std::size_t n, std::uint32_t d, const std::string &cache, unsigned threads, std::ostream &out) {
    SearchOptions so;
    so.threads = threads;
    so.parallel = threads != 1;
    const auto t0 = Clock::now();
    const PointPlan plan = cache.empty() ? search_plan(n, d, so) : cached_plan(cache, n, d, so);
    out << "N=" << plan.N << ", r=(";
    for (std::size_t k = 0; k < plan.r.size(); ++k) out << (k ? "," : "") << plan.r[k];
    out << ")\n";
    out << "U=" << plan.U() << ", L=" << plan.L() << ", nodes=" << plan.c.size()
        << (plan.fallback ? ", geometric fallback" : "") << ", " << g17(seconds_since(t0)) << " seconds\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Polynomial optimization by moment and sum-of-squares relaxations", "polyopt"};
    app.require_subcommand(1);

    Common common;
    std::string form = "moment", repr = "psd", report_path, out_path, cache;
    int rotations = 0;
    double tol = 1e-6, solver_tol = 1e-8;
    std::uint64_t seed = 1;
    std::size_t plan_n = 0;
    std::uint32_t plan_d = 0;
    unsigned threads = 0;

    auto *solve = app.add_subcommand("solve", "solve a relaxation and report bound, certificate and solutions");
    add_common(solve, common);
    solve->add_option("--form", form, "moment or sos")->check(CLI::IsMember({"moment", "sos"}));
    solve->add_option("--representation", repr, "cone for the Gram blocks")->check(CLI::IsMember({"psd", "dd", "sdd"}));
    solve->add_option("--rotations", rotations, "re-solve rounds rotated by the previous Cholesky factor")
        ->check(CLI::NonNegativeNumber);
    solve->add_option("--tol", tol, "rank tolerance for certificate and extraction")->check(CLI::PositiveNumber);
    solve->add_option("--solver-tol", solver_tol, "solver feasibility and gap tolerance")->check(CLI::PositiveNumber);
    solve->add_option("--seed", seed, "seed for the extraction randomness");
    solve->add_option("--report", report_path, "write the JSON report here");

    auto *basis = app.add_subcommand("basis", "print the block groupings of a relaxation");
    add_common(basis, common);

    auto *newton = app.add_subcommand("newton", "apply the Newton polytope filter to the dense basis");
    newton->add_option("file", common.file, "problem file")->required()->check(CLI::ExistingFile);
    newton->add_option("--order", common.order, "relaxation order")->check(CLI::NonNegativeNumber);

    auto *certify = app.add_subcommand("certify", "print the sum-of-squares certificate");
    add_common(certify, common);
    certify->add_option("--form", form, "moment or sos")->check(CLI::IsMember({"moment", "sos"}));
    certify->add_option("--tol", tol, "eigenvalue tolerance for the squares")->check(CLI::PositiveNumber);

    auto *exp = app.add_subcommand("export", "write the conic program in sparse SDPA format");
    add_common(exp, common);
    exp->add_option("--form", form, "moment or sos")->check(CLI::IsMember({"moment", "sos"}));
    exp->add_option("--representation", repr, "cone for the Gram blocks")->check(CLI::IsMember({"psd", "dd", "sdd"}));
    exp->add_option("--out", out_path, "output file")->required();

    auto *plan = app.add_subcommand("plan", "search interpolation points for the interpolant SOS cone");
    plan->add_option("n", plan_n, "number of variables")->required()->check(CLI::PositiveNumber);
    plan->add_option("d", plan_d, "half degree")->required()->check(CLI::PositiveNumber);
    plan->add_option("--cache", cache, "plan cache directory");
    plan->add_option("--threads", threads, "search threads (0: all cores)");

    std::vector<const char *> argv{"polyopt"};
    for (auto &a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try {
        if (*solve) return cmd_solve(common, form, repr, rotations, tol, solver_tol, seed, report_path, out);
        if (*basis) {
            Setup s = prepare(common);
            out << "Relaxation degree: " << s.order << "\nPSD block sizes: "
                << block_summary(s.groupings.block_sizes(s.problem)) << "\n\n";
            print_groupings(out, s.problem, s.groupings);
            return 0;
        }
        if (*newton) return cmd_newton(common, out);
        if (*certify) return cmd_certify(common, form, tol, out);
        if (*exp) return cmd_export(common, form, repr, out_path, out);
        if (*plan) return cmd_plan(plan_n, plan_d, cache, threads, out);
    } catch (const ParseError &e) {
        err << common.file << ':' << e.line() << ':' << e.column() << ": " << e.message() << '\n';
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

} // namespace polyopt
