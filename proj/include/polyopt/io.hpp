#pragma once

#include "polyopt/certify.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polyopt {

// Problem text format.
//
//   problem    ::= { empty-line } header { statement | empty-line }
//   header     ::= "vars" varlist ( "real" | "complex" ) EOL
//   varlist    ::= ident { ident } | ident ".." ident        x1..x4 expands to x1 x2 x3 x4
//   statement  ::= ( "min" poly | "zero" poly | "nonneg" poly | "psd" matrix ) EOL
//   matrix     ::= "[" row { [ "," | ";" ] row } "]"
//   row        ::= "[" poly { "," poly } "]"
//   poly       ::= [ "+" | "-" ] term { ( "+" | "-" ) term }
//   term       ::= factor { "*" factor }
//   factor     ::= atom [ "^" uint ]
//   atom       ::= number [ "im" ] | "im" | ident | "conj" "(" ident ")" | "(" poly ")"
//
// "#" starts a comment running to the end of the line; line breaks inside brackets and
// parentheses are ignored. At most one "min" line; without it the objective is 0.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string &message);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    const std::string &message() const { return message_; }

private:
    std::size_t line_, column_;
    std::string message_;
};

PopProblem parse_problem(std::string_view text);
PopProblem read_problem(const std::filesystem::path &file);
// Text in the grammar above; coefficients carry 17 significant digits, so parsing it back
// reproduces the problem exactly.
std::string print_problem(const PopProblem &problem);

// Sparse SDPA text format. The standard form min <c, x>, A x = b maps onto the SDPA dual
// max F0 . Y, Fi . Y = ci with F0 = -c and ci = bi; nonneg cones become diagonal blocks.
// The objective offset travels in the comment line "* offset <value>".
class UnsupportedCone : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string to_sdpa(const ConicProgram &program);
ConicProgram from_sdpa(std::string_view text);
void export_sdpa(const ConicProgram &program, const std::filesystem::path &file);
ConicProgram import_sdpa(const std::filesystem::path &file);

struct ReportSolution {
    std::vector<Coeff> point;
    double quality = 0.0;
};

struct Report {
    std::string status;           // solver status
    std::string method;           // sparsity method
    std::string form;             // moment | sos
    std::string representation;   // psd | dd | sdd
    std::uint32_t order = 0;
    double bound = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> bound_history; // one entry per rotation round, starting with the unrotated solve
    std::string certificate;           // Optimal | Unknown
    std::vector<std::size_t> ranks;
    std::vector<ReportSolution> solutions;
    std::map<std::string, double> timings; // seconds
    std::vector<std::pair<std::size_t, std::size_t>> block_sizes; // side -> count
    std::vector<std::string> diagnostics;

    bool operator==(const Report &) const;
};

std::string to_json(const Report &report);
Report report_from_json(std::string_view json);

// Command-line driver; returns the process exit code (0 optimal, 1 bound only, 2 failure).
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace polyopt
