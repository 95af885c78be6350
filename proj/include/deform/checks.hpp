// Acceptance checks shared by `deform verify` and the acceptance binary.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deform {

struct CheckRow {
  std::string name;
  double value = 0;
  std::string relation;  // "<=", ">=", "==", "in"
  double lo = 0, hi = 0; // bound (lo) or interval [lo, hi]
  bool pass = false;
};

CheckRow at_most(std::string name, double value, double bound);
CheckRow at_least(std::string name, double value, double bound);
CheckRow equals(std::string name, double value, double target);
CheckRow within(std::string name, double value, double lo, double hi);

struct CriterionResult {
  int id = 0;  // 0: auxiliary check without a criterion number
  std::string title;
  std::vector<CheckRow> rows;
  std::string note;
  bool pass() const;
};

// Each takes the base resolution r; refinement studies use r, (3r-1)/2 and 2r-1.
CriterionResult check_linearization(int r);        // 1
CriterionResult check_greens_formula(int r);       // 2
CriterionResult check_weight_construction(int r);  // 3
CriterionResult check_dirichlet_solver(int r);     // 4
CriterionResult check_generic_detection(int r);    // 5
CriterionResult check_static_consequences(int r);  // 6
CriterionResult check_fredholm_structure(int r);   // 7
CriterionResult check_linearized_solve(int r);     // 8
CriterionResult check_picard(int r);               // 9
CriterionResult check_hardy(int r);                // 10
CriterionResult check_a4_support(int r);

/// operators | weights | solver | generic | iteration | all. Throws ConfigError otherwise.
std::vector<CriterionResult> run_suite(const std::string& suite, int r = 33);

/// One PASS/FAIL line per criterion followed by its rows.
void print_results(std::ostream& os, const std::vector<CriterionResult>& results, bool rows = true);

}  // namespace deform
