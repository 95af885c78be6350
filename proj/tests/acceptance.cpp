// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "deform/checks.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  const int r = argc > 1 ? std::atoi(argv[1]) : 33;
  using namespace deform;
  std::vector<CriterionResult> results{
      check_linearization(r),     check_greens_formula(r),      check_weight_construction(r),
      check_dirichlet_solver(r),  check_generic_detection(r),   check_static_consequences(r),
      check_fredholm_structure(r), check_linearized_solve(r),   check_picard(r),
      check_hardy(r)};
  print_results(std::cout, results);
  int failed = 0;
  for (const auto& c : results) failed += !c.pass();
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - failed << "/" << results.size() << "\n";
  return failed ? 1 : 0;
}
