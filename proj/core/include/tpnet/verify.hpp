#pragma once

#include <string>
#include <vector>

namespace tpnet::verify {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst error observed
  double tolerance = 0.0;
};

struct Report {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  void append(const Report& other);
};

// Round trips, matrix-oracle agreement, Hadamard self-inversion.
Report transform_suite();
// Dyadic convolution under the Hadamard transform and symmetric convolution
// under the DCT, against brute-force oracles.
Report theorem_suite();
// Finite-difference checks of every differentiable op in double precision.
Report gradient_suite();
Report run_all();

// One "PASS/FAIL suite/name measured (tol)" line per check.
std::string format(const Report& report);

}  // namespace tpnet::verify
