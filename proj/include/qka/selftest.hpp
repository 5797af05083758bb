#pragma once

#include <string>
#include <vector>

namespace qka::selftest {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // empty on pass
};

/// Runs the embedded sanity checks: codebook-soundness, cluster-correlations,
/// golden-example-run, hash-homomorphism. `inject_fault` names a check whose
/// inputs are deliberately tampered, to prove the harness reports failures;
/// empty means run honestly.
std::vector<CheckResult> run_selftest(const std::string& inject_fault = "");

}  // namespace qka::selftest
