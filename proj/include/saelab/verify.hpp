#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace saelab::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  double statistic = 0.0;  // the measured quantity the threshold applies to
  double threshold = 0.0;
  std::string detail;                  // short human-readable context
  std::vector<std::string> ops_used;   // theory operations this check exercises
};

struct VerifyOptions {
  std::vector<std::string> only;  // empty = full suite
  std::uint64_t seed = 7;
  long stationarity_samples = 200000;
  int gap_trials = 1000;
  // test hook: name of a check whose comparison is deliberately broken so
  // the failure path can be exercised end to end
  std::string inject_fault;
};

const std::vector<std::string>& check_names();
const std::vector<std::string>& theory_operation_names();

std::vector<CheckResult> run_checks(const VerifyOptions& opt);

// True when the results jointly exercise every theory operation; only
// meaningful for a full-suite run.
bool coverage_complete(const std::vector<CheckResult>& results);

}  // namespace saelab::verify
