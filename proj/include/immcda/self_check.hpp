#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace immcda {

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfCheckOptions {
  std::uint64_t seed = 1;
  int episodes = 200;
  int fuzz_steps = 10000;
  int sampling_draws = 100000;
  int tangency_trials = 10000;
};

/// Runs the module invariants at desk scale. Never throws; an exception inside a
/// check is reported as a failure of that check.
[[nodiscard]] std::vector<CheckResult> runSelfChecks(const SelfCheckOptions& options = {});

}  // namespace immcda
