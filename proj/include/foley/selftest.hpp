#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "foley/models.hpp"

namespace foley {

// Configurations under 5k parameters used by gradient and causality checks.
ModelConfig tiny_config(ModelKind kind);

struct CheckResult {
  std::string suite;  // gradient, causality or alignment
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  std::uint64_t seed = 7;
  std::size_t alignment_cases = 1000;
};

// Gradient, causality and alignment suites; one line per check goes to `log`.
std::vector<CheckResult> run_selftest(std::ostream& log, const SelftestOptions& options = {});
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace foley
