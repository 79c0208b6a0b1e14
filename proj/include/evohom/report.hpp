#pragma once

#include <string>
#include <vector>

namespace evohom {

// Outcome of one named property check. `measured` is the statistic the check bounds and
// `threshold` the bound it is compared against; `witness` names an offending input if any.
struct CheckResult {
  std::string name;
  bool passed = true;
  double measured = 0.0;
  double threshold = 0.0;
  std::string witness;
};

struct CheckList {
  std::vector<CheckResult> checks;

  void add(CheckResult c) { checks.push_back(std::move(c)); }
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed)
        return false;
    return true;
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name)
        return &c;
    return nullptr;
  }
};

// Passed iff measured <= threshold.
inline CheckResult bounded_check(std::string name, double measured, double threshold, std::string witness = {}) {
  CheckResult c{std::move(name), measured <= threshold, measured, threshold, {}};
  if (!c.passed)
    c.witness = std::move(witness);
  return c;
}

} // namespace evohom
