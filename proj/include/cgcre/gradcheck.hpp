#pragma once

#include <string>
#include <vector>

namespace cgcre {

// Finite-difference verification of every layer's analytic gradients on
// small synthetic inputs, plus the end-to-end joint objective.
struct GradCheckResult {
  std::string component;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

std::vector<std::string> gradcheck_components();

// Runs the named components (all when empty). corrupt_component, when set,
// injects a doubled gradient into that component's loss so the harness's
// failure path can be exercised.
std::vector<GradCheckResult> run_gradcheck(const std::vector<std::string>& components = {},
                                           double epsilon = 1e-5,
                                           const std::string& corrupt_component = "");

}  // namespace cgcre
