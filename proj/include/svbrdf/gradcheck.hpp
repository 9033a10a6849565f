#pragma once

#include <string>
#include <vector>

namespace svbrdf {

// One finite-difference suite's outcome. `worst_rel` is the largest
// relative error |analytic - fd| / max(|analytic|, |fd|, floor) observed.
struct GradCheckResult {
  std::string name;
  double worst_rel = 0.0;
  double tolerance = 0.0;
  int checks = 0;
  bool pass() const { return worst_rel <= tolerance; }
};

// Every finite-difference suite: shading partials, renderer backward,
// rendering-loss gradient, each tape operation, and the full network through
// the rendering loss at 16x16. Deterministic.
std::vector<GradCheckResult> run_gradcheck();

}  // namespace svbrdf
