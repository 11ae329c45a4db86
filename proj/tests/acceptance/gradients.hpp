#pragma once

// Interface of the double-precision gradient checks. Only plain types cross
// this boundary, so callers can be built against the single-precision library.
#include <cstddef>
#include <string>
#include <vector>

namespace sprx::acceptance {

struct GradientCase {
  std::string name;
  double worst_error = 0;  // max |fd - ad| / max(1, |fd|) over seeds and elements
};

/// Runs every differentiable layer and a relaxed spiking network against
/// central differences for seeds 1..seeds.
std::vector<GradientCase> gradient_checks(std::size_t seeds, double step);

}  // namespace sprx::acceptance
