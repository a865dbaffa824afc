#pragma once

// Dual-number gradients of every loss family checked against central
// differences on random configurations.

#include <cstdint>
#include <string>
#include <vector>

namespace symtrack {

struct GradcheckFamily {
  std::string name;
  double max_rel_err = 0.0;
  std::uint64_t worst_seed = 0;  // configuration seed of the worst trial
  std::size_t trials = 0;
  std::size_t resampled = 0;  // draws rejected as too close to a singular point
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Rotation pairs whose geodesic angle is within this many radians of 0 or
/// pi are treated as singular and redrawn.
inline constexpr double kGradcheckAngleMargin = 0.05;

/// Runs `trials` configurations of each family: geodesic rotation loss,
/// tracking loss, multi-task loss, bank uniformity term, LogCosh and
/// attention BCE. Configuration seeds derive from `seed`.
std::vector<GradcheckFamily> run_gradcheck(std::size_t trials, std::uint64_t seed);

/// Gradient check of a single configuration; returns the max relative error.
double gradcheck_config(const std::string& family, std::uint64_t config_seed);

}  // namespace symtrack
