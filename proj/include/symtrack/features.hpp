#pragma once

// Hand-crafted stand-ins for CNN features, computed from an observed /
// predicted frame pair.

#include <Eigen/Core>
#include <vector>

#include "symtrack/mask.hpp"
#include "symtrack/synth.hpp"

namespace symtrack {

inline constexpr int kFeatureDim = 11;
using FeatureVec = Eigen::Matrix<double, kFeatureDim, 1>;

/// Layout:
///   [0]      mean depth difference (observed - predicted) over the shared
///            foreground, meters
///   [1, 2]   foreground centroid displacement, pixels / image width
///   [3, 7]   observed mask: area fraction, mu20, mu11, mu02 (normalized
///            central moments) and log area ratio observed / predicted
///   [8, 10]  mean RGB difference over the shared foreground, in [-1, 1]
FeatureVec frame_features(const RgbdFrame& observed, const RgbdFrame& predicted);

/// Side length of the low-resolution attention grid.
inline constexpr int kAttentionGrid = 15;

/// Per-cell cues for the attention heads and the downsampled masks they are
/// supervised with.
struct AttentionInput {
  std::vector<double> cue_depth_band;  // fraction of the cell near the predicted object depth
  std::vector<double> cue_surface;     // fraction of the cell matching the predicted surface
  BinaryMask fg;
  BinaryMask unoccl;
};

AttentionInput attention_input(const RgbdFrame& observed, const RgbdFrame& predicted);

}  // namespace symtrack
