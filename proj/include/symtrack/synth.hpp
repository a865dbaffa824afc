#pragma once

// Synthetic RGB-D frame pairs: a flat-shaded z-buffer rasterizer, background
// and occluder compositing with ground-truth masks, photometric augmentation
// and an axial/lateral depth noise model.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "symtrack/geom.hpp"
#include "symtrack/losses.hpp"
#include "symtrack/mask.hpp"

namespace symtrack {

using Rng = std::mt19937_64;

struct RgbdFrame {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> rgb;     // w*h*3, row-major
  std::vector<std::uint16_t> depth;  // millimeters, 0 = invalid
  BinaryMask fg_mask;
  BinaryMask unoccl_mask;

  RgbdFrame() = default;
  RgbdFrame(int width, int height)
      : w(width),
        h(height),
        rgb(static_cast<std::size_t>(width * height * 3), 0),
        depth(static_cast<std::size_t>(width * height), 0),
        fg_mask(width, height),
        unoccl_mask(width, height) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y * w + x); }
  bool operator==(const RgbdFrame&) const = default;
};

struct Camera {
  int width = 150;
  int height = 150;
  double fx = 220.0;
  double fy = 220.0;
  double cx = 75.0;
  double cy = 75.0;
  double near = 0.05;
  double far = 5.0;
};

/// Depth noise. Axial sigma (meters):
///   a0 + a1 (z - a2)^2 + a3 / sqrt(z) * theta^2 / (pi/2 - theta)^2
/// Lateral sigma (pixels): b0 + b1 * theta / (pi/2 - theta), per image axis.
/// theta is |rotation about y| of the object pose. Defaults are a configuration
/// choice modeled on published Kinect measurements.
struct NoiseParams {
  double a0 = 0.0012;
  double a1 = 0.0019;
  double a2 = 0.4;
  double a3 = 0.0001;
  double lateral_x_b0 = 0.8;
  double lateral_x_b1 = 0.035;
  double lateral_y_b0 = 0.8;
  double lateral_y_b1 = 0.035;

  double sigma_axial(double z, double theta_y) const;
  double sigma_lateral_x(double theta_y) const;
  double sigma_lateral_y(double theta_y) const;

  static NoiseParams zero() { return {0, 0, 0, 0, 0, 0, 0, 0}; }
};

struct AugmentConfig {
  double p_occluder = 0.60;
  double p_full_occlusion = 0.15;
  double p_contrast = 0.5;
  double alpha_min = 0.0;
  double alpha_max = 3.0;
  double beta_min = -50.0;
  double beta_max = 50.0;
  double p_gamma = 0.5;
  double gamma_min = 0.0;
  double gamma_max = 2.0;
  double rgb_noise_sigma = 2.0 / 255.0;  // fraction of full scale
  std::array<double, 3> hsv_noise_sigma{0.02, 0.05, 0.05};
  int blur_kernel = 3;
  int depth_downsample_factor = 2;
  double p_modality_dropout = 0.1;

  /// Every augmentation disabled.
  static AugmentConfig none();
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Per-axis sampling half-ranges of a frame-to-frame pose change.
struct DeltaRanges {
  double trans_m = 0.015;
  double rot_deg = 10.0;
};

/// Deterministic per-face colors.
std::vector<std::array<std::uint8_t, 3>> default_albedo(const TriMesh& mesh, unsigned seed = 1);

/// Throws OutOfFrustum when no pixel is covered.
RgbdFrame render(const TriMesh& mesh, const Pose& pose, const Camera& cam,
                 const std::vector<std::array<std::uint8_t, 3>>& albedo);

/// Object pose that faces the camera from golden-spiral viewpoint `index`.
Pose viewpoint_pose(std::size_t index, std::size_t n_viewpoints, double distance_m);

struct PosePair {
  Pose prev;
  Pose cur;
  Pose delta;  // cur = compose(prev, delta)
};

Pose sample_delta(Rng& rng, const DeltaRanges& ranges);
PosePair sample_pose_pair(Rng& rng, std::size_t viewpoint_index, std::size_t n_viewpoints, const DeltaRanges& ranges,
                          double distance_m);

struct CompositeResult {
  RgbdFrame frame;
  bool occluded = false;
  bool fully_occluded = false;
};

/// Background fill where the object is absent, then an optional occluder
/// layer by depth test. fg_mask is kept; unoccl_mask = fg_mask & ~occluder.
CompositeResult composite(const RgbdFrame& object, const RgbdFrame& background, const RgbdFrame* occluder,
                          const AugmentConfig& cfg, Rng& rng);

RgbdFrame kinect_noise(const RgbdFrame& frame, const Pose& pose, const NoiseParams& np, Rng& rng);

RgbdFrame augment_photometric(const RgbdFrame& frame, const AugmentConfig& cfg, Rng& rng);

/// Procedural textured background with a planar depth behind `min_depth_m`.
RgbdFrame procedural_background(const Camera& cam, double min_depth_m, Rng& rng);

}  // namespace symtrack
