#pragma once

// Dataset generation and on-disk layout.
//
// Per sample i the directory holds
//   rgb_<i>.ppm, depth_<i>.pgm, fg_<i>.pgm, unoccl_<i>.pgm   observed frame
//   pred_rgb_<i>.ppm, pred_depth_<i>.pgm, pred_fg_<i>.pgm     rendered prediction
//   meta_<i>.json                                            poses, gt_delta, seed
// and manifest.json lists the sample count, master seed and a config echo.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symtrack/synth.hpp"

namespace symtrack {

struct GenConfig {
  AugmentConfig aug;
  NoiseParams noise;
  DeltaRanges delta;
  double max_delta_m = 0.02;
  double distance_m = 0.6;
  std::size_t n_viewpoints = 1000;
  Camera cam;
  Vec3 occluder_radii{0.035, 0.02, 0.05};
};

struct Sample {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  RgbdFrame observed;
  RgbdFrame predicted;
  Pose pose_prev;
  Pose pose_cur;
  PoseDelta9 gt_delta;
  bool occluded = false;
  bool fully_occluded = false;
};

/// Counter-based per-sample seed; independent of generation order.
std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index);

Sample generate_sample(const TriMesh& mesh, const GenConfig& cfg, std::uint64_t master_seed, std::size_t index);

/// Generates samples [0, n) on `workers` threads and hands each to `fn`
/// (called concurrently; `fn` must be thread-safe).
void for_each_sample(std::size_t n, const TriMesh& mesh, const GenConfig& cfg, std::uint64_t master_seed,
                     unsigned workers, const std::function<void(Sample&&)>& fn);

std::vector<Sample> generate_dataset(std::size_t n, const TriMesh& mesh, const GenConfig& cfg,
                                     std::uint64_t master_seed, unsigned workers = 1);

/// Flat key/value echo of every configurable field.
nlohmann::json config_to_json(const GenConfig& cfg);
/// Applies a flat JSON object of overrides. Unknown keys, wrong types and
/// invalid values raise ConfigError naming the field.
GenConfig apply_config_overrides(GenConfig cfg, const nlohmann::json& overrides);
GenConfig load_config_file(const std::string& path, GenConfig base = {});

nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

void write_sample(const std::string& dir, const Sample& s, double max_delta_m);
Sample read_sample(const std::string& dir, std::size_t index);

struct DatasetManifest {
  std::size_t sample_count = 0;
  std::uint64_t master_seed = 0;
  GenConfig config;
};

/// Writes manifest.json and returns its path.
std::string write_manifest(const std::string& dir, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& dir);

/// Generates and writes a full dataset; returns the manifest path.
std::string write_dataset(const std::string& dir, std::size_t n, const TriMesh& mesh, const GenConfig& cfg,
                          std::uint64_t master_seed, unsigned workers);

}  // namespace symtrack
