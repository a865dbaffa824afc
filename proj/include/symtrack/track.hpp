#pragma once

// Frame-by-frame tracking harness with previous-pose feedback, periodic
// re-initialization, failure counting and report emission.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symtrack/fit.hpp"
#include "symtrack/losses.hpp"
#include "symtrack/symmetry.hpp"
#include "symtrack/synth.hpp"

namespace symtrack {

struct TrajectoryFrame {
  Pose gt;
  std::optional<RgbdFrame> observed;
  double occlusion = 0.0;  // fraction of the object's box width covered
};

struct Trajectory {
  std::string scenario_name;
  std::vector<TrajectoryFrame> frames;
  std::vector<std::size_t> flip_frames;  // only set by the flip-injection scenario

  void validate() const;
};

struct EstimatorInput {
  const Trajectory* traj = nullptr;
  std::size_t frame = 0;
  Pose prior;    // tracker state before this frame
  int pass = 0;  // 0 for the first query, >0 for reflective re-queries
};

struct Estimator {
  std::string name;
  double max_delta_m = 0.05;  // scale of the emitted normalized translation
  std::function<PoseDelta9(const EstimatorInput&)> estimate;
};

/// Exact delta from the prior state to ground truth.
Estimator make_oracle_estimator(double max_delta_m = 0.05);
/// Ground-truth frame-to-frame motion plus a constant world-frame translation
/// bias (meters) each frame.
Estimator make_bias_estimator(const Vec3& bias_m, double max_delta_m = 0.05);
/// Ground-truth frame-to-frame motion with Gaussian translation (mm) and
/// rotation (degrees, about a random axis) noise.
Estimator make_noise_estimator(double sigma_trans_mm, double sigma_rot_deg, std::uint64_t seed,
                               double max_delta_m = 0.05);
/// Toy regressor on features of the observed frame against a render of the
/// prior pose. Frames without an observation raise an error.
Estimator make_model_estimator(TrainState state, TriMesh mesh, Camera cam, double max_delta_m = 0.02);
/// Wraps `base` so that on the first pass of every listed frame the resulting
/// absolute rotation is flipped by 180 degrees about x.
Estimator inject_flips(Estimator base, std::vector<std::size_t> frames);

struct TrackPolicy {
  int reset_interval = 15;
  double fail_trans_mm = 30.0;
  double fail_rot_deg = 20.0;
  std::optional<ReflectiveConfig> reflective;

  void validate() const;
};

struct FrameRecord {
  double trans_err_mm = 0.0;
  double rot_err_deg = 0.0;
  bool reset = false;
  bool failure = false;
  bool flagged = false;           // reflective filter raised at this frame
  bool estimator_failed = false;  // estimator threw; state carried over

  bool operator==(const FrameRecord&) const = default;
};

/// Errors just before and just after one re-initialization.
struct ResetEvent {
  std::size_t frame = 0;
  double pre_trans_mm = 0.0;
  double pre_rot_deg = 0.0;
  double post_trans_mm = 0.0;
  double post_rot_deg = 0.0;
  bool failure = false;

  bool operator==(const ResetEvent&) const = default;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;

  bool operator==(const MetricSummary&) const = default;
};

struct TrackSummary {
  MetricSummary trans_mm;
  MetricSummary rot_deg;
  std::size_t failures = 0;

  bool operator==(const TrackSummary&) const = default;
};

struct TrackReport {
  std::string scenario;
  std::string estimator;
  TrackPolicy policy;
  std::vector<FrameRecord> frames;
  std::vector<ResetEvent> resets;
  std::size_t window_failures = 0;
  std::size_t estimator_failures = 0;

  /// Window failures plus frames where the estimator failed.
  std::size_t failures() const { return window_failures + estimator_failures; }
};

/// Translation error in mm and geodesic rotation error in degrees.
std::pair<double, double> pose_errors(const Pose& est, const Pose& gt);

TrackReport run_track(const Trajectory& traj, const Estimator& estimator, const TrackPolicy& policy);

/// Mean and sample standard deviation over all non-reset frames.
TrackSummary metrics(const TrackReport& report);
MetricSummary summarize(const std::vector<double>& values);

nlohmann::json report_to_json(const TrackReport& report);
TrackReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const TrackReport& report);
/// Writes `<dir>/<stem>.json` or `<dir>/<stem>.csv`; returns the path.
std::string emit_report(const TrackReport& report, const std::string& dir, const std::string& stem,
                        const std::string& format);

/// One "scenario: trans mean ± std | rot mean ± std | fails" line.
std::string summary_row(const TrackReport& report);

// ---------------------------------------------------------------------------
// Scripted benchmark trajectories

struct ScenarioOptions {
  std::size_t frames = 200;
  bool render = false;  // also produce observed RGB-D frames
  TriMesh mesh;         // required when rendering
  Camera cam;
  NoiseParams noise;
};

std::vector<std::string> scenario_names();
/// Throws ConfigError for an unknown name.
Trajectory make_scenario(const std::string& name, std::uint64_t seed, const ScenarioOptions& opts);

struct TrackJob {
  const Trajectory* traj = nullptr;
  Estimator estimator;
  TrackPolicy policy;
};

/// Runs independent jobs on up to `workers` threads; results keep job order.
std::vector<TrackReport> run_track_jobs(const std::vector<TrackJob>& jobs, unsigned workers);

}  // namespace symtrack
