#pragma once

// Toy pose regressor and its training loop: LogCosh warm-up, then the
// weighted tracking / attention losses with an optional symmetry bank, all
// optimized with AdamW under a cosine schedule with hard restarts.

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symtrack/dataset.hpp"
#include "symtrack/features.hpp"
#include "symtrack/losses.hpp"
#include "symtrack/symmetry.hpp"

namespace symtrack {

/// Affine map from standardized features to the 9 regressed parameters.
/// Attention heads score each low-resolution cell as a linear combination of
/// its two cues before the spatial softmax.
struct ToyRegressor {
  Eigen::Matrix<double, 9, kFeatureDim> weights = Eigen::Matrix<double, 9, kFeatureDim>::Zero();
  Eigen::Matrix<double, 9, 1> bias = Eigen::Matrix<double, 9, 1>::Zero();
  std::array<double, 2> attn_fg{0.0, 0.0};
  std::array<double, 2> attn_unoccl{0.0, 0.0};
  FeatureVec feature_mean = FeatureVec::Zero();
  FeatureVec feature_scale = FeatureVec::Ones();

  /// Zero weights with the rotation bias at (1,0,0, 0,1,0).
  static ToyRegressor initial();
};

/// Standardized features (x - mean) / scale.
FeatureVec standardize_features(const ToyRegressor& model, const FeatureVec& f);
PoseDelta9 forward(const ToyRegressor& model, const FeatureVec& features);
/// Sets feature_mean / feature_scale from streaming statistics of `features`.
/// Constant features keep scale 1. Throws InsufficientSamples below 2 samples.
void fit_feature_scaling(ToyRegressor& model, const std::vector<FeatureVec>& features);

/// Attention logits for one head over the grid.
std::vector<double> attention_logits(const std::array<double, 2>& head, const AttentionInput& in);

struct TrainSample {
  FeatureVec features = FeatureVec::Zero();
  Vec3 gt_trans = Vec3::Zero();  // normalized to [-1, 1]
  Mat3 gt_rot = Mat3::Identity();
  std::optional<AttentionInput> attention;

  /// Ground truth as the 9 regressed parameters.
  std::array<double, 9> target() const;
};

TrainSample make_train_sample(const Sample& s);

struct OptimConfig {
  double lr = 1e-3;
  double lr_min = 1e-5;
  double weight_decay = 1e-5;
  int restart_period = 10;
  int warmup_epochs = 25;
  std::size_t batch_size = 16;
  int epochs = 50;
  std::size_t b2 = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_delta_m = 0.02;
  std::uint64_t seed = 0;

  /// Throws ConfigError on a non-positive or otherwise invalid field.
  void validate() const;
};

/// Cosine annealing from lr to lr_min over restart_period epochs, then a hard
/// restart. `epoch` may be fractional.
double learning_rate(const OptimConfig& cfg, double epoch);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

struct LinearScorer {
  Eigen::MatrixXd weights;  // B2 x F
  Eigen::VectorXd bias;     // B2

  static LinearScorer zeros(std::size_t b2);
  Eigen::VectorXd logits(const FeatureVec& f) const;
};

/// Everything the optimizer owns; also the checkpoint contents.
struct TrainState {
  ToyRegressor model = ToyRegressor::initial();
  TaskWeights weights;
  std::optional<SymmetryBank> bank;
  std::optional<LinearScorer> scorer;
  Mat3 lambda_gs = Mat3::Identity();
  AdamState adam;
  int epoch = 0;
};

struct EpochRecord {
  int epoch = 0;
  bool warmup = false;
  double loss = 0.0;
  double trans_err_mm = 0.0;
  double rot_err_deg = 0.0;
  TaskWeights weights;
  std::size_t skipped = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// Runs cfg.epochs epochs starting at state.epoch. Epochs below
/// cfg.warmup_epochs minimize LogCosh on the model alone; later epochs
/// minimize the weighted losses over model, v, s2..s4 and (when present) the
/// bank. s1 keeps its value.
/// Samples whose loss is not differentiable are skipped and counted.
TrainHistory train(TrainState& state, const std::vector<TrainSample>& data, const OptimConfig& cfg);

// Flat parameter layout used by the optimizer.
struct ParamLayout {
  std::size_t weights = 0;
  std::size_t bias = 0;
  std::size_t attn = 0;
  std::size_t task = 0;  // v1, v2, s1, s2, s3, s4
  std::size_t bank = 0;
  std::size_t total = 0;
};

ParamLayout param_layout(const TrainState& state);
std::vector<double> pack_params(const TrainState& state);
void unpack_params(TrainState& state, const std::vector<double>& theta);

/// One AdamW update of `theta` with gradient `g`. Entries with
/// active[i] == false are left untouched; entries with decay[i] == true are
/// then multiplied by (1 - weight_decay).
void adamw_step(std::vector<double>& theta, const std::vector<double>& g, const std::vector<bool>& active,
                const std::vector<bool>& decay, double lr, const OptimConfig& cfg, AdamState& adam);

/// Per-parameter weight-decay mask: model weights and attention scales only.
std::vector<bool> decay_mask(const TrainState& state);

/// Softmax cross-entropy training of a linear scorer against oracle labels.
LinearScorer train_scorer(const std::vector<FeatureVec>& features, const std::vector<std::size_t>& labels,
                          std::size_t b2, int iterations, double lr);

/// Argmax of the scorer logits; ties go to the lowest index.
std::size_t select_trainable(const SymmetryBank& bank, const LinearScorer& scorer, const FeatureVec& features);

/// Oracle labels of the current model on `data`.
std::vector<std::size_t> oracle_labels(const TrainState& state, const std::vector<TrainSample>& data);

nlohmann::json checkpoint_to_json(const TrainState& state);
TrainState checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace symtrack
