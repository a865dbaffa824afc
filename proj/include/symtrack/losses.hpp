#pragma once

// Tracking, multi-task, symmetry and attention losses.
//
// Each loss has a scalar-generic template (used with dual numbers for
// gradients) and a plain double overload on the domain types.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "symtrack/autodiff.hpp"
#include "symtrack/geom.hpp"
#include "symtrack/mask.hpp"

namespace symtrack {

/// Regressed pose change: normalized translation in [-1, 1] and Rot6D.
/// Flattened order is (tx, ty, tz, rx0, rx1, rx2, ry0, ry1, ry2).
struct PoseDelta9 {
  Vec3 trans = Vec3::Zero();
  Rot6D rot;

  std::array<double, 9> to_array() const;
  static PoseDelta9 from_array(std::span<const double> a);
};

/// Translation divided by max_delta_m and clamped to [-1, 1]; rotation as
/// its first two rows.
PoseDelta9 encode_delta(const Pose& delta, double max_delta_m);
/// Inverse of encode_delta. Throws DegenerateInput for an unusable Rot6D.
Pose decode_delta(const PoseDelta9& d, double max_delta_m);

/// Learnable log-variance task weights, all initialized to zero.
struct TaskWeights {
  double v1 = 0.0;
  double v2 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;
};

struct AttentionMap {
  int w = 0;
  int h = 0;
  std::vector<double> values;
};

inline constexpr double kXiFloor = 1e-6;
inline constexpr double kBceEps = 1e-12;

// ---------------------------------------------------------------------------
// Tracking loss

template <class T>
T loss_rot(const Mat3T<T>& dr_hat, const Mat3& dr_gt, const Mat3& lambda_gs, const Mat3T<T>& g_star,
           SingularPolicy policy = SingularPolicy::kClamp) {
  const Mat3T<T> lam = lambda_gs.cast<T>();
  return geodesic_distance<T>(dr_hat * g_star * lam, dr_gt.cast<T>() * lam, policy);
}

template <class T>
T translation_mse(std::span<const T> pred_trans, const Vec3& gt_trans) {
  T acc(0.0);
  for (int i = 0; i < 3; ++i) {
    const T d = pred_trans[static_cast<std::size_t>(i)] - T(gt_trans[i]);
    acc += d * d;
  }
  return acc / T(3.0);
}

/// e^-v1 MSE(t_hat, t) + v1 + v2 + e^-v2 loss_rot; `pred` holds the 9 flattened
/// PoseDelta9 parameters.
template <class T>
T loss_track(std::span<const T> pred, const Vec3& gt_trans, const Mat3& gt_rot, const T& v1, const T& v2,
             const Mat3& lambda_gs, const Mat3T<T>& g_star, SingularPolicy policy = SingularPolicy::kClamp) {
  using std::exp;
  const Vec3T<T> rx(pred[3], pred[4], pred[5]);
  const Vec3T<T> ry(pred[6], pred[7], pred[8]);
  const Mat3T<T> dr_hat = matrix_from_rot6d<T>(rx, ry);
  const T mse = translation_mse<T>(pred.subspan(0, 3), gt_trans);
  const T rot = loss_rot<T>(dr_hat, gt_rot, lambda_gs, g_star, policy);
  return exp(-v1) * mse + v1 + v2 + exp(-v2) * rot;
}

template <class T>
T loss_multitask(const T& l_track, const T& l_unoccl, const T& l_foregr, const T& s1, const T& s2, const T& s3) {
  using std::exp;
  return exp(-s1) * l_track + exp(-s2) * l_unoccl + exp(-s3) * l_foregr + s1 + s2 + s3;
}

// ---------------------------------------------------------------------------
// Symmetry-bank penalty

/// Mean geodesic distance over all ordered pairs of distinct entries.
template <class T>
T bank_spread(std::span<const Mat3T<T>> g, SingularPolicy policy = SingularPolicy::kClamp) {
  const std::size_t n = g.size();
  T acc(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      acc += T(2.0) * geodesic_distance<T>(g[k], g[j], policy);
    }
  }
  return acc / T(static_cast<double>(n * (n - 1)));
}

/// 1 / max(xi, 1e-6) with xi the bank spread.
template <class T>
T uniformity_penalty(std::span<const Mat3T<T>> g, SingularPolicy policy = SingularPolicy::kClamp) {
  T xi = bank_spread<T>(g, policy);
  if (xi < T(kXiFloor)) xi = T(kXiFloor);
  return T(1.0) / xi;
}

/// loss + e^-s4 * mean(penalties) + s4.
template <class T>
T loss_symmetric(const T& loss, std::span<const T> penalties, const T& s4) {
  using std::exp;
  T mean(0.0);
  for (const T& p : penalties) mean += p;
  mean /= T(static_cast<double>(penalties.size()));
  return loss + exp(-s4) * mean + s4;
}

// ---------------------------------------------------------------------------
// Attention supervision

template <class T>
std::vector<T> spatial_softmax(std::span<const T> raw) {
  using std::exp;
  T mx = raw[0];
  for (const T& v : raw) {
    if (v > mx) mx = v;
  }
  std::vector<T> out(raw.size());
  T sum(0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = exp(raw[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

/// Target is the mask scaled to sum 1 (all zeros for an empty mask).
std::vector<double> normalized_mask_target(const BinaryMask& mask);

/// Mean binary cross-entropy between a softmaxed map and a normalized target.
template <class T>
T bce_attention(std::span<const T> map, std::span<const double> target) {
  using std::log;
  if (map.size() != target.size()) throw DimensionMismatch("bce_attention: map and mask sizes differ");
  T acc(0.0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double t = target[i];
    acc -= T(t) * log(map[i] + T(kBceEps)) + T(1.0 - t) * log(T(1.0) - map[i] + T(kBceEps));
  }
  return acc / T(static_cast<double>(map.size()));
}

// ---------------------------------------------------------------------------
// Warm-up loss

/// sum_i ln cosh(pred_i - gt_i), overflow-safe.
template <class T>
T logcosh(std::span<const T> pred, std::span<const double> gt) {
  using std::abs;
  using std::exp;
  using std::log;
  if (pred.size() != gt.size()) throw DimensionMismatch("logcosh: size mismatch");
  T acc(0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T a = abs(pred[i] - T(gt[i]));
    acc += a + log((T(1.0) + exp(T(-2.0) * a)) / T(2.0));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Plain double API on domain types

double loss_rot(const Mat3& dr_hat, const Mat3& dr_gt, const Mat3& lambda_gs, const Mat3& g_star);
double loss_track(const PoseDelta9& pred, const Vec3& gt_trans, const Mat3& gt_rot, const TaskWeights& w,
                  const Mat3& lambda_gs, const Mat3& g_star);
double loss_multitask(double l_track, double l_unoccl, double l_foregr, const TaskWeights& w);
double uniformity_penalty(std::span<const Mat3> g);
double bank_spread(std::span<const Mat3> g);
double loss_symmetric(double loss, std::span<const double> penalties, double s4);
AttentionMap spatial_softmax(int w, int h, std::span<const double> raw);
double bce_attention(const AttentionMap& map, const BinaryMask& mask);
double logcosh(const PoseDelta9& pred, const PoseDelta9& gt);

// ---------------------------------------------------------------------------
// Streaming statistics

struct WelfordState {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  /// Sample variance m2 / (count - 1); 0 for fewer than two samples.
  double variance() const { return count >= 2 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

WelfordState welford_update(WelfordState s, double x);
/// (x - mean) / sqrt(variance); throws InsufficientSamples when count < 2 or
/// the variance is below 1e-12.
double standardize(double x, const WelfordState& s);

}  // namespace symtrack
