#include "symtrack/losses.hpp"

#include <algorithm>

namespace symtrack {

std::array<double, 9> PoseDelta9::to_array() const {
  return {trans.x(), trans.y(), trans.z(), rot.rx.x(), rot.rx.y(), rot.rx.z(), rot.ry.x(), rot.ry.y(), rot.ry.z()};
}

PoseDelta9 PoseDelta9::from_array(std::span<const double> a) {
  if (a.size() != 9) throw DimensionMismatch("PoseDelta9 needs 9 parameters");
  PoseDelta9 d;
  d.trans = Vec3(a[0], a[1], a[2]);
  d.rot.rx = Vec3(a[3], a[4], a[5]);
  d.rot.ry = Vec3(a[6], a[7], a[8]);
  return d;
}

PoseDelta9 encode_delta(const Pose& delta, double max_delta_m) {
  PoseDelta9 d;
  for (int i = 0; i < 3; ++i) d.trans[i] = std::clamp(delta.trans[i] / max_delta_m, -1.0, 1.0);
  d.rot = rot6d_from_matrix(delta.rot);
  return d;
}

Pose decode_delta(const PoseDelta9& d, double max_delta_m) {
  return Pose{matrix_from_rot6d(d.rot), d.trans * max_delta_m};
}

double loss_rot(const Mat3& dr_hat, const Mat3& dr_gt, const Mat3& lambda_gs, const Mat3& g_star) {
  return loss_rot<double>(dr_hat, dr_gt, lambda_gs, g_star);
}

double loss_track(const PoseDelta9& pred, const Vec3& gt_trans, const Mat3& gt_rot, const TaskWeights& w,
                  const Mat3& lambda_gs, const Mat3& g_star) {
  const auto p = pred.to_array();
  return loss_track<double>(std::span<const double>(p), gt_trans, gt_rot, w.v1, w.v2, lambda_gs, g_star);
}

double loss_multitask(double l_track, double l_unoccl, double l_foregr, const TaskWeights& w) {
  return loss_multitask<double>(l_track, l_unoccl, l_foregr, w.s1, w.s2, w.s3);
}

double bank_spread(std::span<const Mat3> g) { return bank_spread<double>(g); }

double uniformity_penalty(std::span<const Mat3> g) { return uniformity_penalty<double>(g); }

double loss_symmetric(double loss, std::span<const double> penalties, double s4) {
  return loss_symmetric<double>(loss, penalties, s4);
}

AttentionMap spatial_softmax(int w, int h, std::span<const double> raw) {
  if (raw.size() != static_cast<std::size_t>(w * h) || raw.empty()) {
    throw DimensionMismatch("spatial_softmax: expected w*h values");
  }
  return AttentionMap{w, h, spatial_softmax<double>(raw)};
}

std::vector<double> normalized_mask_target(const BinaryMask& mask) {
  std::vector<double> t(mask.values.size(), 0.0);
  const std::size_t n = mask.count();
  if (n == 0) return t;
  const double v = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = mask.values[i] ? v : 0.0;
  return t;
}

double bce_attention(const AttentionMap& map, const BinaryMask& mask) {
  if (map.w != mask.w || map.h != mask.h || map.values.size() != mask.values.size()) {
    throw DimensionMismatch("bce_attention: map is " + std::to_string(map.w) + "x" + std::to_string(map.h) +
                            ", mask is " + std::to_string(mask.w) + "x" + std::to_string(mask.h));
  }
  const auto target = normalized_mask_target(mask);
  return bce_attention<double>(std::span<const double>(map.values), std::span<const double>(target));
}

double logcosh(const PoseDelta9& pred, const PoseDelta9& gt) {
  const auto p = pred.to_array();
  const auto g = gt.to_array();
  return logcosh<double>(std::span<const double>(p), std::span<const double>(g));
}

WelfordState welford_update(WelfordState s, double x) {
  s.count += 1;
  const double delta = x - s.mean;
  s.mean += delta / static_cast<double>(s.count);
  s.m2 += delta * (x - s.mean);
  return s;
}

double standardize(double x, const WelfordState& s) {
  if (s.count < 2) throw InsufficientSamples("standardize needs at least two samples");
  const double var = s.variance();
  if (!(var > 1e-12)) throw InsufficientSamples("standardize: variance is zero");
  return (x - s.mean) / std::sqrt(var);
}

}  // namespace symtrack
