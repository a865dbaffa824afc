#include "symtrack/symmetry.hpp"

#include <random>

#include "symtrack/losses.hpp"

namespace symtrack {

Mat3 symmetry_matrix(const SymmetryBank& bank, std::size_t index) {
  if (index >= bank.size()) {
    throw IndexOutOfRange("symmetry index " + std::to_string(index) + " out of range for bank of size " +
                          std::to_string(bank.size()));
  }
  return symmetry_matrix<double>(std::span<const double, 3>(bank.params[index]), bank.axis_mask);
}

std::vector<Mat3> bank_matrices(const SymmetryBank& bank) {
  std::vector<Mat3> out;
  out.reserve(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) out.push_back(symmetry_matrix(bank, i));
  return out;
}

EulerXYZ bank_angles_deg(const SymmetryBank& bank, std::size_t index) {
  if (index >= bank.size()) throw IndexOutOfRange("symmetry index out of range");
  const auto a = decode_symmetry_angles<double>(std::span<const double, 3>(bank.params[index]), bank.axis_mask);
  return EulerXYZ{a[0] * kDegPerRad, a[1] * kDegPerRad, a[2] * kDegPerRad};
}

double symmetry_param_for_angle(double rad) { return std::atanh(rad / kPi); }

SymmetryBank make_clustered_bank(std::size_t b2, std::array<bool, 3> mask, double value, double jitter,
                                 unsigned long long seed) {
  SymmetryBank bank;
  bank.axis_mask = mask;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bank.params.resize(b2);
  for (auto& p : bank.params) {
    for (std::size_t i = 0; i < 3; ++i) p[i] = mask[i] ? value + jitter * u(rng) : 0.0;
  }
  return bank;
}

SymmetryBank make_z_grid_bank(std::size_t b2) {
  SymmetryBank bank;
  bank.axis_mask = {false, false, true};
  bank.params.resize(b2);
  for (std::size_t i = 0; i < b2; ++i) {
    const double a = -kPi + 2.0 * kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(b2);
    bank.params[i] = {0.0, 0.0, symmetry_param_for_angle(a)};
  }
  return bank;
}

std::size_t select_oracle(const SymmetryBank& bank, const Mat3& dr_hat, const Mat3& dr_gt, const Mat3& lambda_gs) {
  if (bank.size() == 0) throw IndexOutOfRange("select_oracle: empty bank");
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double l = loss_rot(dr_hat, dr_gt, lambda_gs, symmetry_matrix(bank, i));
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  return best;
}

Mat3 select_mean(const SymmetryBank& bank) {
  if (bank.size() == 0) throw IndexOutOfRange("select_mean: empty bank");
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  for (const auto& p : bank.params) {
    const auto a = decode_symmetry_angles<double>(std::span<const double, 3>(p), bank.axis_mask);
    for (std::size_t i = 0; i < 3; ++i) mean[i] += a[i];
  }
  for (auto& m : mean) m /= static_cast<double>(bank.size());
  return rot_from_euler_rad<double>(mean[0], mean[1], mean[2]);
}

double angular_distance_deg(double a, double b) {
  const double d = std::abs(std::fmod(a - b, 360.0));
  return std::min(d, 360.0 - d);
}

ReflectiveResult reflective_filter(const EulerXYZ& prev, const EulerXYZ& cur, const ReflectiveConfig& cfg) {
  ReflectiveResult r;
  r.angles = cur;
  for (std::size_t i = 0; i < 3; ++i) {
    if (angular_distance_deg(cur[i], prev[i]) > cfg.threshold_deg) {
      r.angles[i] = prev[i];
      r.flags[i] = true;
    }
  }
  return r;
}

nlohmann::json bank_to_json(const SymmetryBank& bank) {
  nlohmann::json flat = nlohmann::json::array();
  for (const auto& p : bank.params) {
    for (double v : p) flat.push_back(v);
  }
  return {{"b2", bank.size()},
          {"params", flat},
          {"axis_mask", {bank.axis_mask[0], bank.axis_mask[1], bank.axis_mask[2]}}};
}

SymmetryBank bank_from_json(const nlohmann::json& j) {
  SymmetryBank bank;
  const auto& flat = j.at("params");
  if (!flat.is_array() || flat.size() % 3 != 0) throw ParseError("bank params must be a flat array of B2*3 numbers");
  const auto& mask = j.at("axis_mask");
  if (!mask.is_array() || mask.size() != 3) throw ParseError("bank axis_mask must hold 3 booleans");
  for (std::size_t i = 0; i < 3; ++i) bank.axis_mask[i] = mask[i].get<bool>();
  bank.params.resize(flat.size() / 3);
  for (std::size_t i = 0; i < bank.params.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) bank.params[i][k] = flat[3 * i + k].get<double>();
  }
  if (j.contains("b2") && j.at("b2").get<std::size_t>() != bank.size()) {
    throw ParseError("bank b2 does not match the parameter count");
  }
  return bank;
}

}  // namespace symtrack
