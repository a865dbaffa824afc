#pragma once

// Continuous rotational-symmetry bank and the reflective-flip heuristic.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "symtrack/geom.hpp"

namespace symtrack {

/// B2 unconstrained Euler triplets. Decoded angle = tanh(param) * pi on the
/// masked axes and exactly 0 elsewhere.
struct SymmetryBank {
  std::vector<std::array<double, 3>> params;
  std::array<bool, 3> axis_mask{false, false, true};

  std::size_t size() const { return params.size(); }
};

/// Decoded Euler angles (radians) of one triplet.
template <class T>
std::array<T, 3> decode_symmetry_angles(std::span<const T, 3> p, const std::array<bool, 3>& mask) {
  using std::tanh;
  std::array<T, 3> a{T(0.0), T(0.0), T(0.0)};
  for (std::size_t i = 0; i < 3; ++i) {
    if (mask[i]) a[i] = tanh(p[i]) * T(kPi);
  }
  return a;
}

template <class T>
Mat3T<T> symmetry_matrix(std::span<const T, 3> p, const std::array<bool, 3>& mask) {
  const auto a = decode_symmetry_angles<T>(p, mask);
  return rot_from_euler_rad<T>(a[0], a[1], a[2]);
}

/// Throws IndexOutOfRange for index >= B2.
Mat3 symmetry_matrix(const SymmetryBank& bank, std::size_t index);
std::vector<Mat3> bank_matrices(const SymmetryBank& bank);
/// Decoded angles of entry `index` in degrees.
EulerXYZ bank_angles_deg(const SymmetryBank& bank, std::size_t index);

/// Raw parameter that decodes to `rad` (|rad| < pi).
double symmetry_param_for_angle(double rad);

/// Bank whose masked axes hold identical parameter `value` plus optional
/// uniform jitter in [-jitter, jitter] drawn from `seed`.
SymmetryBank make_clustered_bank(std::size_t b2, std::array<bool, 3> mask, double value, double jitter,
                                 unsigned long long seed);
/// z-angles evenly spaced over (-pi, pi).
SymmetryBank make_z_grid_bank(std::size_t b2);

/// Index minimizing loss_rot(dr_hat, dr_gt, lambda_gs, G_i); ties go to the
/// lowest index.
std::size_t select_oracle(const SymmetryBank& bank, const Mat3& dr_hat, const Mat3& dr_gt, const Mat3& lambda_gs);

/// Matrix of the per-axis mean of the decoded angles.
Mat3 select_mean(const SymmetryBank& bank);

struct ReflectiveConfig {
  double threshold_deg = 100.0;
  int max_repasses = 1;
};

struct ReflectiveResult {
  EulerXYZ angles;
  std::array<bool, 3> flags{false, false, false};

  bool any() const { return flags[0] || flags[1] || flags[2]; }
};

/// Circular distance between two angles in degrees, in [0, 180].
double angular_distance_deg(double a, double b);

/// Components jumping more than the threshold (circularly) from `prev` are
/// replaced by the previous value and flagged.
ReflectiveResult reflective_filter(const EulerXYZ& prev, const EulerXYZ& cur, const ReflectiveConfig& cfg);

nlohmann::json bank_to_json(const SymmetryBank& bank);
SymmetryBank bank_from_json(const nlohmann::json& j);

}  // namespace symtrack
