#pragma once

// Rotation and pose primitives. Functions that sit on a gradient path are
// templated on the scalar type so they can be evaluated with dual numbers.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "symtrack/errors.hpp"

namespace symtrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <class T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <class T>
using Mat3T = Eigen::Matrix<T, 3, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;

/// Clamp applied to the arccos argument of the geodesic metric.
inline constexpr double kAcosClamp = 1e-12;
/// |arccos argument| above 1 - kDiffMargin is treated as non-differentiable.
inline constexpr double kDiffMargin = 1e-6;

/// What to do when a geodesic is evaluated next to its singular set.
enum class SingularPolicy {
  kClamp,  // clamp silently; derivatives through the clamp vanish
  kThrow,  // raise NonDifferentiablePoint inside the 1e-6 margin
};

/// Rigid transform from the object frame to the camera frame.
struct Pose {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  static Pose identity() { return {}; }
};

/// Continuous 6D rotation parameters: the (unnormalized) first two rows.
struct Rot6D {
  Vec3 rx = Vec3::UnitX();
  Vec3 ry = Vec3::UnitY();
};

/// Intrinsic X-then-Y-then-Z Euler angles in degrees, each in (-180, 180].
struct EulerXYZ {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
};

/// True when m is orthonormal with determinant +1 within tol (elementwise).
bool is_rotation(const Mat3& m, double tol = 1e-9);

// ---------------------------------------------------------------------------
// 6D representation

/// Gram-Schmidt decoding of the 6D representation; rows are (R_x, R_y, R_z).
/// Throws DegenerateInput for a near-zero rx or ry (anti)parallel to rx.
template <class T>
Mat3T<T> matrix_from_rot6d(const Vec3T<T>& rx, const Vec3T<T>& ry) {
  using std::sqrt;
  const T nx = sqrt(rx.squaredNorm());
  if (!(nx > T(1e-12))) throw DegenerateInput("rot6d: first vector has zero norm");
  const Vec3T<T> ex = rx / nx;
  const Vec3T<T> resid = ry - ex.dot(ry) * ex;
  const T nr = sqrt(resid.squaredNorm());
  const T ny = sqrt(ry.squaredNorm());
  if (!(ny > T(1e-12)) || !(nr > T(1e-10) * ny)) {
    throw DegenerateInput("rot6d: second vector is parallel to the first");
  }
  const Vec3T<T> ey = resid / nr;
  Mat3T<T> r;
  r.row(0) = ex.transpose();
  r.row(1) = ey.transpose();
  r.row(2) = ex.cross(ey).transpose();
  return r;
}

inline Mat3 matrix_from_rot6d(const Rot6D& r) { return matrix_from_rot6d<double>(r.rx, r.ry); }

Rot6D rot6d_from_matrix(const Mat3& r);

// ---------------------------------------------------------------------------
// Geodesic metric

/// arccos((Tr(R1^T R2) - 1) / 2) with the argument clamped away from +-1.
template <class T>
T geodesic_distance(const Mat3T<T>& r1, const Mat3T<T>& r2,
                    SingularPolicy policy = SingularPolicy::kClamp) {
  using std::acos;
  T arg = ((r1.transpose() * r2).trace() - T(1.0)) / T(2.0);
  if (policy == SingularPolicy::kThrow &&
      (arg > T(1.0 - kDiffMargin) || arg < T(-1.0 + kDiffMargin))) {
    throw NonDifferentiablePoint("geodesic distance evaluated at a singular rotation pair");
  }
  if (arg > T(1.0 - kAcosClamp)) arg = T(1.0 - kAcosClamp);
  if (arg < T(-1.0 + kAcosClamp)) arg = T(-1.0 + kAcosClamp);
  return acos(arg);
}

inline double geodesic_distance(const Mat3& r1, const Mat3& r2) {
  return geodesic_distance<double>(r1, r2, SingularPolicy::kClamp);
}

// ---------------------------------------------------------------------------
// Euler angles

/// Rx(x) * Ry(y) * Rz(z), angles in radians.
template <class T>
Mat3T<T> rot_from_euler_rad(const T& x, const T& y, const T& z) {
  using std::cos;
  using std::sin;
  const T cx = cos(x), sx = sin(x);
  const T cy = cos(y), sy = sin(y);
  const T cz = cos(z), sz = sin(z);
  Mat3T<T> r;
  r(0, 0) = cy * cz;
  r(0, 1) = -cy * sz;
  r(0, 2) = sy;
  r(1, 0) = cx * sz + sx * sy * cz;
  r(1, 1) = cx * cz - sx * sy * sz;
  r(1, 2) = -sx * cy;
  r(2, 0) = sx * sz - cx * sy * cz;
  r(2, 1) = sx * cz + cx * sy * sz;
  r(2, 2) = cx * cy;
  return r;
}

Mat3 rot_from_euler(const EulerXYZ& e);
/// Gimbal lock (|sin y| -> 1) sets x = 0 and folds the remainder into z.
EulerXYZ euler_from_rot(const Mat3& r);

/// Wraps an angle in degrees into (-180, 180].
double wrap_deg(double a);

Mat3 rot_x(double rad);
Mat3 rot_y(double rad);
Mat3 rot_z(double rad);
/// Rodrigues formula; axis need not be normalized (must be nonzero).
Mat3 rot_from_axis_angle(const Vec3& axis, double angle);

// ---------------------------------------------------------------------------
// Rigid transforms

/// p1 * p2: apply p2 first, then p1.
Pose compose(const Pose& p1, const Pose& p2);
Pose invert(const Pose& p);
/// Transform taking `from` to `to`: invert(from) * to.
Pose relative(const Pose& from, const Pose& to);

// ---------------------------------------------------------------------------
// Meshes and inertia

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Throws DegenerateMesh when indices are out of range, there are no faces,
/// or a face has area <= 1e-12 m^2.
void validate_mesh(const TriMesh& mesh);

double face_area(const TriMesh& mesh, std::size_t f);
double surface_area(const TriMesh& mesh);

struct InertiaTensor {
  Mat3 lambda = Mat3::Zero();
  Mat3 lambda_gs = Mat3::Identity();
};

/// Face-lumped surface inertia about the area-weighted center of mass.
InertiaTensor inertia_tensor(const TriMesh& mesh);

/// Column-wise Gram-Schmidt with the third column negated if det = -1.
/// Throws DegenerateInput when the columns are (near) linearly dependent.
Mat3 gram_schmidt(const Mat3& m);

/// Near-uniform deterministic points on S^2.
std::vector<Vec3> golden_spiral(std::size_t n);

/// Wavefront OBJ subset: `v x y z` and triangular `f i j k` records.
TriMesh parse_obj(std::istream& in);
TriMesh load_obj(const std::string& path);
void write_obj(std::ostream& out, const TriMesh& mesh);

// Procedural meshes (mesh.cpp).
/// Centered box; 14 vertices, 24 triangles (each side fanned around its center).
TriMesh make_box(double sx, double sy, double sz);
TriMesh make_icosphere(double radius, int subdivisions);
TriMesh make_cylinder(double radius, double height, int segments);
TriMesh make_ellipsoid(const Vec3& radii, int subdivisions);

}  // namespace symtrack
