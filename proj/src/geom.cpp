#include "symtrack/geom.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace symtrack {

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 e = m.transpose() * m - Mat3::Identity();
  return e.cwiseAbs().maxCoeff() <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Rot6D rot6d_from_matrix(const Mat3& r) {
  return Rot6D{r.row(0).transpose(), r.row(1).transpose()};
}

Mat3 rot_from_euler(const EulerXYZ& e) {
  return rot_from_euler_rad<double>(e.x * kRadPerDeg, e.y * kRadPerDeg, e.z * kRadPerDeg);
}

double wrap_deg(double a) {
  double w = std::fmod(a, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

EulerXYZ euler_from_rot(const Mat3& r) {
  const double sy = std::clamp(r(0, 2), -1.0, 1.0);
  const double cy = std::hypot(r(0, 0), r(0, 1));
  EulerXYZ e;
  e.y = std::asin(sy) * kDegPerRad;
  if (cy > 1e-9) {
    e.x = std::atan2(-r(1, 2), r(2, 2)) * kDegPerRad;
    e.z = std::atan2(-r(0, 1), r(0, 0)) * kDegPerRad;
  } else {
    // x = 0: row 1 reduces to (sin z, cos z, .)
    e.x = 0.0;
    e.z = std::atan2(r(1, 0), r(1, 1)) * kDegPerRad;
  }
  e.x = wrap_deg(e.x);
  e.y = wrap_deg(e.y);
  e.z = wrap_deg(e.z);
  return e;
}

Mat3 rot_x(double rad) { return rot_from_euler_rad<double>(rad, 0.0, 0.0); }
Mat3 rot_y(double rad) { return rot_from_euler_rad<double>(0.0, rad, 0.0); }
Mat3 rot_z(double rad) { return rot_from_euler_rad<double>(0.0, 0.0, rad); }

Mat3 rot_from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw DegenerateInput("axis-angle: zero axis");
  return Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
}

Pose compose(const Pose& p1, const Pose& p2) {
  return Pose{p1.rot * p2.rot, p1.rot * p2.trans + p1.trans};
}

Pose invert(const Pose& p) {
  const Mat3 rt = p.rot.transpose();
  return Pose{rt, -(rt * p.trans)};
}

Pose relative(const Pose& from, const Pose& to) { return compose(invert(from), to); }

double face_area(const TriMesh& mesh, std::size_t f) {
  const auto& idx = mesh.faces[f];
  const Vec3& a = mesh.vertices[static_cast<std::size_t>(idx[0])];
  const Vec3& b = mesh.vertices[static_cast<std::size_t>(idx[1])];
  const Vec3& c = mesh.vertices[static_cast<std::size_t>(idx[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const TriMesh& mesh) {
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) total += face_area(mesh, f);
  return total;
}

void validate_mesh(const TriMesh& mesh) {
  if (mesh.faces.empty()) throw DegenerateMesh("mesh has no faces");
  const auto nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int i : mesh.faces[f]) {
      if (i < 0 || i >= nv) {
        throw DegenerateMesh("face " + std::to_string(f) + " references vertex " +
                             std::to_string(i) + " out of range");
      }
    }
    if (!(face_area(mesh, f) > 1e-12)) {
      throw DegenerateMesh("face " + std::to_string(f) + " is degenerate");
    }
  }
}

InertiaTensor inertia_tensor(const TriMesh& mesh) {
  validate_mesh(mesh);
  std::vector<double> areas(mesh.faces.size());
  std::vector<Vec3> centroids(mesh.faces.size());
  double total = 0.0;
  Vec3 com = Vec3::Zero();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& idx = mesh.faces[f];
    centroids[f] = (mesh.vertices[static_cast<std::size_t>(idx[0])] +
                    mesh.vertices[static_cast<std::size_t>(idx[1])] +
                    mesh.vertices[static_cast<std::size_t>(idx[2])]) /
                   3.0;
    areas[f] = face_area(mesh, f);
    total += areas[f];
    com += areas[f] * centroids[f];
  }
  if (total < 1e-12) throw DegenerateMesh("mesh surface area is zero");
  com /= total;

  InertiaTensor out;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 c = centroids[f] - com;
    out.lambda += areas[f] * (c.squaredNorm() * Mat3::Identity() - c * c.transpose());
  }
  out.lambda = 0.5 * (out.lambda + out.lambda.transpose());
  out.lambda_gs = gram_schmidt(out.lambda);
  return out;
}

Mat3 gram_schmidt(const Mat3& m) {
  if (!m.allFinite()) throw DegenerateInput("gram_schmidt: non-finite input");
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw DegenerateInput("gram_schmidt: zero matrix");
  Eigen::FullPivLU<Mat3> lu(m / scale);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) throw DegenerateInput("gram_schmidt: rank-deficient matrix");

  Mat3 q;
  for (int j = 0; j < 3; ++j) {
    Vec3 v = m.col(j);
    for (int k = 0; k < j; ++k) v -= q.col(k).dot(v) * q.col(k);
    const double n = v.norm();
    if (!(n > 1e-10 * scale)) throw DegenerateInput("gram_schmidt: dependent columns");
    q.col(j) = v / n;
  }
  if (q.determinant() < 0.0) q.col(2) = -q.col(2);
  return q;
}

std::vector<Vec3> golden_spiral(std::size_t n) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double turn = 2.0 * kPi * (1.0 - 1.0 / phi);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double az = turn * static_cast<double>(i);
    Vec3 p(r * std::cos(az), r * std::sin(az), z);
    pts.push_back(p / p.norm());
  }
  return pts;
}

TriMesh parse_obj(std::istream& in) {
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw ParseError("obj line " + std::to_string(lineno) + ": malformed vertex");
      }
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string tok;
      while (ls >> tok) {
        // Accept "i", "i/t" and "i/t/n"; only the position index is used.
        const std::string head = tok.substr(0, tok.find('/'));
        std::size_t used = 0;
        long v = 0;
        try {
          v = std::stol(head, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != head.size() || head.empty()) {
          throw ParseError("obj line " + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        idx.push_back(v);
      }
      if (idx.size() != 3) {
        throw ParseError("obj line " + std::to_string(lineno) + ": only triangular faces are supported (got " +
                         std::to_string(idx.size()) + " vertices)");
      }
      std::array<int, 3> face{};
      for (int k = 0; k < 3; ++k) {
        if (idx[static_cast<std::size_t>(k)] < 1) {
          throw ParseError("obj line " + std::to_string(lineno) + ": face indices are 1-based");
        }
        face[static_cast<std::size_t>(k)] = static_cast<int>(idx[static_cast<std::size_t>(k)] - 1);
      }
      mesh.faces.push_back(face);
    }
    // Other record types (vn, vt, o, g, s, usemtl, ...) are ignored.
  }
  try {
    validate_mesh(mesh);
  } catch (const DegenerateMesh& e) {
    throw ParseError(std::string("obj: ") + e.what());
  }
  return mesh;
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  return parse_obj(in);
}

void write_obj(std::ostream& out, const TriMesh& mesh) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

}  // namespace symtrack
