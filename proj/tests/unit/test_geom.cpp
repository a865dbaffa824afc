#include <doctest.h>

#include <random>
#include <sstream>

#include "symtrack/errors.hpp"
#include "symtrack/geom.hpp"

using namespace symtrack;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  std::uniform_real_distribution<double> a(0.0, kPi);
  return rot_from_axis_angle(axis.normalized(), a(rng));
}

// Rotation angle from the quaternion of R, independent of the trace formula.
double quaternion_angle(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

}  // namespace

TEST_SUITE("geom") {
  TEST_CASE("rot6d of identity rows") {
    const Mat3 r = matrix_from_rot6d<double>(Vec3(1, 0, 0), Vec3(0, 1, 0));
    CHECK((r - Mat3::Identity()).norm() < 1e-15);
  }

  TEST_CASE("rot6d orthonormalizes non-unit non-orthogonal halves") {
    const Mat3 r = matrix_from_rot6d<double>(Vec3(2, 0, 0), Vec3(1, 3, 0));
    CHECK((r - Mat3::Identity()).norm() < 1e-12);
    CHECK(is_rotation(r));
  }

  TEST_CASE("rot6d rejects degenerate halves") {
    CHECK_THROWS_AS(matrix_from_rot6d<double>(Vec3(0, 0, 0), Vec3(0, 1, 0)), DegenerateInput);
    CHECK_THROWS_AS(matrix_from_rot6d<double>(Vec3(1, 0, 0), Vec3(2, 0, 0)), DegenerateInput);
  }

  TEST_CASE("rot6d round trip on random rotations") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
      const Mat3 r = random_rotation(rng);
      const Mat3 back = matrix_from_rot6d(rot6d_from_matrix(r));
      CHECK(geodesic_distance(r, back) < 2e-6);
      CHECK((back - r).norm() < 1e-12);
    }
  }

  TEST_CASE("geodesic distance matches quaternion angle") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 500; ++i) {
      const Mat3 a = random_rotation(rng), b = random_rotation(rng);
      CHECK(geodesic_distance(a, b) == doctest::Approx(quaternion_angle(a.transpose() * b)).epsilon(1e-9));
    }
  }

  TEST_CASE("geodesic distance: known angles, symmetry, triangle inequality") {
    CHECK(geodesic_distance(Mat3::Identity(), rot_z(0.7)) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(geodesic_distance(Mat3::Identity(), rot_x(kPi)) == doctest::Approx(kPi).epsilon(1e-5));
    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
      const Mat3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
      CHECK(geodesic_distance(a, b) == doctest::Approx(geodesic_distance(b, a)).epsilon(1e-12));
      CHECK(geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-9);
      // Left invariance.
      CHECK(geodesic_distance(Mat3(c * a), Mat3(c * b)) == doctest::Approx(geodesic_distance(a, b)).epsilon(1e-9));
    }
  }

  TEST_CASE("geodesic throw policy at singular points") {
    CHECK_THROWS_AS(geodesic_distance<double>(Mat3::Identity(), Mat3::Identity(), SingularPolicy::kThrow),
                    NonDifferentiablePoint);
    CHECK_THROWS_AS(geodesic_distance<double>(Mat3::Identity(), rot_x(kPi), SingularPolicy::kThrow),
                    NonDifferentiablePoint);
    CHECK_NOTHROW(geodesic_distance<double>(Mat3::Identity(), rot_x(1.0), SingularPolicy::kThrow));
  }

  TEST_CASE("euler round trip and convention") {
    const Mat3 r = rot_from_euler({30.0, -20.0, 45.0});
    CHECK((r - rot_x(30 * kRadPerDeg) * rot_y(-20 * kRadPerDeg) * rot_z(45 * kRadPerDeg)).norm() < 1e-12);
    const EulerXYZ e = euler_from_rot(r);
    CHECK(e.x == doctest::Approx(30.0));
    CHECK(e.y == doctest::Approx(-20.0));
    CHECK(e.z == doctest::Approx(45.0));

    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-179.0, 179.0), uy(-85.0, 85.0);
    for (int i = 0; i < 300; ++i) {
      const EulerXYZ in{u(rng), uy(rng), u(rng)};
      const EulerXYZ out = euler_from_rot(rot_from_euler(in));
      CHECK(out.x == doctest::Approx(in.x).epsilon(1e-8));
      CHECK(out.y == doctest::Approx(in.y).epsilon(1e-8));
      CHECK(out.z == doctest::Approx(in.z).epsilon(1e-8));
    }
  }

  TEST_CASE("euler at gimbal lock reproduces the rotation") {
    const Mat3 r = rot_from_euler({20.0, 90.0, 10.0});
    CHECK(geodesic_distance(r, rot_from_euler(euler_from_rot(r))) < 2e-6);
  }

  TEST_CASE("wrap_deg range") {
    CHECK(wrap_deg(180.0) == doctest::Approx(180.0));
    CHECK(wrap_deg(-180.0) == doctest::Approx(180.0));
    CHECK(wrap_deg(190.0) == doctest::Approx(-170.0));
    CHECK(wrap_deg(720.0 + 5.0) == doctest::Approx(5.0));
  }

  TEST_CASE("pose compose, invert, relative") {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> n(0.0, 0.1);
    for (int i = 0; i < 100; ++i) {
      const Pose a{random_rotation(rng), Vec3(n(rng), n(rng), n(rng))};
      const Pose b{random_rotation(rng), Vec3(n(rng), n(rng), n(rng))};
      const Pose id = compose(a, invert(a));
      CHECK((id.rot - Mat3::Identity()).norm() < 1e-12);
      CHECK(id.trans.norm() < 1e-12);
      const Pose c = compose(a, relative(a, b));
      CHECK((c.rot - b.rot).norm() < 1e-12);
      CHECK((c.trans - b.trans).norm() < 1e-12);
    }
  }

  TEST_CASE("inertia tensor of a cube is diagonal and lambda_gs is a rotation") {
    const InertiaTensor it = inertia_tensor(make_box(1.0, 1.0, 1.0));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (r != c) CHECK(std::abs(it.lambda(r, c)) < 1e-9);
      }
    }
    CHECK(it.lambda(0, 0) == doctest::Approx(it.lambda(1, 1)));
    CHECK(is_rotation(it.lambda_gs));
  }

  TEST_CASE("inertia tensor is translation invariant and rotates covariantly") {
    TriMesh m = make_box(0.3, 0.2, 0.1);
    const Mat3 base = inertia_tensor(m).lambda;
    const Mat3 r = rot_from_euler({10.0, 20.0, 30.0});
    TriMesh moved = m;
    for (auto& v : moved.vertices) v = r * v + Vec3(1.0, -2.0, 0.5);
    const Mat3 l2 = inertia_tensor(moved).lambda;
    CHECK((l2 - r * base * r.transpose()).norm() < 1e-9 * base.norm());
  }

  TEST_CASE("inertia tensor of a single triangle cannot be orthonormalized") {
    TriMesh flat;
    flat.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    flat.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(inertia_tensor(flat), DegenerateInput);
  }

  TEST_CASE("inertia tensor is symmetric and matches the lumped sum on a tetrahedron") {
    TriMesh t;
    t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)};
    t.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    double total = 0.0;
    Vec3 com = Vec3::Zero();
    std::vector<Vec3> cs;
    for (std::size_t f = 0; f < 4; ++f) {
      Vec3 c = Vec3::Zero();
      for (int k : t.faces[f]) c += t.vertices[static_cast<std::size_t>(k)] / 3.0;
      cs.push_back(c);
      total += face_area(t, f);
      com += face_area(t, f) * c;
    }
    com /= total;
    Mat3 expect = Mat3::Zero();
    for (std::size_t f = 0; f < 4; ++f) {
      const Vec3 c = cs[f] - com;
      expect += face_area(t, f) * (c.squaredNorm() * Mat3::Identity() - c * c.transpose());
    }
    const Mat3 got = inertia_tensor(t).lambda;
    CHECK((got - expect).norm() < 1e-12);
    CHECK((got - got.transpose()).norm() == 0.0);
  }

  TEST_CASE("gram_schmidt yields a proper rotation") {
    Mat3 m;
    m << 2, 0.1, 0.3, 0.2, 1, 0.5, 0.1, 0.4, 3;
    CHECK(is_rotation(gram_schmidt(m)));
  }

  TEST_CASE("golden spiral points are unit and well spread") {
    const auto pts = golden_spiral(500);
    REQUIRE(pts.size() == 500);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) {
      CHECK(p.norm() == doctest::Approx(1.0));
      mean += p;
    }
    CHECK((mean / 500.0).norm() < 0.01);
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double nearest = 10.0;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (i != j) nearest = std::min(nearest, (pts[i] - pts[j]).norm());
      }
      worst = std::max(worst, nearest);
    }
    CHECK(worst < 0.2);
    CHECK(golden_spiral(0).empty());
  }

  TEST_CASE("mesh validation and OBJ parsing") {
    std::istringstream ok("# cube corner\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nf 1 2 3\nf 1/1 2/2 4/4\nf 1 3 4\nf 2 3 4\n");
    const TriMesh m = parse_obj(ok);
    CHECK(m.vertices.size() == 4);
    CHECK(m.faces.size() == 4);

    std::istringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    CHECK_THROWS_AS(parse_obj(quad), ParseError);
    std::istringstream bad_index("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 9\n");
    CHECK_THROWS_AS(parse_obj(bad_index), ParseError);
    CHECK_THROWS_AS(load_obj("/nonexistent/mesh.obj"), IoError);

    std::ostringstream out;
    write_obj(out, make_box(1, 2, 3));
    std::istringstream back(out.str());
    const TriMesh b = parse_obj(back);
    CHECK(b.vertices.size() == 14);
    CHECK(b.faces.size() == 24);
    CHECK(surface_area(b) == doctest::Approx(2 * (1 * 2 + 2 * 3 + 1 * 3)));
  }

  TEST_CASE("built-in meshes are valid with expected areas") {
    CHECK(surface_area(make_icosphere(1.0, 4)) == doctest::Approx(4 * kPi).epsilon(0.01));
    const double r = 0.5, h = 2.0;
    CHECK(surface_area(make_cylinder(r, h, 128)) == doctest::Approx(2 * kPi * r * h + 2 * kPi * r * r).epsilon(0.01));
    CHECK_NOTHROW(validate_mesh(make_ellipsoid(Vec3(1, 2, 3), 2)));
  }
}
