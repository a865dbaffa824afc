#include <doctest.h>

#include <random>

#include "symtrack/errors.hpp"
#include "symtrack/losses.hpp"
#include "symtrack/symmetry.hpp"

using namespace symtrack;

namespace {

SymmetryBank z_bank(std::initializer_list<double> deg) {
  SymmetryBank b;
  b.axis_mask = {false, false, true};
  for (double d : deg) b.params.push_back({0.0, 0.0, symmetry_param_for_angle(d * kRadPerDeg)});
  return b;
}

SymmetryBank random_bank(std::mt19937_64& rng, std::size_t n, std::array<bool, 3> mask) {
  std::normal_distribution<double> p(0.0, 2.0);
  SymmetryBank b;
  b.axis_mask = mask;
  for (std::size_t i = 0; i < n; ++i) b.params.push_back({p(rng), p(rng), p(rng)});
  return b;
}

}  // namespace

TEST_SUITE("symmetry") {
  TEST_CASE("symmetry_matrix decoding") {
    SymmetryBank b;
    b.axis_mask = {true, true, true};
    b.params = {{0.0, 0.0, 0.0}, {0.0, 0.0, std::atanh(0.5)}};
    CHECK((symmetry_matrix(b, 0) - Mat3::Identity()).norm() < 1e-15);
    CHECK((symmetry_matrix(b, 1) - rot_z(kPi / 2)).norm() < 1e-12);
    CHECK_THROWS_AS(symmetry_matrix(b, 2), IndexOutOfRange);

    b.axis_mask = {false, false, true};
    b.params = {{3.0, -2.0, 0.0}};
    CHECK((symmetry_matrix(b, 0) - Mat3::Identity()).norm() == 0.0);
  }

  TEST_CASE("decoded angles stay inside (-pi, pi) and matrices are rotations") {
    std::mt19937_64 rng(31);
    const SymmetryBank b = random_bank(rng, 200, {true, true, true});
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto a = decode_symmetry_angles<double>(std::span<const double, 3>(b.params[i]), b.axis_mask);
      for (double v : a) CHECK(std::abs(v) < kPi);
      CHECK(is_rotation(symmetry_matrix(b, i)));
    }
    CHECK(std::abs(std::tanh(symmetry_param_for_angle(1.2)) * kPi - 1.2) < 1e-12);
  }

  TEST_CASE("select_oracle picks the cancelling z entry") {
    const Mat3 gt = rot_from_euler({12.0, -7.0, 33.0});
    const Mat3 hat = gt * rot_z(30.0 * kRadPerDeg);
    const SymmetryBank b = z_bank({0.0, -30.0, 90.0});
    CHECK(select_oracle(b, hat, gt, Mat3::Identity()) == 1);
    CHECK(select_oracle(z_bank({0.0}), hat, gt, Mat3::Identity()) == 0);
  }

  TEST_CASE("select_oracle achieves the minimum and is invariant to duplication") {
    std::mt19937_64 rng(32);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      const SymmetryBank b = random_bank(rng, 8, {false, false, true});
      const Mat3 gt = rot_from_axis_angle(Vec3(n(rng), n(rng), n(rng)).normalized(), 1.0);
      const Mat3 hat = rot_from_axis_angle(Vec3(n(rng), n(rng), n(rng)).normalized(), 0.7) * gt;
      const std::size_t k = select_oracle(b, hat, gt, Mat3::Identity());
      const double best = loss_rot(hat, gt, Mat3::Identity(), symmetry_matrix(b, k));
      for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(best <= loss_rot(hat, gt, Mat3::Identity(), symmetry_matrix(b, i)));
      }
      SymmetryBank dup = b;
      dup.params.insert(dup.params.end(), b.params.begin(), b.params.end());
      CHECK(symmetry_matrix(dup, select_oracle(dup, hat, gt, Mat3::Identity())) == symmetry_matrix(b, k));
    }
  }

  TEST_CASE("dense z bank containing identity never does worse than no symmetry handling") {
    SymmetryBank b;
    for (int i = 0; i < 64; ++i) b.params.push_back({0.0, 0.0, symmetry_param_for_angle((i - 32) * 2.0 * kPi / 65.0)});
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> th(-kPi, kPi);
    for (int t = 0; t < 200; ++t) {
      const Mat3 gt = rot_from_euler({20.0, 10.0, -5.0});
      const Mat3 hat = gt * rot_z(th(rng));
      const std::size_t k = select_oracle(b, hat, gt, Mat3::Identity());
      CHECK(loss_rot(hat, gt, Mat3::Identity(), symmetry_matrix(b, k)) <=
            loss_rot(hat, gt, Mat3::Identity(), Mat3::Identity()));
    }
  }

  TEST_CASE("select_mean") {
    CHECK((select_mean(z_bank({25.0, -25.0})) - Mat3::Identity()).norm() < 1e-12);
    CHECK((select_mean(z_bank({40.0, 40.0})) - rot_z(40.0 * kRadPerDeg)).norm() < 1e-12);

    std::mt19937_64 rng(34);
    const SymmetryBank b = random_bank(rng, 64, {true, false, true});
    double mx = 0.0, mz = 0.0;
    for (const auto& p : b.params) {
      mx += std::tanh(p[0]) * kPi;
      mz += std::tanh(p[2]) * kPi;
    }
    CHECK((select_mean(b) - rot_from_euler_rad<double>(mx / 64.0, 0.0, mz / 64.0)).norm() < 1e-12);
  }

  TEST_CASE("reflective filter") {
    const ReflectiveConfig cfg;
    ReflectiveResult r = reflective_filter({0, 0, 0}, {10, 10, 10}, cfg);
    CHECK_FALSE(r.any());
    CHECK(r.angles.x == 10.0);

    r = reflective_filter({0, 0, 0}, {180, 0, 0}, cfg);
    CHECK(r.flags[0]);
    CHECK_FALSE(r.flags[1]);
    CHECK(r.angles.x == 0.0);

    r = reflective_filter({170, 0, 0}, {-170, 0, 0}, cfg);
    CHECK_FALSE(r.any());
    CHECK(r.angles.x == -170.0);

    CHECK(angular_distance_deg(170.0, -170.0) == doctest::Approx(20.0));
    CHECK(angular_distance_deg(-90.0, 90.0) == doctest::Approx(180.0));
  }

  TEST_CASE("reflective filter is idempotent") {
    std::mt19937_64 rng(35);
    std::uniform_real_distribution<double> u(-180.0, 180.0);
    const ReflectiveConfig cfg;
    for (int t = 0; t < 500; ++t) {
      const EulerXYZ prev{u(rng), u(rng), u(rng)}, cur{u(rng), u(rng), u(rng)};
      const ReflectiveResult once = reflective_filter(prev, cur, cfg);
      const ReflectiveResult twice = reflective_filter(prev, once.angles, cfg);
      CHECK_FALSE(twice.any());
      CHECK(twice.angles.x == once.angles.x);
      CHECK(twice.angles.y == once.angles.y);
      CHECK(twice.angles.z == once.angles.z);
    }
  }

  TEST_CASE("bank generators and JSON round trip") {
    const SymmetryBank c = make_clustered_bank(16, {false, false, true}, 0.2, 0.05, 9);
    REQUIRE(c.size() == 16);
    for (const auto& p : c.params) {
      CHECK(p[0] == 0.0);
      CHECK(std::abs(p[2] - 0.2) <= 0.05);
    }
    CHECK(make_clustered_bank(16, {false, false, true}, 0.2, 0.05, 9).params == c.params);

    const SymmetryBank g = make_z_grid_bank(64);
    const std::vector<Mat3> mats = bank_matrices(g);
    double brute = 0.0;
    for (std::size_t j = 0; j < mats.size(); ++j) {
      for (std::size_t k = 0; k < mats.size(); ++k) {
        if (j != k) brute += geodesic_distance(mats[k], mats[j]);
      }
    }
    brute /= 64.0 * 63.0;
    CHECK(bank_spread(mats) == doctest::Approx(brute).epsilon(1e-10));

    const SymmetryBank back = bank_from_json(bank_to_json(c));
    CHECK(back.params == c.params);
    CHECK(back.axis_mask == c.axis_mask);
  }
}
