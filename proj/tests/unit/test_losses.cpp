#include <doctest.h>

#include <random>

#include "symtrack/autodiff.hpp"
#include "symtrack/errors.hpp"
#include "symtrack/losses.hpp"

using namespace symtrack;

TEST_SUITE("losses") {
  TEST_CASE("delta encoding round trip and clamping") {
    const Pose d{rot_from_euler({5.0, -3.0, 8.0}), Vec3(0.01, -0.005, 0.015)};
    const PoseDelta9 e = encode_delta(d, 0.02);
    CHECK(e.trans[0] == doctest::Approx(0.5));
    const Pose back = decode_delta(e, 0.02);
    CHECK((back.trans - d.trans).norm() < 1e-15);
    CHECK((back.rot - d.rot).norm() < 1e-12);

    const PoseDelta9 big = encode_delta(Pose{Mat3::Identity(), Vec3(0.1, -0.1, 0.0)}, 0.02);
    CHECK(big.trans[0] == 1.0);
    CHECK(big.trans[1] == -1.0);

    const auto arr = e.to_array();
    const PoseDelta9 again = PoseDelta9::from_array(arr);
    CHECK(again.to_array() == arr);
  }

  TEST_CASE("loss_rot is zero at the truth and equals the weighted geodesic") {
    const Mat3 r = rot_from_euler({10, 20, 30});
    const Mat3 lam = rot_from_euler({-40, 5, 60});
    CHECK(loss_rot(r, r, lam, Mat3::Identity()) < 2e-6);
    const Mat3 other = rot_from_euler({15, 25, 10});
    CHECK(loss_rot(other, r, lam, Mat3::Identity()) ==
          doctest::Approx(geodesic_distance(Mat3(other * lam), Mat3(r * lam))));
  }

  TEST_CASE("loss_rot symmetry element cancels a z offset") {
    const Mat3 r = rot_from_euler({10, 20, 30});
    const Mat3 pred = r * rot_z(-0.9);
    CHECK(loss_rot(pred, r, Mat3::Identity(), Mat3::Identity()) == doctest::Approx(0.9));
    CHECK(loss_rot(pred, r, Mat3::Identity(), rot_z(0.9)) < 2e-6);
  }

  TEST_CASE("loss_track floor and closed form") {
    const Mat3 r = rot_from_euler({3, 4, 5});
    PoseDelta9 p;
    p.trans = Vec3(0.1, -0.2, 0.3);
    p.rot = rot6d_from_matrix(r);
    TaskWeights w;
    w.v1 = 0.4;
    w.v2 = -0.3;
    // Perfect prediction sits on the offset floor v1 + v2 (up to the clamp).
    CHECK(loss_track(p, p.trans, r, w, Mat3::Identity(), Mat3::Identity()) == doctest::Approx(0.1).epsilon(1e-4));

    const Vec3 gt(0.0, 0.0, 0.0);
    const Mat3 gr = Mat3::Identity();
    const double mse = p.trans.squaredNorm() / 3.0;
    const double rot = geodesic_distance(r, gr);
    CHECK(loss_track(p, gt, gr, w, Mat3::Identity(), Mat3::Identity()) ==
          doctest::Approx(std::exp(-w.v1) * mse + w.v1 + w.v2 + std::exp(-w.v2) * rot));
  }

  TEST_CASE("loss_track offsets: v gradients are +1 at a perfect prediction") {
    const Mat3 r = rot_from_euler({3, 4, 5});
    const Rot6D r6 = rot6d_from_matrix(r);
    const Vec3 t(0.1, 0.2, -0.1);
    std::vector<double> x{t[0], t[1], t[2], r6.rx[0], r6.rx[1], r6.rx[2], r6.ry[0], r6.ry[1], r6.ry[2], 0.3, -0.2};
    auto f = [&](auto xs) {
      using S = scalar_of<decltype(xs)>;
      return loss_track<S>(xs.subspan(0, 9), t, r, xs[9], xs[10], Mat3::Identity(), Mat3T<S>::Identity());
    };
    const Eigen::VectorXd g = grad(f, std::span<const double>(x));
    CHECK(g[9] == doctest::Approx(1.0).epsilon(1e-12));
    // The rotation residual bottoms out at the acos clamp, about 1.4e-6 rad.
    CHECK(g[10] == doctest::Approx(1.0).epsilon(1e-5));
  }

  TEST_CASE("loss_multitask closed form and stationarity") {
    TaskWeights w;
    w.s1 = 0.5;
    w.s2 = -1.0;
    w.s3 = 2.0;
    CHECK(loss_multitask(2.0, 3.0, 4.0, w) ==
          doctest::Approx(std::exp(-0.5) * 2 + std::exp(1.0) * 3 + std::exp(-2.0) * 4 + 0.5 - 1.0 + 2.0));

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.05, 10.0);
    for (int i = 0; i < 100; ++i) {
      const double l1 = u(rng), l2 = u(rng), l3 = u(rng);
      std::vector<double> s{std::log(l1), std::log(l2), std::log(l3)};
      auto f = [&](auto xs) {
        using S = scalar_of<decltype(xs)>;
        return loss_multitask<S>(S(l1), S(l2), S(l3), xs[0], xs[1], xs[2]);
      };
      const Eigen::VectorXd g = grad(f, std::span<const double>(s));
      CHECK(g.cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("bank spread and uniformity penalty") {
    const std::vector<Mat3> two{Mat3::Identity(), rot_z(1.0)};
    CHECK(bank_spread(two) == doctest::Approx(1.0));
    CHECK(uniformity_penalty(two) == doctest::Approx(1.0));
    const std::vector<Mat3> same{Mat3::Identity(), Mat3::Identity()};
    CHECK(uniformity_penalty(same) <= 1.0 / kXiFloor);
    CHECK(uniformity_penalty(same) > 1e5);
    const std::vector<Mat3> three{Mat3::Identity(), rot_z(1.0), rot_z(-1.0)};
    CHECK(bank_spread(three) == doctest::Approx((1.0 + 1.0 + 2.0) / 3.0));
  }

  TEST_CASE("loss_symmetric") {
    const std::vector<double> pens{2.0, 4.0};
    CHECK(loss_symmetric(1.0, pens, 0.0) == doctest::Approx(1.0 + 3.0));
    CHECK(loss_symmetric(1.0, pens, std::log(3.0)) == doctest::Approx(1.0 + 1.0 + std::log(3.0)));
  }

  TEST_CASE("spatial softmax sums to one and is shift invariant") {
    const std::vector<double> raw{1.0, 2.0, -3.0, 1000.0, 0.5, 0.0};
    const AttentionMap m = spatial_softmax(3, 2, raw);
    double s = 0.0;
    for (double v : m.values) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0));
    std::vector<double> shifted = raw;
    for (double& v : shifted) v += 7.0;
    const AttentionMap m2 = spatial_softmax(3, 2, shifted);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(m2.values[i] == doctest::Approx(m.values[i]));
    CHECK_THROWS_AS(spatial_softmax(4, 2, raw), DimensionMismatch);
  }

  TEST_CASE("attention BCE") {
    BinaryMask mask(2, 2);
    mask.at(0, 0) = 1;
    mask.at(1, 1) = 1;
    const auto target = normalized_mask_target(mask);
    CHECK(target[0] == doctest::Approx(0.5));
    CHECK(target[1] == 0.0);
    AttentionMap perfect{2, 2, {0.5, 0.0, 0.0, 0.5}};
    AttentionMap uniform{2, 2, {0.25, 0.25, 0.25, 0.25}};
    CHECK(bce_attention(perfect, mask) < bce_attention(uniform, mask));
    const double expect = -(0.5 * std::log(0.25 + kBceEps) + 0.5 * std::log(0.75 + kBceEps)) * 2 / 4 -
                          std::log(0.75 + kBceEps) * 2 / 4;
    CHECK(bce_attention(uniform, mask) == doctest::Approx(expect));
    const auto empty = normalized_mask_target(BinaryMask(2, 2));
    for (double v : empty) CHECK(v == 0.0);
    CHECK_THROWS_AS(bce_attention(uniform, BinaryMask(3, 3)), DimensionMismatch);
  }

  TEST_CASE("logcosh values and overflow safety") {
    PoseDelta9 a, b;
    a.rot = b.rot = Rot6D{};
    CHECK(logcosh(a, b) == doctest::Approx(0.0));
    a.trans = Vec3(1.0, 0.0, 0.0);
    CHECK(logcosh(a, b) == doctest::Approx(std::log(std::cosh(1.0))));
    const std::vector<double> big{1000.0}, zero{0.0};
    const double v = logcosh<double>(std::span<const double>(big), std::span<const double>(zero));
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1000.0 - std::log(2.0)));
  }

  TEST_CASE("welford statistics") {
    WelfordState s;
    for (double x : {1.0, 2.0, 3.0, 4.0}) s = welford_update(s, x);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.variance() == doctest::Approx(5.0 / 3.0));
    CHECK(standardize(2.5, s) == doctest::Approx(0.0));
    WelfordState one = welford_update({}, 3.0);
    CHECK_THROWS_AS(standardize(1.0, one), InsufficientSamples);
  }

  TEST_CASE("grad matches finite differences on a smooth function") {
    std::vector<double> x{0.3, -0.7, 1.1, 0.2, 0.9, -1.3, 0.4, 0.8, -0.5, 1.7};
    auto f = [](auto xs) {
      using S = scalar_of<decltype(xs)>;
      using std::sin;
      using std::exp;
      S acc(0.0);
      for (std::size_t i = 0; i < xs.size(); ++i) acc += sin(xs[i]) * exp(S(0.1 * static_cast<double>(i)) * xs[i]);
      return acc;
    };
    const Eigen::VectorXd g = grad(f, std::span<const double>(x));
    const Eigen::VectorXd fd = finite_diff(f, std::span<const double>(x), 1e-5);
    CHECK(max_relative_error(g, fd) < 1e-8);
  }

  TEST_CASE("grad raises on non-finite results") {
    std::vector<double> x{0.0};
    auto f = [](auto xs) {
      using S = scalar_of<decltype(xs)>;
      using std::sqrt;
      return sqrt(xs[0]);
    };
    CHECK_THROWS_AS(grad(f, std::span<const double>(x)), NonDifferentiablePoint);
  }

  TEST_CASE("relative error uses the declared floor") {
    Eigen::VectorXd a(2), b(2);
    a << 1.0, 0.0;
    b << 1.0, 1e-12;
    CHECK(max_relative_error(a, b) == doctest::Approx(1e-4));
  }
}
