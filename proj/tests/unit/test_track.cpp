#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "symtrack/errors.hpp"
#include "symtrack/track.hpp"

using namespace symtrack;
namespace fs = std::filesystem;

namespace {

Trajectory scenario(const std::string& name, std::uint64_t seed = 1) { return make_scenario(name, seed, {}); }

TrackReport report_with(const std::vector<double>& trans, const std::vector<double>& rot) {
  TrackReport r;
  r.scenario = "manual";
  r.estimator = "none";
  for (std::size_t i = 0; i < trans.size(); ++i) {
    FrameRecord f;
    f.trans_err_mm = trans[i];
    f.rot_err_deg = rot[i];
    r.frames.push_back(f);
  }
  return r;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("track") {
  TEST_CASE("pose errors") {
    const Pose a{rot_from_euler({10, 20, 30}), Vec3(0.1, 0.2, 0.3)};
    const auto [t0, r0] = pose_errors(a, a);
    CHECK(t0 == 0.0);
    CHECK(r0 == 0.0);
    const Pose b{a.rot * rot_x(0.5 * kRadPerDeg), a.trans + Vec3(0.003, 0.0, -0.004)};
    const auto [t1, r1] = pose_errors(b, a);
    CHECK(t1 == doctest::Approx(5.0));
    CHECK(r1 == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("scenarios") {
    const auto names = scenario_names();
    CHECK(names.size() == 5);
    for (const auto& n : names) {
      const Trajectory t = scenario(n);
      CHECK(t.frames.size() == 200);
      CHECK(t.scenario_name == n);
      CHECK_NOTHROW(t.validate());
      const Trajectory again = scenario(n);
      CHECK(again.frames[150].gt.rot == t.frames[150].gt.rot);
    }
    CHECK_THROWS_AS(scenario("nope"), ConfigError);
    CHECK(scenario("flip_injection").flip_frames.size() == 4);
    CHECK(scenario("occlusion_ramp").frames.back().occlusion == doctest::Approx(0.75));
    CHECK_THROWS_AS(Trajectory{}.validate(), ConfigError);
  }

  TEST_CASE("oracle estimator tracks perfectly on every scenario") {
    for (const auto& n : scenario_names()) {
      const TrackReport r = run_track(scenario(n, 4), make_oracle_estimator(), TrackPolicy{});
      CHECK(r.frames.size() == 200);
      CHECK(r.failures() == 0);
      CHECK(r.resets.size() == 13);
      for (const auto& f : r.frames) {
        CHECK(f.trans_err_mm < 1e-6);
        CHECK(f.rot_err_deg < 2e-6);
      }
    }
  }

  TEST_CASE("constant bias follows the closed-form error ramp") {
    const TrackReport r = run_track(scenario("rotation_only", 2), make_bias_estimator(Vec3(0.01, 0, 0)), TrackPolicy{});
    for (std::size_t k = 1; k < r.frames.size(); ++k) {
      const double expect = 10.0 * static_cast<double>((k - 1) % 15 + 1);
      CHECK(r.frames[k].trans_err_mm == doctest::Approx(expect).epsilon(1e-9));
    }
    CHECK(r.frames[0].trans_err_mm == 0.0);
    REQUIRE(r.resets.size() == 13);
    for (std::size_t i = 0; i < r.resets.size(); ++i) {
      CHECK(r.resets[i].frame == 15 * (i + 1));
      CHECK(r.resets[i].pre_trans_mm == doctest::Approx(150.0));
      CHECK(r.resets[i].post_trans_mm == 0.0);
      CHECK(r.resets[i].failure);
      CHECK(r.frames[r.resets[i].frame].reset);
    }
    CHECK(r.failures() == 13);
  }

  TEST_CASE("reset interval one and failure thresholds") {
    TrackPolicy p;
    p.reset_interval = 1;
    const TrackReport r = run_track(scenario("translation_only"), make_bias_estimator(Vec3(0.01, 0, 0)), p);
    CHECK(r.resets.size() == 199);
    CHECK(r.failures() == 0);

    p.reset_interval = 15;
    p.fail_trans_mm = 150.5;
    CHECK(run_track(scenario("translation_only"), make_bias_estimator(Vec3(0.01, 0, 0)), p).failures() == 0);

    p.reset_interval = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = TrackPolicy{};
    p.fail_rot_deg = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }

  TEST_CASE("reflective filtering removes an injected flip") {
    const Trajectory t = scenario("flip_injection", 3);
    REQUIRE_FALSE(t.flip_frames.empty());
    const Estimator est = inject_flips(make_noise_estimator(0.0, 0.0, 1), t.flip_frames);

    const TrackReport off = run_track(t, est, TrackPolicy{});
    TrackPolicy on_policy;
    on_policy.reflective = ReflectiveConfig{};
    const TrackReport on = run_track(t, est, on_policy);

    for (std::size_t k : t.flip_frames) {
      CHECK(off.frames[k].rot_err_deg > 170.0);
      CHECK(on.frames[k].flagged);
      CHECK(on.frames[k].rot_err_deg == doctest::Approx(on.frames[k - 1].rot_err_deg).epsilon(1e-6));
      CHECK(on.frames[k + 1].rot_err_deg < 1e-3);
    }
    CHECK(on.failures() <= off.failures());
    CHECK(on.failures() == 0);
  }

  TEST_CASE("without re-passes the flagged components keep the previous angles") {
    const Trajectory t = scenario("flip_injection", 3);
    const Estimator est = inject_flips(make_noise_estimator(0.0, 0.0, 1), t.flip_frames);
    TrackPolicy p;
    p.reflective = ReflectiveConfig{100.0, 0};
    const TrackReport r = run_track(t, est, p);
    for (std::size_t k : t.flip_frames) {
      CHECK(r.frames[k].flagged);
      CHECK(r.frames[k].rot_err_deg < 100.0);
    }
  }

  TEST_CASE("estimator failures carry the state and are counted") {
    const Trajectory t = scenario("translation_only");
    const Estimator base = make_oracle_estimator();
    Estimator flaky{"flaky", base.max_delta_m, [base](const EstimatorInput& in) {
                      if (in.frame == 5) throw DegenerateInput("bad frame");
                      return base.estimate(in);
                    }};
    const TrackReport r = run_track(t, flaky, TrackPolicy{});
    CHECK(r.frames[5].estimator_failed);
    CHECK(r.frames[5].failure);
    CHECK(r.estimator_failures == 1);
    CHECK(r.failures() == r.window_failures + 1);
    CHECK(r.frames[5].trans_err_mm > 0.0);
    CHECK(r.frames[6].trans_err_mm < 1e-6);
  }

  TEST_CASE("noise estimator is seeded") {
    const Trajectory t = scenario("hard_interaction");
    const TrackReport a = run_track(t, make_noise_estimator(2.0, 1.0, 9), TrackPolicy{});
    const TrackReport b = run_track(t, make_noise_estimator(2.0, 1.0, 9), TrackPolicy{});
    CHECK(a.frames == b.frames);
    const TrackReport c = run_track(t, make_noise_estimator(2.0, 1.0, 10), TrackPolicy{});
    CHECK_FALSE(a.frames == c.frames);
  }

  TEST_CASE("metrics") {
    TrackSummary s = metrics(report_with({0, 0, 0}, {0, 0, 0}));
    CHECK(s.trans_mm.mean == 0.0);
    CHECK(s.trans_mm.std == 0.0);

    s = metrics(report_with({1, 2, 3}, {4, 4, 4}));
    CHECK(s.trans_mm.mean == doctest::Approx(2.0));
    CHECK(s.trans_mm.std == doctest::Approx(1.0));
    CHECK(s.rot_deg.std == 0.0);
    CHECK(s.trans_mm.count == 3);

    TrackReport r = report_with({1, 2, 3, 100}, {0, 0, 0, 0});
    r.frames[3].reset = true;
    s = metrics(r);
    CHECK(s.trans_mm.count == 3);
    CHECK(s.trans_mm.mean == doctest::Approx(2.0));

    const TrackReport noisy = run_track(scenario("hard_interaction"), make_noise_estimator(3.0, 2.0, 1), TrackPolicy{});
    WelfordState w;
    for (const auto& f : noisy.frames) {
      if (!f.reset) w = welford_update(w, f.rot_err_deg);
    }
    const TrackSummary m = metrics(noisy);
    CHECK(m.rot_deg.mean == doctest::Approx(w.mean).epsilon(1e-10));
    CHECK(m.rot_deg.std == doctest::Approx(std::sqrt(w.variance())).epsilon(1e-10));
    CHECK(m.failures == noisy.failures());
    CHECK(summarize({}).count == 0);
  }

  TEST_CASE("report serialization") {
    const fs::path dir = fs::temp_directory_path() / "symtrack_test_reports";
    fs::remove_all(dir);
    fs::create_directories(dir);
    TrackPolicy p;
    p.reflective = ReflectiveConfig{90.0, 2};
    const TrackReport r = run_track(scenario("rotation_only"), make_noise_estimator(4.0, 3.0, 2), p);

    const TrackReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    CHECK(back.frames == r.frames);
    CHECK(back.resets == r.resets);
    CHECK(back.window_failures == r.window_failures);
    CHECK(back.scenario == r.scenario);
    CHECK(back.policy.reflective->max_repasses == 2);
    CHECK(report_to_json(back) == report_to_json(r));
    CHECK(report_to_json(r).contains("failure_definition"));
    CHECK(report_to_json(r)["summary"]["failures"] == r.failures());

    const std::string csv = report_to_csv(r);
    CHECK(csv.rfind("frame,trans_err_mm,rot_err_deg,reset,failure\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
    CHECK(report_to_csv(TrackReport{}) == "frame,trans_err_mm,rot_err_deg,reset,failure\n");

    const std::string jp = emit_report(r, dir.string(), "rot", "json");
    CHECK(fs::path(jp).extension() == ".json");
    CHECK(report_from_json(nlohmann::json::parse(slurp(jp))).frames == r.frames);
    const std::string cp = emit_report(r, dir.string(), "rot", "csv");
    CHECK(slurp(cp) == csv);
    CHECK_THROWS_AS(emit_report(r, dir.string(), "rot", "xml"), ConfigError);
    CHECK(fs::exists(fs::path(emit_report(r, (dir / "made" / "deeper").string(), "rot", "json"))));
    CHECK_THROWS_AS(emit_report(r, jp, "rot", "json"), IoError);

    const std::string row = summary_row(r);
    CHECK(row.find("rotation_only") != std::string::npos);
    CHECK(row.find("fails") != std::string::npos);
  }

  TEST_CASE("parallel jobs keep order and match sequential runs") {
    std::vector<Trajectory> trajs;
    for (const auto& n : scenario_names()) trajs.push_back(scenario(n, 6));
    std::vector<TrackJob> jobs;
    for (const auto& t : trajs) jobs.push_back({&t, make_noise_estimator(2.0, 1.0, 5), TrackPolicy{}});
    const auto par = run_track_jobs(jobs, 4);
    REQUIRE(par.size() == trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      CHECK(par[i].scenario == trajs[i].scenario_name);
      CHECK(par[i].frames == run_track(trajs[i], make_noise_estimator(2.0, 1.0, 5), TrackPolicy{}).frames);
    }
  }

  TEST_CASE("rendered scenario frames carry observations") {
    ScenarioOptions o;
    o.frames = 3;
    o.render = true;
    o.mesh = make_cylinder(0.04, 0.12, 16);
    const Trajectory t = make_scenario("occlusion_ramp", 1, o);
    REQUIRE(t.frames.size() == 3);
    for (const auto& f : t.frames) {
      REQUIRE(f.observed.has_value());
      CHECK(f.observed->fg_mask.count() > 0);
      CHECK(mask_subset(f.observed->unoccl_mask, f.observed->fg_mask));
    }
  }
}
