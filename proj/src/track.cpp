#include "symtrack/track.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "symtrack/errors.hpp"

namespace symtrack {

using nlohmann::json;

void Trajectory::validate() const {
  if (frames.empty()) throw ConfigError("trajectory has no frames");
  const RgbdFrame* first = nullptr;
  for (const auto& f : frames) {
    if (!is_rotation(f.gt.rot, 1e-6)) throw DegenerateInput("trajectory ground truth is not a rotation");
    if (!f.observed) continue;
    if (!first) first = &*f.observed;
    if (f.observed->w != first->w || f.observed->h != first->h) {
      throw DimensionMismatch("trajectory frames differ in size");
    }
  }
}

void TrackPolicy::validate() const {
  if (reset_interval < 1) throw ConfigError("reset_interval must be at least 1");
  if (!(fail_trans_mm > 0.0)) throw ConfigError("fail_trans_mm must be positive");
  if (!(fail_rot_deg > 0.0)) throw ConfigError("fail_rot_deg must be positive");
  if (reflective && (reflective->threshold_deg <= 0.0 || reflective->max_repasses < 0)) {
    throw ConfigError("reflective threshold must be positive and max_repasses non-negative");
  }
}

std::pair<double, double> pose_errors(const Pose& est, const Pose& gt) {
  const double t = (est.trans - gt.trans).norm() * 1000.0;
  // atan2 form stays accurate near zero, where acos of the trace loses digits.
  const Mat3 d = est.rot.transpose() * gt.rot;
  const Vec3 s(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double angle = std::atan2(0.5 * s.norm(), 0.5 * (d.trace() - 1.0));
  return {t, angle * kDegPerRad};
}

// ---------------------------------------------------------------------------
// Estimators

namespace {

Pose gt_motion(const EstimatorInput& in) {
  const auto& fr = in.traj->frames;
  return relative(fr[in.frame - 1].gt, fr[in.frame].gt);
}

}  // namespace

Estimator make_oracle_estimator(double max_delta_m) {
  return {"oracle", max_delta_m, [max_delta_m](const EstimatorInput& in) {
            return encode_delta(relative(in.prior, in.traj->frames[in.frame].gt), max_delta_m);
          }};
}

Estimator make_bias_estimator(const Vec3& bias_m, double max_delta_m) {
  return {"bias", max_delta_m, [bias_m, max_delta_m](const EstimatorInput& in) {
            Pose m = gt_motion(in);
            // The world-frame bias expressed in the prior's object frame.
            m.trans += in.prior.rot.transpose() * bias_m;
            return encode_delta(m, max_delta_m);
          }};
}

Estimator make_noise_estimator(double sigma_trans_mm, double sigma_rot_deg, std::uint64_t seed, double max_delta_m) {
  auto rng = std::make_shared<Rng>(seed);
  return {"noise", max_delta_m, [=](const EstimatorInput& in) {
            std::normal_distribution<double> n01(0.0, 1.0);
            Pose m = gt_motion(in);
            const Vec3 dt(n01(*rng), n01(*rng), n01(*rng));
            m.trans += dt * (sigma_trans_mm / 1000.0);
            Vec3 axis(n01(*rng), n01(*rng), n01(*rng));
            const double angle = n01(*rng) * sigma_rot_deg * kRadPerDeg;
            if (axis.norm() > 1e-12 && angle != 0.0) m.rot = m.rot * rot_from_axis_angle(axis.normalized(), angle);
            return encode_delta(m, max_delta_m);
          }};
}

Estimator make_model_estimator(TrainState state, TriMesh mesh, Camera cam, double max_delta_m) {
  auto st = std::make_shared<const TrainState>(std::move(state));
  auto ms = std::make_shared<const TriMesh>(std::move(mesh));
  auto albedo = std::make_shared<const std::vector<std::array<std::uint8_t, 3>>>(default_albedo(*ms));
  return {"model", max_delta_m, [st, ms, albedo, cam](const EstimatorInput& in) {
            const auto& obs = in.traj->frames[in.frame].observed;
            if (!obs) throw ConfigError("model estimator needs observed frames");
            const RgbdFrame pred = render(*ms, in.prior, cam, *albedo);
            PoseDelta9 d = forward(st->model, frame_features(*obs, pred));
            if (st->bank && st->scorer) {
              const std::size_t k = select_trainable(*st->bank, *st->scorer, frame_features(*obs, pred));
              const Mat3 r = matrix_from_rot6d(d.rot) * symmetry_matrix(*st->bank, k);
              d.rot = rot6d_from_matrix(r);
            }
            return d;
          }};
}

Estimator inject_flips(Estimator base, std::vector<std::size_t> frames) {
  Estimator e;
  e.name = base.name + "+flip";
  e.max_delta_m = base.max_delta_m;
  e.estimate = [base = std::move(base), frames = std::move(frames)](const EstimatorInput& in) {
    PoseDelta9 d = base.estimate(in);
    if (in.pass != 0 || std::find(frames.begin(), frames.end(), in.frame) == frames.end()) return d;
    // prior.R * d.R  ->  Rx(pi) * prior.R * d.R
    const Mat3 r = in.prior.rot.transpose() * rot_x(kPi) * in.prior.rot * matrix_from_rot6d(d.rot);
    d.rot = rot6d_from_matrix(r);
    return d;
  };
  return e;
}

// ---------------------------------------------------------------------------
// Tracking loop

TrackReport run_track(const Trajectory& traj, const Estimator& estimator, const TrackPolicy& policy) {
  traj.validate();
  policy.validate();
  TrackReport rep;
  rep.scenario = traj.scenario_name;
  rep.estimator = estimator.name;
  rep.policy = policy;
  rep.frames.resize(traj.frames.size());

  Pose state = traj.frames[0].gt;
  for (std::size_t k = 1; k < traj.frames.size(); ++k) {
    FrameRecord& fr = rep.frames[k];
    const Pose& gt = traj.frames[k].gt;
    try {
      EstimatorInput in{&traj, k, state, 0};
      Pose cand = compose(state, decode_delta(estimator.estimate(in), estimator.max_delta_m));
      if (policy.reflective) {
        const EulerXYZ prev = euler_from_rot(state.rot);
        ReflectiveResult rr = reflective_filter(prev, euler_from_rot(cand.rot), *policy.reflective);
        fr.flagged = rr.any();
        for (int pass = 1; rr.any() && pass <= policy.reflective->max_repasses; ++pass) {
          in.pass = pass;
          cand = compose(state, decode_delta(estimator.estimate(in), estimator.max_delta_m));
          rr = reflective_filter(prev, euler_from_rot(cand.rot), *policy.reflective);
        }
        if (rr.any()) cand.rot = rot_from_euler(rr.angles);
      }
      state = cand;
    } catch (const Error&) {
      fr.estimator_failed = true;
      fr.failure = true;
      ++rep.estimator_failures;
    }
    const auto [te, re] = pose_errors(state, gt);
    fr.trans_err_mm = te;
    fr.rot_err_deg = re;

    if (k % static_cast<std::size_t>(policy.reset_interval) == 0) {
      ResetEvent ev;
      ev.frame = k;
      ev.pre_trans_mm = te;
      ev.pre_rot_deg = re;
      ev.failure = te > policy.fail_trans_mm || re > policy.fail_rot_deg;
      state = gt;
      const auto [pt, pr] = pose_errors(state, gt);
      ev.post_trans_mm = pt;
      ev.post_rot_deg = pr;
      fr.reset = true;
      if (ev.failure) {
        fr.failure = true;
        ++rep.window_failures;
      }
      rep.resets.push_back(ev);
    }
  }
  return rep;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

TrackSummary metrics(const TrackReport& report) {
  std::vector<double> t, r;
  for (const auto& f : report.frames) {
    if (f.reset) continue;
    t.push_back(f.trans_err_mm);
    r.push_back(f.rot_err_deg);
  }
  return {summarize(t), summarize(r), report.failures()};
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json summary_json(const MetricSummary& m) { return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}}; }

}  // namespace

json report_to_json(const TrackReport& rep) {
  json frames = json::array();
  for (std::size_t k = 0; k < rep.frames.size(); ++k) {
    const FrameRecord& f = rep.frames[k];
    frames.push_back({{"frame", k},
                      {"trans_err_mm", f.trans_err_mm},
                      {"rot_err_deg", f.rot_err_deg},
                      {"reset", f.reset},
                      {"failure", f.failure},
                      {"flagged", f.flagged},
                      {"estimator_failed", f.estimator_failed}});
  }
  json resets = json::array();
  for (const auto& e : rep.resets) {
    resets.push_back({{"frame", e.frame},
                      {"pre_trans_mm", e.pre_trans_mm},
                      {"pre_rot_deg", e.pre_rot_deg},
                      {"post_trans_mm", e.post_trans_mm},
                      {"post_rot_deg", e.post_rot_deg},
                      {"failure", e.failure}});
  }
  const TrackSummary s = metrics(rep);
  json policy = {{"reset_interval", rep.policy.reset_interval},
                 {"fail_trans_mm", rep.policy.fail_trans_mm},
                 {"fail_rot_deg", rep.policy.fail_rot_deg},
                 {"reflective", rep.policy.reflective.has_value()}};
  if (rep.policy.reflective) {
    policy["reflective_threshold_deg"] = rep.policy.reflective->threshold_deg;
    policy["reflective_max_repasses"] = rep.policy.reflective->max_repasses;
  }
  return {{"scenario", rep.scenario},
          {"estimator", rep.estimator},
          {"policy", policy},
          {"failure_definition",
           "a reset window fails when the error just before re-initialization exceeds fail_trans_mm or "
           "fail_rot_deg; frames where the estimator raised are counted as failures too; this definition is "
           "specific to this harness"},
          {"frames", frames},
          {"resets", resets},
          {"window_failures", rep.window_failures},
          {"estimator_failures", rep.estimator_failures},
          {"summary", {{"trans_err_mm", summary_json(s.trans_mm)},
                       {"rot_err_deg", summary_json(s.rot_deg)},
                       {"failures", s.failures}}}};
}

TrackReport report_from_json(const json& j) {
  try {
    TrackReport rep;
    rep.scenario = j.at("scenario").get<std::string>();
    rep.estimator = j.at("estimator").get<std::string>();
    const json& p = j.at("policy");
    rep.policy.reset_interval = p.at("reset_interval").get<int>();
    rep.policy.fail_trans_mm = p.at("fail_trans_mm").get<double>();
    rep.policy.fail_rot_deg = p.at("fail_rot_deg").get<double>();
    if (p.at("reflective").get<bool>()) {
      rep.policy.reflective = ReflectiveConfig{p.at("reflective_threshold_deg").get<double>(),
                                               p.at("reflective_max_repasses").get<int>()};
    }
    for (const auto& f : j.at("frames")) {
      FrameRecord r;
      r.trans_err_mm = f.at("trans_err_mm").get<double>();
      r.rot_err_deg = f.at("rot_err_deg").get<double>();
      r.reset = f.at("reset").get<bool>();
      r.failure = f.at("failure").get<bool>();
      r.flagged = f.at("flagged").get<bool>();
      r.estimator_failed = f.at("estimator_failed").get<bool>();
      rep.frames.push_back(r);
    }
    for (const auto& e : j.at("resets")) {
      ResetEvent ev;
      ev.frame = e.at("frame").get<std::size_t>();
      ev.pre_trans_mm = e.at("pre_trans_mm").get<double>();
      ev.pre_rot_deg = e.at("pre_rot_deg").get<double>();
      ev.post_trans_mm = e.at("post_trans_mm").get<double>();
      ev.post_rot_deg = e.at("post_rot_deg").get<double>();
      ev.failure = e.at("failure").get<bool>();
      rep.resets.push_back(ev);
    }
    rep.window_failures = j.at("window_failures").get<std::size_t>();
    rep.estimator_failures = j.at("estimator_failures").get<std::size_t>();
    return rep;
  } catch (const json::exception& e) {
    throw ParseError(std::string("track report: ") + e.what());
  }
}

std::string report_to_csv(const TrackReport& rep) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "frame,trans_err_mm,rot_err_deg,reset,failure\n";
  for (std::size_t k = 0; k < rep.frames.size(); ++k) {
    const FrameRecord& f = rep.frames[k];
    out << k << ',' << f.trans_err_mm << ',' << f.rot_err_deg << ',' << (f.reset ? 1 : 0) << ','
        << (f.failure ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string emit_report(const TrackReport& report, const std::string& dir, const std::string& stem,
                        const std::string& format) {
  if (format != "json" && format != "csv") throw ConfigError("format must be json or csv, got '" + format + "'");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::string path = (std::filesystem::path(dir) / (stem + "." + format)).string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  if (format == "json") {
    out << report_to_json(report).dump(1) << '\n';
  } else {
    out << report_to_csv(report);
  }
  if (!out) throw IoError("write failed: " + path);
  return path;
}

std::string summary_row(const TrackReport& report) {
  const TrackSummary s = metrics(report);
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << report.scenario << " [" << report.estimator << "]: trans " << s.trans_mm.mean << " ± " << s.trans_mm.std
      << " mm | rot " << s.rot_deg.mean << " ± " << s.rot_deg.std << " deg | fails " << s.failures;
  return out.str();
}

std::vector<TrackReport> run_track_jobs(const std::vector<TrackJob>& jobs, unsigned workers) {
  std::vector<TrackReport> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = run_track(*jobs[i].traj, jobs[i].estimator, jobs[i].policy);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace symtrack
