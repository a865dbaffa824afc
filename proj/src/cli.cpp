#include "symtrack/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <thread>

#include "symtrack/dataset.hpp"
#include "symtrack/errors.hpp"
#include "symtrack/fit.hpp"
#include "symtrack/gradcheck.hpp"
#include "symtrack/track.hpp"

namespace symtrack {

namespace fs = std::filesystem;

TriMesh load_mesh_arg(const std::string& spec) {
  if (spec == "builtin:box") return make_box(0.10, 0.08, 0.06);
  if (spec == "builtin:cylinder") return make_cylinder(0.04, 0.12, 32);
  if (spec == "builtin:icosphere") return make_icosphere(0.05, 2);
  if (spec.rfind("builtin:", 0) == 0) throw ConfigError("unknown built-in mesh '" + spec + "'");
  try {
    return load_obj(spec);
  } catch (const ParseError& e) {
    throw ParseError(spec + ": " + e.what());
  }
}

namespace {

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

struct GenArgs {
  std::string mesh;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  unsigned workers = default_workers();
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const TriMesh mesh = load_mesh_arg(a.mesh);
  GenConfig cfg;
  if (!a.config.empty()) cfg = load_config_file(a.config, cfg);
  ensure_dir(a.out);
  out << write_dataset(a.out, a.n, mesh, cfg, a.seed, a.workers) << '\n';
  return kExitOk;
}

struct GradcheckArgs {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto fams = run_gradcheck(a.trials, a.seed);
  bool ok = true;
  out << std::scientific << std::setprecision(3);
  for (const auto& f : fams) {
    out << f.name << " max_rel_err=" << f.max_rel_err << " trials=" << f.trials << " resampled=" << f.resampled
        << '\n';
  }
  for (const auto& f : fams) {
    if (f.max_rel_err >= kGradcheckTolerance) {
      ok = false;
      out << "FAIL " << f.name << " config_seed=" << f.worst_seed << '\n';
    }
  }
  return ok ? kExitOk : kExitCheckFailed;
}

struct FitArgs {
  std::string data;
  int epochs = 50;
  int warmup = 25;
  std::size_t b2 = 64;
  std::string axis = "none";
  std::string out;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::string mesh;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const DatasetManifest man = read_manifest(a.data);
  std::vector<TrainSample> data;
  std::vector<FeatureVec> feats;
  data.reserve(man.sample_count);
  for (std::size_t i = 0; i < man.sample_count; ++i) {
    data.push_back(make_train_sample(read_sample(a.data, i)));
    feats.push_back(data.back().features);
  }

  OptimConfig cfg;
  cfg.epochs = a.epochs;
  cfg.warmup_epochs = a.warmup;
  cfg.b2 = a.b2;
  cfg.lr = a.lr;
  cfg.lr_min = std::min(cfg.lr_min, cfg.lr);
  cfg.batch_size = a.batch_size;
  cfg.seed = a.seed;
  cfg.max_delta_m = man.config.max_delta_m;
  cfg.validate();

  TrainState st;
  fit_feature_scaling(st.model, feats);
  if (!a.mesh.empty()) st.lambda_gs = inertia_tensor(load_mesh_arg(a.mesh)).lambda_gs;
  if (a.axis == "z") {
    if (a.b2 < 2) throw ConfigError("--b2 must be at least 2 with a symmetry axis");
    st.bank = make_clustered_bank(a.b2, {false, false, true}, 0.0, 1.0, a.seed);
  }

  const TrainHistory hist = train(st, data, cfg);

  std::size_t skipped = 0;
  for (const auto& r : hist.epochs) skipped += r.skipped;
  if (st.bank) {
    const std::vector<std::size_t> labels = oracle_labels(st, data);
    std::vector<FeatureVec> scaled;
    for (const auto& f : feats) scaled.push_back(standardize_features(st.model, f));
    st.scorer = train_scorer(scaled, labels, st.bank->size(), 300, 0.5);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      agree += select_trainable(*st.bank, *st.scorer, scaled[i]) == labels[i] ? 1 : 0;
    }
    // Fold the standardization into the stored scorer so it accepts raw features.
    const Eigen::MatrixXd w = st.scorer->weights * st.model.feature_scale.cwiseInverse().asDiagonal();
    st.scorer->bias -= w * st.model.feature_mean;
    st.scorer->weights = w;
    out << "scorer agreement with oracle: " << std::fixed << std::setprecision(3)
        << static_cast<double>(agree) / static_cast<double>(data.size()) << '\n';
  }

  ensure_dir(a.out);
  const std::string ckpt = (fs::path(a.out) / "checkpoint.json").string();
  const std::string csv = (fs::path(a.out) / "history.csv").string();
  save_checkpoint(ckpt, st);
  write_history_csv(csv, hist);
  if (!hist.epochs.empty()) {
    const EpochRecord& r = hist.epochs.back();
    out << std::fixed << std::setprecision(4) << "epoch " << r.epoch << (r.warmup ? " (warm-up)" : "")
        << ": loss " << r.loss << ", trans " << r.trans_err_mm << " mm, rot " << r.rot_err_deg << " deg\n";
  }
  out << "skipped samples: " << skipped << '\n' << ckpt << '\n' << csv << '\n';
  return kExitOk;
}

struct TrackArgs {
  std::string scenario;
  std::string estimator = "oracle";
  std::string model;
  std::string mesh = "builtin:cylinder";
  int reset = 15;
  std::string reflective = "off";
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;
  long long fail_budget = -1;
  double fail_trans_mm = 30.0;
  double fail_rot_deg = 20.0;
  double sigma_trans_mm = 1.0;
  double sigma_rot_deg = 0.5;
  double bias_mm = 10.0;
  double max_delta_m = 0.02;
  std::size_t frames = 200;
  unsigned workers = default_workers();
};

int cmd_track(const TrackArgs& a, std::ostream& out) {
  if ((a.estimator == "model") != !a.model.empty()) {
    throw ConfigError("--model is required with --estimator model and only allowed with it");
  }
  std::vector<std::string> names;
  if (a.scenario == "all") {
    names = scenario_names();
  } else {
    names.push_back(a.scenario);
  }

  TrackPolicy policy;
  policy.reset_interval = a.reset;
  policy.fail_trans_mm = a.fail_trans_mm;
  policy.fail_rot_deg = a.fail_rot_deg;
  if (a.reflective == "on") policy.reflective = ReflectiveConfig{};
  policy.validate();

  ScenarioOptions opts;
  opts.frames = a.frames;
  std::optional<TrainState> model;
  if (a.estimator == "model") {
    model = load_checkpoint(a.model);
    opts.render = true;
    opts.mesh = load_mesh_arg(a.mesh);
  }

  std::vector<Trajectory> trajs;
  for (std::size_t i = 0; i < names.size(); ++i) trajs.push_back(make_scenario(names[i], sample_seed(a.seed, i), opts));

  std::vector<TrackJob> jobs;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    Estimator est;
    if (a.estimator == "oracle") {
      est = make_oracle_estimator();
    } else if (a.estimator == "bias") {
      est = make_bias_estimator(Vec3(a.bias_mm / 1000.0, 0.0, 0.0));
    } else if (a.estimator == "noise") {
      est = make_noise_estimator(a.sigma_trans_mm, a.sigma_rot_deg, sample_seed(a.seed ^ 0x5EEDULL, i));
    } else {
      est = make_model_estimator(*model, opts.mesh, opts.cam, a.max_delta_m);
    }
    if (!trajs[i].flip_frames.empty()) est = inject_flips(std::move(est), trajs[i].flip_frames);
    jobs.push_back({&trajs[i], std::move(est), policy});
  }
  const std::vector<TrackReport> reports = run_track_jobs(jobs, a.workers);

  ensure_dir(a.out);
  bool over_budget = false;
  for (const auto& r : reports) {
    const std::string path = emit_report(r, a.out, r.scenario, a.format);
    out << summary_row(r) << " | resets " << r.resets.size() << '\n' << "  " << path << '\n';
    if (a.fail_budget >= 0 && r.failures() > static_cast<std::size_t>(a.fail_budget)) over_budget = true;
  }
  if (over_budget) {
    out << "failure budget of " << a.fail_budget << " exceeded\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pose-tracking losses, synthetic RGB-D data and evaluation harness"};
  app.name("symtrack");
  app.require_subcommand(1);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic RGB-D pair dataset");
  gen->add_option("--mesh", ga.mesh, "OBJ mesh path or builtin:box|cylinder|icosphere")->required();
  gen->add_option("--n", ga.n, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "Master seed (64-bit)");
  gen->add_option("--config", ga.config, "Flat JSON of generation overrides");
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_option("--workers", ga.workers, "Generation threads (output does not depend on it)")
      ->check(CLI::PositiveNumber);

  GradcheckArgs ka;
  auto* gck = app.add_subcommand("gradcheck", "Compare loss gradients with central finite differences");
  gck->add_option("--trials", ka.trials, "Random configurations per loss family")->check(CLI::PositiveNumber);
  gck->add_option("--seed", ka.seed, "Master seed (64-bit)");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Train the toy regressor on a generated dataset");
  fit->add_option("--data", fa.data, "Dataset directory holding manifest.json")->required();
  fit->add_option("--epochs", fa.epochs, "Total epochs, warm-up included")->check(CLI::NonNegativeNumber);
  fit->add_option("--warmup", fa.warmup, "LogCosh warm-up epochs")->check(CLI::NonNegativeNumber);
  fit->add_option("--b2", fa.b2, "Symmetry bank size")->check(CLI::PositiveNumber);
  fit->add_option("--symmetry-axis", fa.axis, "Continuous symmetry axis")->check(CLI::IsMember({"z", "none"}));
  fit->add_option("--out", fa.out, "Output directory for checkpoint.json and history.csv")->required();
  fit->add_option("--seed", fa.seed, "Seed for shuffling and bank initialization");
  fit->add_option("--lr", fa.lr, "Base learning rate")->check(CLI::PositiveNumber);
  fit->add_option("--batch-size", fa.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  fit->add_option("--mesh", fa.mesh, "Mesh whose inertia tensor weights the rotation loss (default identity)");

  TrackArgs ta;
  auto* trk = app.add_subcommand("track", "Run the tracking benchmark on scripted scenarios");
  std::vector<std::string> scen = scenario_names();
  scen.push_back("all");
  trk->add_option("--scenario", ta.scenario, "Scenario name or all")->required()->check(CLI::IsMember(scen));
  trk->add_option("--estimator", ta.estimator, "Pose-change estimator")
      ->check(CLI::IsMember({"oracle", "bias", "noise", "model"}));
  trk->add_option("--model", ta.model, "Checkpoint path (estimator model only)");
  trk->add_option("--mesh", ta.mesh, "Mesh rendered for the model estimator");
  trk->add_option("--reset", ta.reset, "Re-initialization interval in frames")->check(CLI::PositiveNumber);
  trk->add_option("--reflective", ta.reflective, "Reflective flip filtering")->check(CLI::IsMember({"on", "off"}));
  trk->add_option("--out", ta.out, "Report directory")->required();
  trk->add_option("--format", ta.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  trk->add_option("--seed", ta.seed, "Scenario and estimator seed (64-bit)");
  trk->add_option("--fail-budget", ta.fail_budget, "Exit 1 when any scenario fails more often (-1 disables)");
  trk->add_option("--fail-trans-mm", ta.fail_trans_mm, "Translation failure threshold")->check(CLI::PositiveNumber);
  trk->add_option("--fail-rot-deg", ta.fail_rot_deg, "Rotation failure threshold")->check(CLI::PositiveNumber);
  trk->add_option("--sigma-trans-mm", ta.sigma_trans_mm, "Noise estimator translation sigma")
      ->check(CLI::NonNegativeNumber);
  trk->add_option("--sigma-rot-deg", ta.sigma_rot_deg, "Noise estimator rotation sigma")
      ->check(CLI::NonNegativeNumber);
  trk->add_option("--bias-mm", ta.bias_mm, "Bias estimator offset along x per frame");
  trk->add_option("--max-delta-m", ta.max_delta_m, "Translation scale of the model estimator")
      ->check(CLI::PositiveNumber);
  trk->add_option("--frames", ta.frames, "Frames per scenario")->check(CLI::PositiveNumber);
  trk->add_option("--workers", ta.workers, "Concurrent scenario runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(ga, out);
    if (*gck) return cmd_gradcheck(ka, out);
    if (*fit) return cmd_fit(fa, out);
    if (*trk) return cmd_track(ta, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace symtrack
