#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "symtrack/cli.hpp"
#include "symtrack/errors.hpp"
#include "symtrack/fit.hpp"
#include "symtrack/track.hpp"

using namespace symtrack;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "symtrack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("symtrack_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> na, nb;
  for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb) return false;
  for (const auto& n : na) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help exits zero on every subcommand") {
    for (const char* sub : {"gen", "gradcheck", "fit", "track"}) {
      const Run r = cli({sub, "--help"});
      CHECK(r.code == kExitOk);
      CHECK(r.out.find("--seed") != std::string::npos);
    }
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"track", "--help"}).out.find("--reflective") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"gen", "--n", "1", "--out", "x", "--bogus"}).code == kExitUsage);
    CHECK(cli({"gradcheck", "--trials", "0"}).code == kExitUsage);
    CHECK(cli({"track", "--scenario", "nowhere", "--out", "x"}).code == kExitUsage);
    CHECK(cli({"track", "--scenario", "all", "--estimator", "model", "--out", "x"}).code == kExitUsage);
  }

  TEST_CASE("builtin meshes") {
    CHECK(load_mesh_arg("builtin:box").faces.size() == 24);
    CHECK(load_mesh_arg("builtin:cylinder").vertices.size() > 32);
    CHECK(load_mesh_arg("builtin:icosphere").faces.size() == 320);
    CHECK_THROWS_AS(load_mesh_arg("builtin:teapot"), ConfigError);
  }

  TEST_CASE("gen is deterministic across worker counts") {
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    const Run ra = cli({"gen", "--mesh", "builtin:cylinder", "--n", "4", "--seed", "7", "--out", a.string()});
    const Run rb = cli({"gen", "--mesh", "builtin:cylinder", "--n", "4", "--seed", "7", "--out", b.string(),
                        "--workers", "3"});
    REQUIRE(ra.code == kExitOk);
    REQUIRE(rb.code == kExitOk);
    CHECK(ra.out.find("manifest.json") != std::string::npos);
    CHECK(same_tree(a, b));
    CHECK(read_manifest(a.string()).sample_count == 4);
  }

  TEST_CASE("gen reports missing meshes and bad configs") {
    const fs::path out = scratch("gen_bad");
    const std::string missing = (out / "no_such_mesh.obj").string();
    Run r = cli({"gen", "--mesh", missing, "--n", "1", "--out", out.string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find(missing) != std::string::npos);

    fs::create_directories(out);
    std::ofstream(out / "cfg.json") << R"({"p_occluder": 1.7})";
    r = cli({"gen", "--mesh", "builtin:box", "--n", "1", "--config", (out / "cfg.json").string(), "--out",
             (out / "d").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("p_occluder") != std::string::npos);

    std::ofstream(out / "tri.obj") << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n";
    r = cli({"gen", "--mesh", (out / "tri.obj").string(), "--n", "1", "--out", (out / "d2").string()});
    CHECK(r.code == kExitUsage);
  }

  TEST_CASE("gradcheck prints one line per loss family") {
    const Run r = cli({"gradcheck", "--trials", "20", "--seed", "3"});
    CHECK(r.code == kExitOk);
    CHECK(count_lines(r.out) == 6);
    for (const char* fam : {"rot_geodesic", "tracking", "multitask", "symmetry_penalty", "logcosh", "attention_bce"}) {
      CHECK(r.out.find(fam) != std::string::npos);
    }
    CHECK(r.out.find("FAIL") == std::string::npos);
  }

  TEST_CASE("fit writes checkpoint and history") {
    const fs::path data = scratch("fit_data");
    REQUIRE(cli({"gen", "--mesh", "builtin:cylinder", "--n", "24", "--seed", "2", "--out", data.string()}).code ==
            kExitOk);

    const fs::path one = scratch("fit_one");
    Run r = cli({"fit", "--data", data.string(), "--epochs", "1", "--warmup", "1", "--out", one.string()});
    REQUIRE(r.code == kExitOk);
    const std::string hist = slurp(one / "history.csv");
    CHECK(count_lines(hist) == 2);
    CHECK(r.out.find("warm-up") != std::string::npos);

    const fs::path z1 = scratch("fit_z1"), z2 = scratch("fit_z2");
    const std::vector<std::string> args{"fit", "--data", data.string(), "--epochs", "3", "--warmup", "1",
                                        "--b2", "64", "--symmetry-axis", "z", "--seed", "5", "--out"};
    auto with_out = [&](const fs::path& p) {
      auto a = args;
      a.push_back(p.string());
      return a;
    };
    REQUIRE(cli(with_out(z1)).code == kExitOk);
    REQUIRE(cli(with_out(z2)).code == kExitOk);
    CHECK(slurp(z1 / "history.csv") == slurp(z2 / "history.csv"));
    const TrainState st = load_checkpoint((z1 / "checkpoint.json").string());
    REQUIRE(st.bank.has_value());
    CHECK(st.bank->size() == 64);
    CHECK(st.bank->axis_mask == std::array<bool, 3>{false, false, true});
    CHECK(st.scorer.has_value());
    CHECK(st.epoch == 3);

    r = cli({"fit", "--data", (data / "nope").string(), "--out", one.string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("manifest") != std::string::npos);
  }

  TEST_CASE("track oracle, resets and reflective comparison") {
    const fs::path out = scratch("track");
    Run r = cli({"track", "--scenario", "all", "--estimator", "oracle", "--out", out.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("fails 0 |") != std::string::npos);
    CHECK(r.out.find("resets 13") != std::string::npos);
    const TrackReport rep =
        report_from_json(nlohmann::json::parse(slurp(out / "translation_only.json")));
    CHECK(rep.resets.size() == 13);
    CHECK(rep.failures() == 0);

    r = cli({"track", "--scenario", "rotation_only", "--estimator", "bias", "--format", "csv", "--fail-budget", "5",
             "--out", out.string()});
    CHECK(r.code == kExitCheckFailed);
    CHECK(fs::exists(out / "rotation_only.csv"));

    auto fails = [&](const char* mode) {
      const fs::path d = out / mode;
      const Run t = cli({"track", "--scenario", "flip_injection", "--estimator", "noise", "--sigma-rot-deg", "0",
                         "--reflective", mode, "--seed", "4", "--out", d.string()});
      REQUIRE(t.code == kExitOk);
      return report_from_json(nlohmann::json::parse(slurp(d / "flip_injection.json"))).failures();
    };
    CHECK(fails("on") <= fails("off"));
  }

  TEST_CASE("track with the model estimator") {
    const fs::path data = scratch("model_data"), model = scratch("model_fit"), out = scratch("model_track");
    REQUIRE(cli({"gen", "--mesh", "builtin:cylinder", "--n", "16", "--seed", "1", "--out", data.string()}).code ==
            kExitOk);
    REQUIRE(cli({"fit", "--data", data.string(), "--epochs", "2", "--warmup", "1", "--b2", "4", "--out",
                 model.string()})
                .code == kExitOk);
    const Run r = cli({"track", "--scenario", "translation_only", "--estimator", "model", "--model",
                       (model / "checkpoint.json").string(), "--frames", "20", "--out", out.string()});
    CHECK(r.code == kExitOk);
    const TrackReport rep = report_from_json(nlohmann::json::parse(slurp(out / "translation_only.json")));
    CHECK(rep.frames.size() == 20);
    CHECK(rep.resets.size() == 1);
  }
}
