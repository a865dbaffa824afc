#include "symtrack/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <filesystem>
#include <fstream>
#include <thread>

#include "symtrack/image_io.hpp"

namespace fs = std::filesystem;

namespace symtrack {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// One entry per configurable scalar: how to read it for the echo and how to
// set it from JSON.
struct Field {
  const char* name;
  enum class Kind { kReal, kInt } kind;
  std::function<double(const GenConfig&)> get;
  std::function<void(GenConfig&, double)> set;
};

#define SYMTRACK_REAL(key, expr) \
  Field{key, Field::Kind::kReal, [](const GenConfig& c) { return static_cast<double>(c.expr); }, \
        [](GenConfig& c, double v) { c.expr = v; }}
#define SYMTRACK_INT(key, expr, type) \
  Field{key, Field::Kind::kInt, [](const GenConfig& c) { return static_cast<double>(c.expr); }, \
        [](GenConfig& c, double v) { c.expr = static_cast<type>(v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SYMTRACK_REAL("p_occluder", aug.p_occluder),
      SYMTRACK_REAL("p_full_occlusion", aug.p_full_occlusion),
      SYMTRACK_REAL("p_contrast", aug.p_contrast),
      SYMTRACK_REAL("alpha_min", aug.alpha_min),
      SYMTRACK_REAL("alpha_max", aug.alpha_max),
      SYMTRACK_REAL("beta_min", aug.beta_min),
      SYMTRACK_REAL("beta_max", aug.beta_max),
      SYMTRACK_REAL("p_gamma", aug.p_gamma),
      SYMTRACK_REAL("gamma_min", aug.gamma_min),
      SYMTRACK_REAL("gamma_max", aug.gamma_max),
      SYMTRACK_REAL("rgb_noise_sigma", aug.rgb_noise_sigma),
      SYMTRACK_REAL("hsv_noise_sigma_h", aug.hsv_noise_sigma[0]),
      SYMTRACK_REAL("hsv_noise_sigma_s", aug.hsv_noise_sigma[1]),
      SYMTRACK_REAL("hsv_noise_sigma_v", aug.hsv_noise_sigma[2]),
      SYMTRACK_INT("blur_kernel", aug.blur_kernel, int),
      SYMTRACK_INT("depth_downsample_factor", aug.depth_downsample_factor, int),
      SYMTRACK_REAL("p_modality_dropout", aug.p_modality_dropout),
      SYMTRACK_REAL("axial_a0", noise.a0),
      SYMTRACK_REAL("axial_a1", noise.a1),
      SYMTRACK_REAL("axial_a2", noise.a2),
      SYMTRACK_REAL("axial_a3", noise.a3),
      SYMTRACK_REAL("lateral_x_b0", noise.lateral_x_b0),
      SYMTRACK_REAL("lateral_x_b1", noise.lateral_x_b1),
      SYMTRACK_REAL("lateral_y_b0", noise.lateral_y_b0),
      SYMTRACK_REAL("lateral_y_b1", noise.lateral_y_b1),
      SYMTRACK_REAL("delta_trans_m", delta.trans_m),
      SYMTRACK_REAL("delta_rot_deg", delta.rot_deg),
      SYMTRACK_REAL("max_delta_m", max_delta_m),
      SYMTRACK_REAL("distance_m", distance_m),
      SYMTRACK_INT("n_viewpoints", n_viewpoints, std::size_t),
      SYMTRACK_INT("width", cam.width, int),
      SYMTRACK_INT("height", cam.height, int),
      SYMTRACK_REAL("fx", cam.fx),
      SYMTRACK_REAL("fy", cam.fy),
      SYMTRACK_REAL("cx", cam.cx),
      SYMTRACK_REAL("cy", cam.cy),
      SYMTRACK_REAL("near", cam.near),
      SYMTRACK_REAL("far", cam.far),
      SYMTRACK_REAL("occluder_radius_x", occluder_radii[0]),
      SYMTRACK_REAL("occluder_radius_y", occluder_radii[1]),
      SYMTRACK_REAL("occluder_radius_z", occluder_radii[2]),
  };
  return f;
}

#undef SYMTRACK_REAL
#undef SYMTRACK_INT

void validate(const GenConfig& c) {
  c.aug.validate();
  if (!(c.delta.trans_m >= 0.0)) throw ConfigError("delta_trans_m must be >= 0");
  if (!(c.delta.rot_deg >= 0.0 && c.delta.rot_deg < 90.0)) throw ConfigError("delta_rot_deg must be in [0, 90)");
  if (!(c.max_delta_m > 0.0)) throw ConfigError("max_delta_m must be > 0");
  if (!(c.distance_m > 0.0)) throw ConfigError("distance_m must be > 0");
  if (c.n_viewpoints < 1) throw ConfigError("n_viewpoints must be >= 1");
  if (c.cam.width < 1 || c.cam.height < 1) throw ConfigError("width and height must be >= 1");
  if (!(c.cam.fx > 0.0 && c.cam.fy > 0.0)) throw ConfigError("fx and fy must be > 0");
  if (!(c.cam.near > 0.0 && c.cam.near < c.cam.far)) throw ConfigError("near/far must satisfy 0 < near < far");
  for (int i = 0; i < 3; ++i) {
    if (!(c.occluder_radii[i] > 0.0)) throw ConfigError("occluder radii must be > 0");
  }
}

std::string name(const std::string& stem, std::size_t i, const char* ext) {
  return stem + "_" + std::to_string(i) + ext;
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index) {
  return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(index) + 0x632BE59BD9B4E019ULL));
}

Sample generate_sample(const TriMesh& mesh, const GenConfig& cfg, std::uint64_t master_seed, std::size_t index) {
  Sample s;
  s.index = index;
  s.seed = sample_seed(master_seed, index);
  Rng rng(s.seed);

  const std::size_t vp = std::uniform_int_distribution<std::size_t>(0, cfg.n_viewpoints - 1)(rng);
  const PosePair pair = sample_pose_pair(rng, vp, cfg.n_viewpoints, cfg.delta, cfg.distance_m);
  s.pose_prev = pair.prev;
  s.pose_cur = pair.cur;
  s.gt_delta = encode_delta(pair.delta, cfg.max_delta_m);

  const auto albedo = default_albedo(mesh);
  s.predicted = render(mesh, pair.prev, cfg.cam, albedo);
  const RgbdFrame object = render(mesh, pair.cur, cfg.cam, albedo);
  const RgbdFrame background = procedural_background(cfg.cam, pair.cur.trans.z() + 0.15, rng);

  // Hand-proxy occluder between the camera and the object.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double zc = pair.cur.trans.z();
  const double zo = zc - (0.12 + 0.13 * u01(rng));
  Pose occ_pose;
  occ_pose.trans = Vec3(pair.cur.trans.x() * zo / zc + (u01(rng) - 0.5) * 0.1,
                        pair.cur.trans.y() * zo / zc + (u01(rng) - 0.5) * 0.1, zo);
  occ_pose.rot = rot_from_euler(EulerXYZ{360.0 * u01(rng) - 180.0, 180.0 * u01(rng) - 90.0, 360.0 * u01(rng) - 180.0});
  const TriMesh occ_mesh = make_ellipsoid(cfg.occluder_radii, 2);
  std::vector<std::array<std::uint8_t, 3>> skin(occ_mesh.faces.size(), {205, 160, 130});
  RgbdFrame occluder;
  try {
    occluder = render(occ_mesh, occ_pose, cfg.cam, skin);
  } catch (const OutOfFrustum&) {
    occluder = RgbdFrame(cfg.cam.width, cfg.cam.height);
  }

  CompositeResult comp = composite(object, background, &occluder, cfg.aug, rng);
  s.occluded = comp.occluded;
  s.fully_occluded = comp.fully_occluded;
  const RgbdFrame noisy = kinect_noise(comp.frame, pair.cur, cfg.noise, rng);
  s.observed = augment_photometric(noisy, cfg.aug, rng);
  return s;
}

void for_each_sample(std::size_t n, const TriMesh& mesh, const GenConfig& cfg, std::uint64_t master_seed,
                     unsigned workers, const std::function<void(Sample&&)>& fn) {
  validate_mesh(mesh);
  validate(cfg);
  workers = std::max(1u, workers);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(generate_sample(mesh, cfg, master_seed, i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<Sample> generate_dataset(std::size_t n, const TriMesh& mesh, const GenConfig& cfg,
                                     std::uint64_t master_seed, unsigned workers) {
  if (n < 1) throw ConfigError("dataset size must be >= 1");
  std::vector<Sample> out(n);
  for_each_sample(n, mesh, cfg, master_seed, workers, [&](Sample&& s) { out[s.index] = std::move(s); });
  return out;
}

nlohmann::json config_to_json(const GenConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    if (f.kind == Field::Kind::kInt) {
      j[f.name] = static_cast<long long>(f.get(cfg));
    } else {
      j[f.name] = f.get(cfg);
    }
  }
  return j;
}

GenConfig apply_config_overrides(GenConfig cfg, const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a flat JSON object");
  for (const auto& [key, value] : overrides.items()) {
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.name; });
    if (it == fs.end()) throw ConfigError("unknown config field '" + key + "'");
    if (!value.is_number()) throw ConfigError("config field '" + key + "' must be a number");
    const double v = value.get<double>();
    if (it->kind == Field::Kind::kInt && (v != std::floor(v) || v < 0)) {
      throw ConfigError("config field '" + key + "' must be a non-negative integer");
    }
    it->set(cfg, v);
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

GenConfig load_config_file(const std::string& path, GenConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return apply_config_overrides(std::move(base), j);
}

nlohmann::json pose_to_json(const Pose& p) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(p.rot(r, c));
  }
  return {{"rot", rot}, {"trans", {p.trans.x(), p.trans.y(), p.trans.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  const auto& rot = j.at("rot");
  const auto& tr = j.at("trans");
  if (rot.size() != 9 || tr.size() != 3) throw ParseError("pose needs 9 rotation and 3 translation values");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rot(r, c) = rot[static_cast<std::size_t>(3 * r + c)].get<double>();
  }
  for (int i = 0; i < 3; ++i) p.trans[i] = tr[static_cast<std::size_t>(i)].get<double>();
  return p;
}

void write_sample(const std::string& dir, const Sample& s, double max_delta_m) {
  const fs::path d(dir);
  const std::size_t i = s.index;
  write_ppm((d / name("rgb", i, ".ppm")).string(), s.observed.w, s.observed.h, s.observed.rgb);
  write_pgm16((d / name("depth", i, ".pgm")).string(), s.observed.w, s.observed.h, s.observed.depth);
  write_mask_pgm((d / name("fg", i, ".pgm")).string(), s.observed.fg_mask);
  write_mask_pgm((d / name("unoccl", i, ".pgm")).string(), s.observed.unoccl_mask);
  write_ppm((d / name("pred_rgb", i, ".ppm")).string(), s.predicted.w, s.predicted.h, s.predicted.rgb);
  write_pgm16((d / name("pred_depth", i, ".pgm")).string(), s.predicted.w, s.predicted.h, s.predicted.depth);
  write_mask_pgm((d / name("pred_fg", i, ".pgm")).string(), s.predicted.fg_mask);

  const auto g = s.gt_delta.to_array();
  nlohmann::json meta = {{"index", s.index},
                         {"seed", s.seed},
                         {"pose_prev", pose_to_json(s.pose_prev)},
                         {"pose_cur", pose_to_json(s.pose_cur)},
                         {"gt_delta", std::vector<double>(g.begin(), g.end())},
                         {"max_delta_m", max_delta_m},
                         {"occluded", s.occluded},
                         {"fully_occluded", s.fully_occluded}};
  std::ofstream out(d / name("meta", i, ".json"));
  if (!out) throw IoError("cannot write metadata for sample " + std::to_string(i));
  out << meta.dump(2) << '\n';
}

Sample read_sample(const std::string& dir, std::size_t i) {
  const fs::path d(dir);
  Sample s;
  s.index = i;
  std::ifstream in(d / name("meta", i, ".json"));
  if (!in) throw IoError("missing metadata for sample " + std::to_string(i) + " in " + dir);
  nlohmann::json meta;
  try {
    in >> meta;
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.pose_prev = pose_from_json(meta.at("pose_prev"));
    s.pose_cur = pose_from_json(meta.at("pose_cur"));
    const auto g = meta.at("gt_delta").get<std::vector<double>>();
    s.gt_delta = PoseDelta9::from_array(g);
    s.occluded = meta.at("occluded").get<bool>();
    s.fully_occluded = meta.at("fully_occluded").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad metadata for sample " + std::to_string(i) + ": " + e.what());
  }

  int w = 0, h = 0;
  s.observed.rgb = read_ppm((d / name("rgb", i, ".ppm")).string(), w, h);
  s.observed.w = w;
  s.observed.h = h;
  s.observed.depth = read_pgm16((d / name("depth", i, ".pgm")).string(), w, h);
  s.observed.fg_mask = read_mask_pgm((d / name("fg", i, ".pgm")).string());
  s.observed.unoccl_mask = read_mask_pgm((d / name("unoccl", i, ".pgm")).string());
  s.predicted.rgb = read_ppm((d / name("pred_rgb", i, ".ppm")).string(), w, h);
  s.predicted.w = w;
  s.predicted.h = h;
  s.predicted.depth = read_pgm16((d / name("pred_depth", i, ".pgm")).string(), w, h);
  s.predicted.fg_mask = read_mask_pgm((d / name("pred_fg", i, ".pgm")).string());
  s.predicted.unoccl_mask = s.predicted.fg_mask;
  return s;
}

std::string write_manifest(const std::string& dir, const DatasetManifest& m) {
  const fs::path p = fs::path(dir) / "manifest.json";
  nlohmann::json j = {{"format", "symtrack-dataset"},
                      {"version", 1},
                      {"sample_count", m.sample_count},
                      {"master_seed", m.master_seed},
                      {"config", config_to_json(m.config)}};
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
  return p.string();
}

DatasetManifest read_manifest(const std::string& dir) {
  const fs::path p = fs::path(dir) / "manifest.json";
  std::ifstream in(p);
  if (!in) throw IoError("dataset manifest not found: " + p.string());
  DatasetManifest m;
  try {
    nlohmann::json j;
    in >> j;
    m.sample_count = j.at("sample_count").get<std::size_t>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.config = apply_config_overrides(GenConfig{}, j.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad manifest " + p.string() + ": " + e.what());
  }
  return m;
}

std::string write_dataset(const std::string& dir, std::size_t n, const TriMesh& mesh, const GenConfig& cfg,
                          std::uint64_t master_seed, unsigned workers) {
  if (n < 1) throw ConfigError("dataset size must be >= 1");
  fs::create_directories(dir);
  for_each_sample(n, mesh, cfg, master_seed, workers,
                  [&](Sample&& s) { write_sample(dir, s, cfg.max_delta_m); });
  return write_manifest(dir, DatasetManifest{n, master_seed, cfg});
}

}  // namespace symtrack
