#include <algorithm>
#include <cmath>
#include <random>

#include "symtrack/errors.hpp"
#include "symtrack/track.hpp"

namespace symtrack {

namespace {

// Smooth periodic motion: amplitudes and periods per axis, phase from the seed.
struct Wave {
  Vec3 amp = Vec3::Zero();
  Vec3 period = Vec3::Constant(100.0);
  Vec3 phase = Vec3::Zero();

  Vec3 at(double k) const {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = amp[i] * std::sin(2.0 * kPi * k / period[i] + phase[i]);
    return v;
  }
};

Wave random_wave(Rng& rng, const Vec3& amp, double period_lo, double period_hi) {
  std::uniform_real_distribution<double> per(period_lo, period_hi), ph(-kPi, kPi);
  Wave w;
  w.amp = amp;
  for (int i = 0; i < 3; ++i) {
    w.period[i] = per(rng);
    w.phase[i] = ph(rng);
  }
  return w;
}

struct Script {
  Vec3 base_euler = Vec3::Zero();  // degrees
  Wave rot;                        // degrees
  Wave trans;                      // meters
  double distance_m = 0.6;
  bool freeze_x = false;
  double occl_base = 0.0;
  double occl_ramp = 0.0;  // added linearly over the trajectory
  double occl_wave = 0.0;
};

// Covers the leftmost `fraction` of the object's bounding box with a flat
// occluder 10 cm in front of it.
void occlude(RgbdFrame& f, double fraction) {
  if (fraction <= 0.0) return;
  int x0 = f.w, x1 = -1, y0 = f.h, y1 = -1;
  std::uint16_t dmin = 0xFFFF;
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      const std::size_t i = f.index(x, y);
      if (!f.fg_mask.values[i]) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      if (f.depth[i] > 0) dmin = std::min(dmin, f.depth[i]);
    }
  }
  if (x1 < 0) return;
  const int cover_to = x0 + static_cast<int>(std::lround(fraction * (x1 - x0 + 1))) - 1;
  const std::uint16_t occ_depth = static_cast<std::uint16_t>(std::max(100, static_cast<int>(dmin) - 100));
  for (int y = std::max(0, y0 - 3); y <= std::min(f.h - 1, y1 + 3); ++y) {
    for (int x = std::max(0, x0 - 3); x <= cover_to; ++x) {
      const std::size_t i = f.index(x, y);
      f.rgb[3 * i + 0] = 90;
      f.rgb[3 * i + 1] = 90;
      f.rgb[3 * i + 2] = 100;
      f.depth[i] = occ_depth;
      f.unoccl_mask.values[i] = 0;
    }
  }
}

Trajectory run_script(const std::string& name, const Script& sc, std::uint64_t seed, const ScenarioOptions& opts) {
  Trajectory tr;
  tr.scenario_name = name;
  tr.frames.resize(opts.frames);
  Rng rng(seed ^ 0xA5A5A5A5ULL);
  std::vector<std::array<std::uint8_t, 3>> albedo;
  if (opts.render) albedo = default_albedo(opts.mesh);

  for (std::size_t k = 0; k < opts.frames; ++k) {
    const double t = static_cast<double>(k);
    Vec3 e = sc.base_euler + sc.rot.at(t);
    if (sc.freeze_x) e[0] = sc.base_euler[0];
    TrajectoryFrame& fr = tr.frames[k];
    fr.gt.rot = rot_from_euler({e[0], e[1], e[2]});
    fr.gt.trans = Vec3(0.0, 0.0, sc.distance_m) + sc.trans.at(t);
    const double frac = opts.frames > 1 ? t / static_cast<double>(opts.frames - 1) : 0.0;
    fr.occlusion = std::clamp(sc.occl_base + sc.occl_ramp * frac + sc.occl_wave * std::sin(2.0 * kPi * t / 50.0),
                              0.0, 0.95);
    if (!opts.render) continue;

    RgbdFrame obj = render(opts.mesh, fr.gt, opts.cam, albedo);
    RgbdFrame frame = procedural_background(opts.cam, sc.distance_m + 0.3, rng);
    for (std::size_t i = 0; i < obj.depth.size(); ++i) {
      if (!obj.fg_mask.values[i]) continue;
      for (std::size_t c = 0; c < 3; ++c) frame.rgb[3 * i + c] = obj.rgb[3 * i + c];
      frame.depth[i] = obj.depth[i];
      frame.fg_mask.values[i] = 1;
      frame.unoccl_mask.values[i] = 1;
    }
    occlude(frame, fr.occlusion);
    fr.observed = kinect_noise(frame, fr.gt, opts.noise, rng);
  }
  return tr;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"translation_only", "rotation_only", "occlusion_ramp", "hard_interaction", "flip_injection"};
}

Trajectory make_scenario(const std::string& name, std::uint64_t seed, const ScenarioOptions& opts) {
  if (opts.frames == 0) throw ConfigError("scenario needs at least one frame");
  Rng rng(seed);
  std::uniform_real_distribution<double> base(-30.0, 30.0);
  Script sc;
  sc.base_euler = Vec3(base(rng), base(rng), base(rng));

  if (name == "translation_only") {
    sc.trans = random_wave(rng, Vec3(0.04, 0.03, 0.05), 80.0, 120.0);
  } else if (name == "rotation_only") {
    sc.rot = random_wave(rng, Vec3(30.0, 25.0, 60.0), 90.0, 130.0);
  } else if (name == "occlusion_ramp") {
    sc.trans = random_wave(rng, Vec3(0.02, 0.02, 0.02), 80.0, 120.0);
    sc.rot = random_wave(rng, Vec3(15.0, 15.0, 15.0), 80.0, 120.0);
    sc.occl_ramp = 0.75;
  } else if (name == "hard_interaction") {
    sc.trans = random_wave(rng, Vec3(0.08, 0.06, 0.08), 35.0, 45.0);
    sc.rot = random_wave(rng, Vec3(45.0, 40.0, 45.0), 35.0, 45.0);
    sc.occl_base = 0.3;
    sc.occl_wave = 0.2;
  } else if (name == "flip_injection") {
    // Constant x keeps the injected x-flip separable by the per-axis filter
    // and y stays far from gimbal lock.
    sc.base_euler[1] = 0.0;
    sc.rot = random_wave(rng, Vec3(0.0, 40.0, 90.0), 90.0, 130.0);
    sc.freeze_x = true;
    sc.trans = random_wave(rng, Vec3(0.02, 0.02, 0.02), 80.0, 120.0);
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }

  Trajectory tr = run_script(name, sc, seed, opts);
  if (name == "flip_injection") {
    // One flip per 50-frame block, never on a reset frame.
    std::uniform_int_distribution<std::size_t> off(5, 44);
    for (std::size_t b = 0; b * 50 < opts.frames; ++b) {
      std::size_t f = b * 50 + off(rng);
      if (f % 15 == 0) ++f;
      if (f < opts.frames) tr.flip_frames.push_back(f);
    }
  }
  return tr;
}

}  // namespace symtrack
