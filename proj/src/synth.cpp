#include "symtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace symtrack {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double gauss(Rng& rng, double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

std::uint16_t to_mm(double meters) {
  return static_cast<std::uint16_t>(std::clamp(std::llround(meters * 1000.0), 1LL, 65535LL));
}

constexpr double kLateralThetaCap = kPi / 2.0 - 0.1;

double theta_term(double theta) {
  const double t = std::min(std::abs(theta), kLateralThetaCap);
  return t / (kPi / 2.0 - t);
}

}  // namespace

double NoiseParams::sigma_axial(double z, double theta_y) const {
  const double r = theta_term(theta_y);
  const double s = a0 + a1 * (z - a2) * (z - a2) + (z > 0.0 ? a3 / std::sqrt(z) * r * r : 0.0);
  return std::max(0.0, s);
}

double NoiseParams::sigma_lateral_x(double theta_y) const {
  return std::max(0.0, lateral_x_b0 + lateral_x_b1 * theta_term(theta_y));
}

double NoiseParams::sigma_lateral_y(double theta_y) const {
  return std::max(0.0, lateral_y_b0 + lateral_y_b1 * theta_term(theta_y));
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_occluder = 0.0;
  c.p_full_occlusion = 0.0;
  c.p_contrast = 0.0;
  c.p_gamma = 0.0;
  c.rgb_noise_sigma = 0.0;
  c.hsv_noise_sigma = {0.0, 0.0, 0.0};
  c.blur_kernel = 1;
  c.depth_downsample_factor = 1;
  c.p_modality_dropout = 0.0;
  return c;
}

void AugmentConfig::validate() const {
  auto prob = [](const char* name, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be a probability in [0, 1]");
  };
  auto range = [](const char* name, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError(std::string(name) + " range is not ordered (min > max)");
  };
  prob("p_occluder", p_occluder);
  prob("p_full_occlusion", p_full_occlusion);
  prob("p_contrast", p_contrast);
  prob("p_gamma", p_gamma);
  prob("p_modality_dropout", p_modality_dropout);
  range("alpha", alpha_min, alpha_max);
  range("beta", beta_min, beta_max);
  range("gamma", gamma_min, gamma_max);
  if (gamma_min < 0.0) throw ConfigError("gamma_min must be >= 0");
  if (!(rgb_noise_sigma >= 0.0)) throw ConfigError("rgb_noise_sigma must be >= 0");
  for (double s : hsv_noise_sigma) {
    if (!(s >= 0.0)) throw ConfigError("hsv_noise_sigma must be >= 0");
  }
  if (blur_kernel < 1 || blur_kernel % 2 == 0) throw ConfigError("blur_kernel must be a positive odd integer");
  if (depth_downsample_factor < 1) throw ConfigError("depth_downsample_factor must be >= 1");
}

std::vector<std::array<std::uint8_t, 3>> default_albedo(const TriMesh& mesh, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> d(60, 230);
  std::vector<std::array<std::uint8_t, 3>> out(mesh.faces.size());
  for (auto& c : out) {
    c = {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng))};
  }
  return out;
}

RgbdFrame render(const TriMesh& mesh, const Pose& pose, const Camera& cam,
                 const std::vector<std::array<std::uint8_t, 3>>& albedo) {
  RgbdFrame out(cam.width, cam.height);
  std::vector<double> zbuf(static_cast<std::size_t>(cam.width * cam.height), std::numeric_limits<double>::infinity());
  const Vec3 light = Vec3(0.3, -0.4, -1.0).normalized();
  std::size_t covered = 0;

  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    std::array<Vec3, 3> p;
    std::array<double, 3> u{}, v{};
    bool clipped = false;
    for (std::size_t k = 0; k < 3; ++k) {
      p[k] = pose.rot * mesh.vertices[static_cast<std::size_t>(mesh.faces[f][k])] + pose.trans;
      if (p[k].z() <= cam.near || p[k].z() >= cam.far) clipped = true;
      u[k] = cam.fx * p[k].x() / p[k].z() + cam.cx;
      v[k] = cam.fy * p[k].y() / p[k].z() + cam.cy;
    }
    if (clipped) continue;

    const double area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0]);
    if (std::abs(area) < 1e-12) continue;

    const Vec3 n = (p[1] - p[0]).cross(p[2] - p[0]).normalized();
    const double shade = 0.25 + 0.75 * std::abs(n.dot(light));
    const auto& col = f < albedo.size() ? albedo[f] : std::array<std::uint8_t, 3>{200, 200, 200};

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({u[0], u[1], u[2]}))));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({u[0], u[1], u[2]}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({v[0], v[1], v[2]}))));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({v[0], v[1], v[2]}))));

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        // Barycentric weights from signed sub-triangle areas.
        const double w0 = ((u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)) / area;
        const double w1 = ((u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        // Perspective-correct depth.
        const double inv_z = w0 / p[0].z() + w1 / p[1].z() + w2 / p[2].z();
        const double z = 1.0 / inv_z;
        const std::size_t i = out.index(x, y);
        if (z >= zbuf[i]) continue;
        if (!std::isfinite(zbuf[i])) ++covered;
        zbuf[i] = z;
        out.depth[i] = to_mm(z);
        for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = to_u8(col[c] * shade);
        out.fg_mask.values[i] = 1;
      }
    }
  }
  if (covered == 0) throw OutOfFrustum("render: mesh covers no pixel");
  out.unoccl_mask = out.fg_mask;
  return out;
}

Pose viewpoint_pose(std::size_t index, std::size_t n_viewpoints, double distance_m) {
  const auto dirs = golden_spiral(n_viewpoints);
  const Vec3 d = dirs.at(index);
  // Camera axes expressed in the object frame; the optical axis points at the
  // object center, image y points "down".
  const Vec3 zc = -d;
  const Vec3 up = std::abs(d.z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
  const Vec3 xc = (-up).cross(zc).normalized();
  const Vec3 yc = zc.cross(xc);
  Pose p;
  p.rot.row(0) = xc.transpose();
  p.rot.row(1) = yc.transpose();
  p.rot.row(2) = zc.transpose();
  p.trans = Vec3(0.0, 0.0, distance_m);
  return p;
}

Pose sample_delta(Rng& rng, const DeltaRanges& ranges) {
  Pose d;
  for (int i = 0; i < 3; ++i) d.trans[i] = uniform(rng, -ranges.trans_m, ranges.trans_m);
  EulerXYZ e;
  e.x = uniform(rng, -ranges.rot_deg, ranges.rot_deg);
  e.y = uniform(rng, -ranges.rot_deg, ranges.rot_deg);
  e.z = uniform(rng, -ranges.rot_deg, ranges.rot_deg);
  d.rot = rot_from_euler(e);
  return d;
}

PosePair sample_pose_pair(Rng& rng, std::size_t viewpoint_index, std::size_t n_viewpoints, const DeltaRanges& ranges,
                          double distance_m) {
  if (viewpoint_index >= n_viewpoints) throw IndexOutOfRange("viewpoint index out of range");
  PosePair pair;
  pair.prev = viewpoint_pose(viewpoint_index, n_viewpoints, distance_m);
  pair.delta = sample_delta(rng, ranges);
  pair.cur = compose(pair.prev, pair.delta);
  return pair;
}

namespace {

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0; }
  double cx() const { return 0.5 * (x0 + x1 + 1); }
  double cy() const { return 0.5 * (y0 + y1 + 1); }
  double w() const { return x1 - x0 + 1; }
  double h() const { return y1 - y0 + 1; }
};

Box bounding_box(const BinaryMask& m) {
  Box b{m.w, m.h, -1, -1};
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return b;
}

}  // namespace

CompositeResult composite(const RgbdFrame& object, const RgbdFrame& background, const RgbdFrame* occluder,
                          const AugmentConfig& cfg, Rng& rng) {
  auto same = [&](const RgbdFrame& f) { return f.w == object.w && f.h == object.h; };
  if (!same(background) || (occluder && !same(*occluder))) {
    throw DimensionMismatch("composite: frame dimensions differ");
  }
  // Both draws happen unconditionally so the stream position is independent
  // of the branch taken.
  const double u_occ = uniform(rng, 0.0, 1.0);
  const double u_full = uniform(rng, 0.0, 1.0);

  CompositeResult res;
  res.frame = object;
  RgbdFrame& out = res.frame;
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    if (object.fg_mask.values[i]) continue;
    out.depth[i] = background.depth[i];
    for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = background.rgb[3 * i + c];
  }

  res.occluded = occluder != nullptr && u_occ < cfg.p_occluder;
  res.fully_occluded = res.occluded && u_full < cfg.p_full_occlusion;
  BinaryMask cover(out.w, out.h);

  if (res.occluded && !res.fully_occluded) {
    const RgbdFrame& occ = *occluder;
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
      if (!occ.fg_mask.values[i]) continue;
      if (out.depth[i] != 0 && occ.depth[i] >= out.depth[i]) continue;
      cover.values[i] = 1;
      out.depth[i] = occ.depth[i];
      for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = occ.rgb[3 * i + c];
    }
  } else if (res.fully_occluded) {
    // Stretch the occluder's footprint over the object's bounding box and put
    // it in front of the nearest object point.
    const Box fb = bounding_box(object.fg_mask);
    const Box ob = bounding_box(occluder->fg_mask);
    std::uint16_t obj_min = std::numeric_limits<std::uint16_t>::max();
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
      if (object.fg_mask.values[i] && object.depth[i] > 0) obj_min = std::min(obj_min, object.depth[i]);
    }
    const int front = std::max(1, static_cast<int>(obj_min) - 20);

    std::array<double, 3> mean_rgb{128.0, 128.0, 128.0};
    if (!ob.empty()) {
      std::array<double, 3> acc{0, 0, 0};
      std::size_t n = 0;
      for (std::size_t i = 0; i < out.depth.size(); ++i) {
        if (!occluder->fg_mask.values[i]) continue;
        for (std::size_t c = 0; c < 3; ++c) acc[c] += occluder->rgb[3 * i + c];
        ++n;
      }
      for (std::size_t c = 0; c < 3; ++c) mean_rgb[c] = acc[c] / static_cast<double>(n);
    }

    if (!fb.empty()) {
      const double grow = 1.5;
      const double half_w = 0.5 * fb.w() * grow, half_h = 0.5 * fb.h() * grow;
      for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
          const std::size_t i = out.index(x, y);
          const double dx = (x + 0.5 - fb.cx()) / half_w, dy = (y + 0.5 - fb.cy()) / half_h;
          bool hit = false;
          std::array<std::uint8_t, 3> col{};
          if (!ob.empty() && std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0) {
            const int sx = std::clamp(static_cast<int>(std::floor(ob.cx() + dx * 0.5 * ob.w())), 0, out.w - 1);
            const int sy = std::clamp(static_cast<int>(std::floor(ob.cy() + dy * 0.5 * ob.h())), 0, out.h - 1);
            const std::size_t s = out.index(sx, sy);
            if (occluder->fg_mask.values[s]) {
              hit = true;
              for (std::size_t c = 0; c < 3; ++c) col[c] = occluder->rgb[3 * s + c];
            }
          }
          if (!hit && object.fg_mask.values[i]) {
            // Complete the coverage of the object with the occluder's mean color.
            hit = true;
            for (std::size_t c = 0; c < 3; ++c) col[c] = to_u8(mean_rgb[c]);
          }
          if (!hit) continue;
          cover.values[i] = 1;
          out.depth[i] = static_cast<std::uint16_t>(front);
          for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = col[c];
        }
      }
    }
  }

  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    out.unoccl_mask.values[i] = object.fg_mask.values[i] && !cover.values[i] ? 1 : 0;
  }
  out.fg_mask = object.fg_mask;
  return res;
}

RgbdFrame kinect_noise(const RgbdFrame& frame, const Pose& pose, const NoiseParams& np, Rng& rng) {
  RgbdFrame out = frame;
  const double theta = euler_from_rot(pose.rot).y * kRadPerDeg;
  const double slx = np.sigma_lateral_x(theta);
  const double sly = np.sigma_lateral_y(theta);

  auto sample = [&](double fx, double fy, std::uint16_t fallback) -> double {
    const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    double acc = 0.0, wsum = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        const int x = x0 + dx, y = y0 + dy;
        if (x < 0 || y < 0 || x >= frame.w || y >= frame.h) continue;
        const std::uint16_t d = frame.depth[frame.index(x, y)];
        if (d == 0) continue;
        const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
        acc += w * d;
        wsum += w;
      }
    }
    return wsum > 1e-12 ? acc / wsum : static_cast<double>(fallback);
  };

  for (int y = 0; y < frame.h; ++y) {
    for (int x = 0; x < frame.w; ++x) {
      const std::size_t i = frame.index(x, y);
      const std::uint16_t d0 = frame.depth[i];
      if (d0 == 0) continue;
      double mm = d0;
      if (slx > 0.0 || sly > 0.0) {
        const double jx = slx > 0.0 ? gauss(rng, slx) : 0.0;
        const double jy = sly > 0.0 ? gauss(rng, sly) : 0.0;
        mm = sample(x + jx, y + jy, d0);
      }
      const double sa = np.sigma_axial(mm / 1000.0, theta);
      if (sa > 0.0) mm += 1000.0 * gauss(rng, sa);
      if (mm == static_cast<double>(d0)) continue;
      out.depth[i] = to_mm(mm / 1000.0);
    }
  }
  return out;
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d + 6.0, 6.0) / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

}  // namespace

RgbdFrame augment_photometric(const RgbdFrame& frame, const AugmentConfig& cfg, Rng& rng) {
  RgbdFrame out = frame;
  const std::size_t n = static_cast<std::size_t>(out.w * out.h);

  if (cfg.rgb_noise_sigma > 0.0) {
    const double s = cfg.rgb_noise_sigma * 255.0;
    for (auto& v : out.rgb) v = to_u8(v + gauss(rng, s));
  }

  if (cfg.hsv_noise_sigma[0] > 0.0 || cfg.hsv_noise_sigma[1] > 0.0 || cfg.hsv_noise_sigma[2] > 0.0) {
    const double dh = cfg.hsv_noise_sigma[0] > 0.0 ? gauss(rng, cfg.hsv_noise_sigma[0]) : 0.0;
    const double ds = cfg.hsv_noise_sigma[1] > 0.0 ? gauss(rng, cfg.hsv_noise_sigma[1]) : 0.0;
    const double dv = cfg.hsv_noise_sigma[2] > 0.0 ? gauss(rng, cfg.hsv_noise_sigma[2]) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double h, s, v, r, g, b;
      rgb_to_hsv(out.rgb[3 * i] / 255.0, out.rgb[3 * i + 1] / 255.0, out.rgb[3 * i + 2] / 255.0, h, s, v);
      h = std::fmod(h + dh + 1.0, 1.0);
      s = std::clamp(s + ds, 0.0, 1.0);
      v = std::clamp(v + dv, 0.0, 1.0);
      hsv_to_rgb(h, s, v, r, g, b);
      out.rgb[3 * i] = to_u8(r * 255.0);
      out.rgb[3 * i + 1] = to_u8(g * 255.0);
      out.rgb[3 * i + 2] = to_u8(b * 255.0);
    }
  }

  if (cfg.blur_kernel > 1) {
    const int r = cfg.blur_kernel / 2;
    const std::vector<std::uint8_t> src = out.rgb;
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        std::array<int, 3> acc{0, 0, 0};
        int cnt = 0;
        for (int yy = std::max(0, y - r); yy <= std::min(out.h - 1, y + r); ++yy) {
          for (int xx = std::max(0, x - r); xx <= std::min(out.w - 1, x + r); ++xx) {
            const std::size_t j = out.index(xx, yy);
            for (std::size_t c = 0; c < 3; ++c) acc[c] += src[3 * j + c];
            ++cnt;
          }
        }
        const std::size_t i = out.index(x, y);
        for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = to_u8(static_cast<double>(acc[c]) / cnt);
      }
    }
  }

  if (uniform(rng, 0.0, 1.0) < cfg.p_contrast) {
    const double alpha = uniform(rng, cfg.alpha_min, cfg.alpha_max);
    const double beta = uniform(rng, cfg.beta_min, cfg.beta_max);
    for (auto& v : out.rgb) v = to_u8(alpha * v + beta);
  }

  if (uniform(rng, 0.0, 1.0) < cfg.p_gamma) {
    const double gamma = uniform(rng, cfg.gamma_min, cfg.gamma_max);
    for (auto& v : out.rgb) v = to_u8(255.0 * std::pow(v / 255.0, gamma));
  }

  if (cfg.depth_downsample_factor > 1) {
    const int f = cfg.depth_downsample_factor;
    const std::vector<std::uint16_t> src = out.depth;
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        const std::size_t i = out.index(x, y);
        if (src[i] == 0) continue;  // invalid pixels stay invalid
        out.depth[i] = src[out.index((x / f) * f, (y / f) * f)];
      }
    }
  }

  if (uniform(rng, 0.0, 1.0) < cfg.p_modality_dropout) {
    if (uniform(rng, 0.0, 1.0) < 0.5) {
      std::fill(out.rgb.begin(), out.rgb.end(), 0);
    } else {
      std::fill(out.depth.begin(), out.depth.end(), 0);
    }
  }
  return out;
}

RgbdFrame procedural_background(const Camera& cam, double min_depth_m, Rng& rng) {
  RgbdFrame bg(cam.width, cam.height);
  // Value noise: three octaves of bilinearly interpolated random lattices.
  const std::array<int, 3> cells{4, 9, 19};
  const std::array<double, 3> amp{0.55, 0.3, 0.15};
  std::array<double, 3> base{};
  for (auto& b : base) b = uniform(rng, 40.0, 200.0);
  std::vector<double> lum(static_cast<std::size_t>(cam.width * cam.height), 0.0);
  for (std::size_t o = 0; o < cells.size(); ++o) {
    const int c = cells[o];
    std::vector<double> lattice(static_cast<std::size_t>((c + 1) * (c + 1)));
    for (auto& v : lattice) v = uniform(rng, -1.0, 1.0);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const double gx = static_cast<double>(x) / cam.width * c, gy = static_cast<double>(y) / cam.height * c;
        const int ix = std::min(static_cast<int>(gx), c - 1), iy = std::min(static_cast<int>(gy), c - 1);
        double fx = gx - ix, fy = gy - iy;
        fx = fx * fx * (3 - 2 * fx);
        fy = fy * fy * (3 - 2 * fy);
        auto at = [&](int a, int b) { return lattice[static_cast<std::size_t>(b * (c + 1) + a)]; };
        const double v = (1 - fy) * ((1 - fx) * at(ix, iy) + fx * at(ix + 1, iy)) +
                         fy * ((1 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1));
        lum[bg.index(x, y)] += amp[o] * v;
      }
    }
  }
  const double d0 = min_depth_m + uniform(rng, 0.2, 1.0);
  const double gx = uniform(rng, -0.002, 0.002), gy = uniform(rng, -0.002, 0.002);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = bg.index(x, y);
      for (std::size_t c = 0; c < 3; ++c) bg.rgb[3 * i + c] = to_u8(base[c] + 70.0 * lum[i]);
      const double z = std::max(min_depth_m + 0.05, d0 + gx * (x - cam.cx) + gy * (y - cam.cy));
      bg.depth[i] = to_mm(z);
    }
  }
  return bg;
}

}  // namespace symtrack
