#include "symtrack/features.hpp"

#include <algorithm>
#include <cmath>

namespace symtrack {

namespace {

struct Moments {
  double area = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double mu20 = 0.0;
  double mu11 = 0.0;
  double mu02 = 0.0;
};

Moments mask_moments(const BinaryMask& m) {
  Moments r;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(x, y)) continue;
      r.area += 1.0;
      r.cx += x;
      r.cy += y;
    }
  }
  if (r.area == 0.0) return r;
  r.cx /= r.area;
  r.cy /= r.area;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(x, y)) continue;
      const double dx = x - r.cx, dy = y - r.cy;
      r.mu20 += dx * dx;
      r.mu11 += dx * dy;
      r.mu02 += dy * dy;
    }
  }
  return r;
}

}  // namespace

FeatureVec frame_features(const RgbdFrame& obs, const RgbdFrame& pred) {
  FeatureVec f = FeatureVec::Zero();
  const double w = obs.w;

  double dsum = 0.0;
  std::array<double, 3> csum{0, 0, 0};
  std::size_t dn = 0, cn = 0;
  for (std::size_t i = 0; i < obs.depth.size(); ++i) {
    if (!obs.fg_mask.values[i] || !pred.fg_mask.values[i]) continue;
    if (obs.depth[i] > 0 && pred.depth[i] > 0) {
      dsum += (static_cast<double>(obs.depth[i]) - pred.depth[i]) / 1000.0;
      ++dn;
    }
    for (std::size_t c = 0; c < 3; ++c) csum[c] += (static_cast<double>(obs.rgb[3 * i + c]) - pred.rgb[3 * i + c]) / 255.0;
    ++cn;
  }
  if (dn > 0) f[0] = dsum / static_cast<double>(dn);

  const Moments mo = mask_moments(obs.fg_mask);
  const Moments mp = mask_moments(pred.fg_mask);
  if (mo.area > 0 && mp.area > 0) {
    f[1] = (mo.cx - mp.cx) / w;
    f[2] = (mo.cy - mp.cy) / w;
    f[7] = std::log(mo.area / mp.area);
  }
  if (mo.area > 0) {
    f[3] = mo.area / (w * obs.h);
    f[4] = mo.mu20 / (mo.area * w * w);
    f[5] = mo.mu11 / (mo.area * w * w);
    f[6] = mo.mu02 / (mo.area * w * w);
  }
  if (cn > 0) {
    for (int c = 0; c < 3; ++c) f[8 + c] = csum[static_cast<std::size_t>(c)] / static_cast<double>(cn);
  }
  return f;
}

AttentionInput attention_input(const RgbdFrame& obs, const RgbdFrame& pred) {
  const int g = kAttentionGrid;
  AttentionInput a;
  a.cue_depth_band.assign(static_cast<std::size_t>(g * g), 0.0);
  a.cue_surface.assign(static_cast<std::size_t>(g * g), 0.0);
  a.fg = BinaryMask(g, g);
  a.unoccl = BinaryMask(g, g);

  // Depth band of the predicted object.
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 0; i < pred.depth.size(); ++i) {
    if (!pred.fg_mask.values[i] || pred.depth[i] == 0) continue;
    lo = std::min(lo, static_cast<double>(pred.depth[i]));
    hi = std::max(hi, static_cast<double>(pred.depth[i]));
  }
  const double margin = 30.0;

  for (int cy = 0; cy < g; ++cy) {
    for (int cx = 0; cx < g; ++cx) {
      const int x0 = cx * obs.w / g, x1 = (cx + 1) * obs.w / g;
      const int y0 = cy * obs.h / g, y1 = (cy + 1) * obs.h / g;
      double n = 0, band = 0, surf = 0, fg = 0, un = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::size_t i = obs.index(x, y);
          n += 1;
          const double d = obs.depth[i];
          if (d > 0 && hi > 0 && d >= lo - margin && d <= hi + margin) band += 1;
          if (d > 0 && pred.depth[i] > 0 && std::abs(d - pred.depth[i]) < 20.0) surf += 1;
          fg += obs.fg_mask.values[i];
          un += obs.unoccl_mask.values[i];
        }
      }
      const std::size_t c = static_cast<std::size_t>(cy * g + cx);
      if (n > 0) {
        a.cue_depth_band[c] = band / n;
        a.cue_surface[c] = surf / n;
        a.fg.values[c] = fg / n >= 0.5 ? 1 : 0;
        a.unoccl.values[c] = un / n >= 0.5 ? 1 : 0;
      }
    }
  }
  return a;
}

}  // namespace symtrack
