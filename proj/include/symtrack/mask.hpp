#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace symtrack {

/// Row-major binary image, values in {0, 1}.
struct BinaryMask {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int width, int height) : w(width), h(height), values(static_cast<std::size_t>(width * height), 0) {}

  std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y * w + x)]; }
  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y * w + x)]; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : values) n += v ? 1 : 0;
    return n;
  }
  bool operator==(const BinaryMask&) const = default;
};

/// True when every set pixel of `a` is also set in `b`.
inline bool mask_subset(const BinaryMask& a, const BinaryMask& b) {
  if (a.w != b.w || a.h != b.h) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] && !b.values[i]) return false;
  }
  return true;
}

}  // namespace symtrack
