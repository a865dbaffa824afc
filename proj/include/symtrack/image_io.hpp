#pragma once

// Binary netpbm I/O: P6 for RGB, P5 for 8-bit masks and 16-bit big-endian
// depth in millimeters.

#include <cstdint>
#include <string>
#include <vector>

#include "symtrack/mask.hpp"

namespace symtrack {

void write_ppm(const std::string& path, int w, int h, const std::vector<std::uint8_t>& rgb);
std::vector<std::uint8_t> read_ppm(const std::string& path, int& w, int& h);

void write_pgm16(const std::string& path, int w, int h, const std::vector<std::uint16_t>& depth);
std::vector<std::uint16_t> read_pgm16(const std::string& path, int& w, int& h);

/// Mask stored as 0/255.
void write_mask_pgm(const std::string& path, const BinaryMask& mask);
BinaryMask read_mask_pgm(const std::string& path);

}  // namespace symtrack
