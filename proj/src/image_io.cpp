#include "symtrack/image_io.hpp"

#include <fstream>
#include <sstream>

#include "symtrack/errors.hpp"

namespace symtrack {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// Reads "<magic> <w> <h> <maxval>" followed by a single whitespace byte.
std::ifstream open_in(const std::string& path, const std::string& magic, int& w, int& h, int& maxval) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string m;
  in >> m;
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> w;
  skip_comments();
  in >> h;
  skip_comments();
  in >> maxval;
  if (!in || m != magic || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw ParseError(path + ": not a valid " + magic + " file");
  }
  in.get();
  return in;
}

}  // namespace

void write_ppm(const std::string& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  auto out = open_out(path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::uint8_t> read_ppm(const std::string& path, int& w, int& h) {
  int maxval = 0;
  auto in = open_in(path, "P6", w, h, maxval);
  if (maxval != 255) throw ParseError(path + ": only 8-bit PPM is supported");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!in) throw ParseError(path + ": truncated pixel data");
  return rgb;
}

void write_pgm16(const std::string& path, int w, int h, const std::vector<std::uint16_t>& depth) {
  auto out = open_out(path);
  out << "P5\n" << w << ' ' << h << "\n65535\n";
  std::vector<char> buf(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    buf[2 * i] = static_cast<char>(depth[i] >> 8);
    buf[2 * i + 1] = static_cast<char>(depth[i] & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::uint16_t> read_pgm16(const std::string& path, int& w, int& h) {
  int maxval = 0;
  auto in = open_in(path, "P5", w, h, maxval);
  if (maxval < 256) throw ParseError(path + ": expected a 16-bit PGM");
  std::vector<unsigned char> buf(static_cast<std::size_t>(w * h * 2));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw ParseError(path + ": truncated pixel data");
  std::vector<std::uint16_t> depth(static_cast<std::size_t>(w * h));
  for (std::size_t i = 0; i < depth.size(); ++i) {
    depth[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return depth;
}

void write_mask_pgm(const std::string& path, const BinaryMask& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.w << ' ' << mask.h << "\n255\n";
  std::vector<char> buf(mask.values.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<char>(mask.values[i] ? 255 : 0);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

BinaryMask read_mask_pgm(const std::string& path) {
  int w = 0, h = 0, maxval = 0;
  auto in = open_in(path, "P5", w, h, maxval);
  if (maxval != 255) throw ParseError(path + ": expected an 8-bit mask");
  BinaryMask m(w, h);
  std::vector<unsigned char> buf(m.values.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw ParseError(path + ": truncated pixel data");
  for (std::size_t i = 0; i < buf.size(); ++i) m.values[i] = buf[i] ? 1 : 0;
  return m;
}

}  // namespace symtrack
