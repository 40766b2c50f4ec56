// SPDX-License-Identifier: Apache-2.0
#include "evflow/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evflow/error.hpp"

namespace evflow {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr double kInvalidFlow = 1e10;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated .flo file", 0);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Skips whitespace and '#' comments in a PNM header.
std::size_t pnm_number(std::istream& is) {
  while (true) {
    const int c = is.peek();
    if (c == '#') {
      std::string dummy;
      std::getline(is, dummy);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(is >> v)) throw ParseError("malformed PNM header", 0);
  return v;
}

}  // namespace

Tensor GrayImage::to_tensor() const { return Tensor(Shape{1, height, width}, pixels); }

FlowField::FlowField(std::size_t h, std::size_t w)
    : height(h), width(w), values(Shape{2, h, w}), valid(h * w, 1) {}

FlowField FlowField::from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 2) throw DimensionError("flow tensor must be 2 x H x W");
  FlowField f;
  f.height = t.dim(1);
  f.width = t.dim(2);
  f.values = t.detach();
  f.valid.assign(f.height * f.width, 1);
  return f;
}

void FlowField::set(std::size_t y, std::size_t x, double uu, double vv) {
  auto d = values.mutable_data();
  d[y * width + x] = uu;
  d[height * width + y * width + x] = vv;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open " + path.string());
  std::string magic;
  is >> magic;
  if (magic != "P5") throw ParseError("not a binary PGM: " + path.string(), 0);
  const std::size_t w = pnm_number(is), h = pnm_number(is), maxval = pnm_number(is);
  if (maxval == 0 || maxval > 255) throw ParseError("unsupported PGM maxval", 0);
  is.get();
  GrayImage img(h, w);
  std::vector<unsigned char> bytes(h * w);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw ParseError("truncated PGM " + path.string(), 0);
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i];
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(img.pixels[i]), 0L, 255L));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != 3 * height * width) throw DimensionError("ppm buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P6\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  put_u32(os, std::bit_cast<std::uint32_t>(kFloMagic));
  put_u32(os, static_cast<std::uint32_t>(flow.width));
  put_u32(os, static_cast<std::uint32_t>(flow.height));
  for (std::size_t y = 0; y < flow.height; ++y) {
    for (std::size_t x = 0; x < flow.width; ++x) {
      const bool ok = flow.valid[y * flow.width + x] != 0;
      put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(ok ? flow.u(y, x) : kInvalidFlow)));
      put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(ok ? flow.v(y, x) : kInvalidFlow)));
    }
  }
}

void write_mask(const std::filesystem::path& path, const FlowField& flow) {
  GrayImage m(flow.height, flow.width);
  for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = flow.valid[i] ? 255.0 : 0.0;
  write_pgm(path, m);
}

FlowField read_flo(const std::filesystem::path& path, const std::filesystem::path& mask_path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open " + path.string());
  if (std::bit_cast<float>(get_u32(is)) != kFloMagic) throw ParseError("bad .flo magic in " + path.string(), 0);
  const std::size_t w = get_u32(is), h = get_u32(is);
  FlowField f(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = std::bit_cast<float>(get_u32(is));
      const double v = std::bit_cast<float>(get_u32(is));
      const bool ok = std::abs(u) <= 1e9 && std::abs(v) <= 1e9;
      f.set(y, x, ok ? u : 0.0, ok ? v : 0.0);
      f.valid[y * w + x] = ok;
    }
  }
  if (!mask_path.empty() && std::filesystem::exists(mask_path)) {
    const GrayImage m = read_pgm(mask_path);
    if (m.height != h || m.width != w) throw DimensionError("mask size differs from flow size");
    for (std::size_t i = 0; i < m.pixels.size(); ++i) f.valid[i] = f.valid[i] && m.pixels[i] > 127.0;
  }
  return f;
}

}  // namespace evflow
