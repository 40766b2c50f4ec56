// SPDX-License-Identifier: Apache-2.0
//
// Grayscale frames, flow fields and their file formats (PGM, PPM, .flo).
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major, intensity levels 0..255

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}
  double& operator()(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double operator()(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  Tensor to_tensor() const;  // 1 x H x W, unnormalized
};

/// Per-pixel displacement (u = along x, v = along y) in pixels.
struct FlowField {
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor values;                     // 2 x H x W
  std::vector<std::uint8_t> valid;   // H*W, nonzero = valid

  FlowField() = default;
  FlowField(std::size_t h, std::size_t w);
  static FlowField from_tensor(const Tensor& t);  // all pixels valid
  double u(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double v(std::size_t y, std::size_t x) const { return values[height * width + y * width + x]; }
  void set(std::size_t y, std::size_t x, double u, double v);
};

GrayImage read_pgm(const std::filesystem::path& path);
/// Values are rounded and clamped to 0..255.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
/// Interleaved RGB bytes, row-major.
void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               const std::vector<std::uint8_t>& rgb);

/// Middlebury .flo: float 202021.25, int32 width, int32 height, then
/// interleaved (u, v) float32, all little-endian. Invalid pixels are written
/// as 1e10 and the mask goes to a sidecar PGM (255 = valid).
void write_flo(const std::filesystem::path& path, const FlowField& flow);
/// Reads a .flo and, when present, the sidecar mask `mask_path`.
/// Pixels with |u| or |v| > 1e9 are marked invalid regardless.
FlowField read_flo(const std::filesystem::path& path, const std::filesystem::path& mask_path = {});
void write_mask(const std::filesystem::path& path, const FlowField& flow);

}  // namespace evflow
