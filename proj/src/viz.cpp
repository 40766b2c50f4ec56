// SPDX-License-Identifier: Apache-2.0
#include "evflow/viz.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace evflow {

namespace {

std::vector<std::array<double, 3>> color_wheel() {
  constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
  std::vector<std::array<double, 3>> wheel;
  for (int i = 0; i < kRY; ++i) wheel.push_back({255.0, 255.0 * i / kRY, 0.0});
  for (int i = 0; i < kYG; ++i) wheel.push_back({255.0 - 255.0 * i / kYG, 255.0, 0.0});
  for (int i = 0; i < kGC; ++i) wheel.push_back({0.0, 255.0, 255.0 * i / kGC});
  for (int i = 0; i < kCB; ++i) wheel.push_back({0.0, 255.0 - 255.0 * i / kCB, 255.0});
  for (int i = 0; i < kBM; ++i) wheel.push_back({255.0 * i / kBM, 0.0, 255.0});
  for (int i = 0; i < kMR; ++i) wheel.push_back({255.0, 0.0, 255.0 - 255.0 * i / kMR});
  return wheel;
}

}  // namespace

std::vector<std::uint8_t> flow_to_rgb(const FlowField& flow) {
  static const auto wheel = color_wheel();
  const std::size_t n = flow.height * flow.width;
  const int ncols = static_cast<int>(wheel.size());
  double max_mag = 0.0;
  for (std::size_t y = 0; y < flow.height; ++y)
    for (std::size_t x = 0; x < flow.width; ++x)
      if (flow.valid[y * flow.width + x]) max_mag = std::max(max_mag, std::hypot(flow.u(y, x), flow.v(y, x)));

  std::vector<std::uint8_t> rgb(3 * n, 0);
  for (std::size_t y = 0; y < flow.height; ++y) {
    for (std::size_t x = 0; x < flow.width; ++x) {
      const std::size_t i = y * flow.width + x;
      if (!flow.valid[i]) continue;
      const double u = max_mag > 0.0 ? flow.u(y, x) / max_mag : 0.0;
      const double v = max_mag > 0.0 ? flow.v(y, x) / max_mag : 0.0;
      const double rad = std::min(1.0, std::hypot(u, v));
      const double angle = std::atan2(-v, -u) / std::numbers::pi;
      const double fk = (angle + 1.0) / 2.0 * (ncols - 1);
      const int k0 = static_cast<int>(std::floor(fk));
      const int k1 = (k0 + 1) % ncols;
      const double f = fk - k0;
      for (int c = 0; c < 3; ++c) {
        const double col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        const double shaded = 1.0 - rad * (1.0 - col);
        rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(255.0 * shaded));
      }
    }
  }
  return rgb;
}

}  // namespace evflow
