// SPDX-License-Identifier: Apache-2.0
#include "evflow/ice.hpp"

#include <cmath>

#include "evflow/error.hpp"
#include "evflow/ops.hpp"

namespace evflow {

Tensor normalize_image(const GrayImage& img) {
  std::vector<double> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = img.pixels[i];
    if (!(v >= 0.0 && v <= 255.0)) throw ArgumentError("image value outside [0, 255]");
    out[i] = 2.0 * v / 255.0 - 1.0;
  }
  return Tensor(Shape{1, img.height, img.width}, std::move(out));
}

Tensor normalize_voxel(const VoxelGrid& v, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("normalize_voxel requires eps > 0");
  double peak = 0.0;
  for (double x : v.values.data()) peak = std::max(peak, std::abs(x));
  const double denom = peak + eps;
  std::vector<double> out(v.values.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.values[i] / denom;
  return Tensor(v.values.shape(), std::move(out));
}

IceTensor build_ice(const EventWindow& ev, const GrayImage& frame, std::size_t seg_bins, double eps) {
  if (ev.sensor().height != frame.height || ev.sensor().width != frame.width) {
    throw ArgumentError("ICE: event sensor and frame sizes differ");
  }
  NoGradGuard no_grad;
  IceTensor ice;
  ice.values = ops::concat_channels({normalize_voxel(voxelize(ev, seg_bins), eps), normalize_image(frame)});
  ice.t = ev.t_end();
  return ice;
}

}  // namespace evflow
