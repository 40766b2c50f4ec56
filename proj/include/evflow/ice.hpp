// SPDX-License-Identifier: Apache-2.0
//
// Image-Event Connection: a short-window event voxel and its frame, both
// mapped to [-1, 1] and stacked along channels (voxel bins first).
#pragma once

#include <cstdint>

#include "evflow/events.hpp"
#include "evflow/image.hpp"

namespace evflow {

struct IceTensor {
  Tensor values;  // (seg_bins + 1) x H x W
  std::uint64_t t = 0;
};

/// 2 * I / 255 - 1. Throws ArgumentError for values outside [0, 255].
Tensor normalize_image(const GrayImage& img);

/// V / (max|V| + eps), max taken over this grid only.
Tensor normalize_voxel(const VoxelGrid& v, double eps);

/// ICE from the events in [t - dt, t) and the frame at t.
IceTensor build_ice(const EventWindow& ev, const GrayImage& frame, std::size_t seg_bins, double eps);

}  // namespace evflow
