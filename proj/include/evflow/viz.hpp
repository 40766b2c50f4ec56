// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "evflow/image.hpp"

namespace evflow {

/// Middlebury color wheel: hue encodes direction, saturation the magnitude
/// relative to the largest valid vector. Zero flow is white, invalid pixels
/// black. Returns interleaved RGB.
std::vector<std::uint8_t> flow_to_rgb(const FlowField& flow);

}  // namespace evflow
