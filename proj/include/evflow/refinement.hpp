// SPDX-License-Identifier: Apache-2.0
//
// Recurrent refinement: ConvGRU state updates, the flow-delta head, flow
// upsampling and the decayed sequence loss.
#pragma once

#include <vector>

#include "evflow/image.hpp"
#include "evflow/layers.hpp"

namespace evflow {

/// Standard convolutional GRU with 3x3 gates over [h, x]:
///   z = sigmoid(Wz [h, x]), r = sigmoid(Wr [h, x]), q = tanh(Wq [r*h, x]),
///   h' = (1 - z) * h + z * q.
class ConvGru {
 public:
  ConvGru() = default;
  ConvGru(ParamStore& store, const std::string& prefix, std::size_t hidden, std::size_t input);

  Tensor operator()(const Tensor& h, const Tensor& x) const;

  Conv2d conv_z, conv_r, conv_q;
};

/// Two 3x3 convs: hidden -> mid -> 2 (u, v delta at feature resolution).
class FlowHead {
 public:
  FlowHead() = default;
  FlowHead(ParamStore& store, const std::string& prefix, std::size_t hidden, std::size_t mid);

  Tensor operator()(const Tensor& h) const;

  Conv2d c1, c2;
};

/// hidden = tanh(1x1 conv(context)).
class StateInit {
 public:
  StateInit() = default;
  StateInit(ParamStore& store, const std::string& prefix, std::size_t context, std::size_t hidden);

  Tensor operator()(const Tensor& context) const;

  Conv2d proj;
};

/// Bilinear x`factor` upsampling of a 2 x H' x W' flow with values scaled by
/// `factor`. Full-resolution pixel centre x samples x' = (x + 0.5)/factor - 0.5
/// clamped to the coarse grid, so constant fields stay constant.
Tensor upsample_flow(const Tensor& flow, std::size_t factor);

/// sum_j gamma^(n-j) * mean over valid pixels of |du| + |dv|.
/// Throws ArgumentError for an empty prediction list, gamma outside (0, 1]
/// or an empty valid mask.
Tensor sequence_loss(const std::vector<Tensor>& predictions, const FlowField& gt, double gamma);

}  // namespace evflow
