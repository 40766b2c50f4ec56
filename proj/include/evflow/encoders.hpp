// SPDX-License-Identifier: Apache-2.0
//
// Feature encoders (guide/ICE, event segment, spatial and temporal context),
// the mix-fusion context block and the motion-feature encoder.
#pragma once

#include <vector>

#include "evflow/layers.hpp"

namespace evflow {

/// Stride-s convolutional encoder: log2(s) stride-2 3x3 convs with relu, a
/// residual 3x3 block at the output resolution and a 1x1 output layer.
/// Output: out_channels x H/s x W/s.
class ConvEncoder {
 public:
  ConvEncoder() = default;
  ConvEncoder(ParamStore& store, const std::string& prefix, std::size_t in_channels, std::size_t out_channels,
              std::size_t stride);

  Tensor operator()(const Tensor& x) const;
  std::size_t stride() const { return stride_; }
  std::size_t out_channels() const { return out_.out_channels(); }

 private:
  std::vector<Conv2d> down_;
  Conv2d res_a_, res_b_, out_;
  std::size_t stride_ = 1;
};

/// H = concat(F_s, F_t); m = MLP_in(H); F_st = MLP_out(relu(Conv3x3(m))) + m.
/// Both MLPs are per-pixel (1x1) linear layers. Output has ctx channels.
class MixFusion {
 public:
  MixFusion() = default;
  MixFusion(ParamStore& store, const std::string& prefix, std::size_t ctx_channels);

  Tensor operator()(const Tensor& spatial, const Tensor& temporal) const;

  Conv2d mlp_in, conv, mlp_out;
};

/// E_M: concat(cost, flow) -> 1x1 conv -> relu -> 3x3 conv -> relu.
class MotionEncoder {
 public:
  MotionEncoder() = default;
  MotionEncoder(ParamStore& store, const std::string& prefix, std::size_t cost_channels, std::size_t out_channels);

  Tensor operator()(const Tensor& cost, const Tensor& flow) const;
  std::size_t cost_channels() const { return cost_channels_; }

  Conv2d c1, c2;

 private:
  std::size_t cost_channels_ = 0;
};

}  // namespace evflow
