// SPDX-License-Identifier: Apache-2.0
#include "evflow/encoders.hpp"

#include "evflow/error.hpp"
#include "evflow/ops.hpp"

namespace evflow {

ConvEncoder::ConvEncoder(ParamStore& store, const std::string& prefix, std::size_t in_channels,
                         std::size_t out_channels, std::size_t stride)
    : stride_(stride) {
  if (stride == 0 || (stride & (stride - 1))) throw ArgumentError("encoder stride must be a power of two");
  std::size_t levels = 0;
  for (std::size_t s = stride; s > 1; s >>= 1) ++levels;
  std::size_t ch = in_channels;
  for (std::size_t i = 0; i < levels; ++i) {
    const std::size_t next = i == 0 && levels > 1 ? std::max<std::size_t>(out_channels / 2, 1) : out_channels;
    down_.emplace_back(store, prefix + ".down" + std::to_string(i), ch, next, 3, 2);
    ch = next;
  }
  res_a_ = Conv2d(store, prefix + ".res_a", ch, out_channels, 3);
  res_b_ = Conv2d(store, prefix + ".res_b", out_channels, out_channels, 3, 1, 0.5);
  out_ = Conv2d(store, prefix + ".out", out_channels, out_channels, 1);
}

Tensor ConvEncoder::operator()(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) % stride_ != 0 || x.dim(2) % stride_ != 0) {
    throw ArgumentError("encoder input " + shape_str(x.shape()) + " not divisible by stride " + std::to_string(stride_));
  }
  if (!down_.empty() && x.dim(0) != down_.front().in_channels()) {
    throw DimensionError("encoder expects " + std::to_string(down_.front().in_channels()) + " input channels, got " +
                         std::to_string(x.dim(0)));
  }
  Tensor h = x;
  for (const auto& conv : down_) h = ops::relu(conv(h));
  h = ops::relu(ops::add(h, res_b_(ops::relu(res_a_(h)))));
  return out_(h);
}

MixFusion::MixFusion(ParamStore& store, const std::string& prefix, std::size_t ctx_channels)
    : mlp_in(store, prefix + ".mlp_in", 2 * ctx_channels, ctx_channels, 1),
      conv(store, prefix + ".conv", ctx_channels, ctx_channels, 3),
      mlp_out(store, prefix + ".mlp_out", ctx_channels, ctx_channels, 1) {}

Tensor MixFusion::operator()(const Tensor& spatial, const Tensor& temporal) const {
  if (spatial.shape() != temporal.shape()) {
    throw DimensionError("mix_fusion: context shapes differ " + shape_str(spatial.shape()) + " vs " +
                         shape_str(temporal.shape()));
  }
  const Tensor m = mlp_in(ops::concat_channels({spatial, temporal}));
  return ops::add(mlp_out(ops::relu(conv(m))), m);
}

MotionEncoder::MotionEncoder(ParamStore& store, const std::string& prefix, std::size_t cost_channels,
                             std::size_t out_channels)
    : c1(store, prefix + ".c1", cost_channels + 2, out_channels, 1),
      c2(store, prefix + ".c2", out_channels, out_channels, 3),
      cost_channels_(cost_channels) {}

Tensor MotionEncoder::operator()(const Tensor& cost, const Tensor& flow) const {
  if (cost.rank() != 3 || cost.dim(0) != cost_channels_) {
    throw DimensionError("motion encoder expects " + std::to_string(cost_channels_) + " cost channels, got " +
                         shape_str(cost.shape()));
  }
  return ops::relu(c2(ops::relu(c1(ops::concat_channels({cost, flow})))));
}

}  // namespace evflow
