// SPDX-License-Identifier: Apache-2.0
#include "evflow/refinement.hpp"

#include <algorithm>
#include <cmath>

#include "evflow/error.hpp"
#include "evflow/kernels.hpp"
#include "evflow/ops.hpp"

namespace evflow {

ConvGru::ConvGru(ParamStore& store, const std::string& prefix, std::size_t hidden, std::size_t input)
    : conv_z(store, prefix + ".conv_z", hidden + input, hidden, 3),
      conv_r(store, prefix + ".conv_r", hidden + input, hidden, 3),
      conv_q(store, prefix + ".conv_q", hidden + input, hidden, 3) {}

Tensor ConvGru::operator()(const Tensor& h, const Tensor& x) const {
  if (h.rank() != 3 || x.rank() != 3 || h.dim(1) != x.dim(1) || h.dim(2) != x.dim(2)) {
    throw DimensionError("gru_step: hidden " + shape_str(h.shape()) + " and input " + shape_str(x.shape()) +
                         " differ spatially");
  }
  const Tensor hx = ops::concat_channels({h, x});
  const Tensor z = ops::sigmoid(conv_z(hx));
  const Tensor r = ops::sigmoid(conv_r(hx));
  const Tensor q = ops::tanh(conv_q(ops::concat_channels({ops::mul(r, h), x})));
  return ops::add(ops::mul(ops::add_scalar(ops::scale(z, -1.0), 1.0), h), ops::mul(z, q));
}

FlowHead::FlowHead(ParamStore& store, const std::string& prefix, std::size_t hidden, std::size_t mid)
    : c1(store, prefix + ".c1", hidden, mid, 3), c2(store, prefix + ".c2", mid, 2, 3, 1, 0.1) {}

Tensor FlowHead::operator()(const Tensor& h) const { return c2(ops::relu(c1(h))); }

StateInit::StateInit(ParamStore& store, const std::string& prefix, std::size_t context, std::size_t hidden)
    : proj(store, prefix + ".proj", context, hidden, 1) {}

Tensor StateInit::operator()(const Tensor& context) const { return ops::tanh(proj(context)); }

Tensor upsample_flow(const Tensor& flow, std::size_t factor) {
  if (flow.rank() != 3 || flow.dim(0) != 2) throw DimensionError("upsample_flow: expected 2 x H x W");
  if (factor == 0) throw ArgumentError("upsample_flow: factor must be positive");
  const std::size_t h = flow.dim(1), w = flow.dim(2), H = h * factor, W = w * factor;
  const double s = static_cast<double>(factor);
  std::vector<double> ys(H), xs(W);
  for (std::size_t y = 0; y < H; ++y)
    ys[y] = std::clamp((static_cast<double>(y) + 0.5) / s - 0.5, 0.0, static_cast<double>(h - 1));
  for (std::size_t x = 0; x < W; ++x)
    xs[x] = std::clamp((static_cast<double>(x) + 0.5) / s - 0.5, 0.0, static_cast<double>(w - 1));

  std::vector<double> out(2 * H * W);
  for (std::size_t c = 0; c < 2; ++c) {
    const double* map = flow.data().data() + c * h * w;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        out[(c * H + y) * W + x] = s * kernels::bilinear_tap(map, h, w, ys[y], xs[x]).value;
  }
  return Tensor::make_result(Shape{2, H, W}, std::move(out), {flow},
                             [flow, ys, xs, h, w, H, W, s](std::span<const double> g) {
                               auto gf = grad_buffer(flow);
                               for (std::size_t c = 0; c < 2; ++c)
                                 for (std::size_t y = 0; y < H; ++y)
                                   for (std::size_t x = 0; x < W; ++x)
                                     kernels::bilinear_scatter(gf.data() + c * h * w, h, w, ys[y], xs[x],
                                                               s * g[(c * H + y) * W + x]);
                             });
}

Tensor sequence_loss(const std::vector<Tensor>& predictions, const FlowField& gt, double gamma) {
  if (predictions.empty()) throw ArgumentError("sequence_loss: no predictions");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("sequence_loss: gamma must lie in (0, 1]");
  const std::size_t n = predictions.size();
  Tensor total;
  for (std::size_t j = 1; j <= n; ++j) {
    const double weight = std::pow(gamma, static_cast<double>(n - j));
    Tensor term = ops::scale(ops::masked_l1_mean(predictions[j - 1], gt.values, gt.valid), weight);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

}  // namespace evflow
