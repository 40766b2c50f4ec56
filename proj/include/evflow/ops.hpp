// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations. Only the op set the flow network needs; there
// is no general broadcasting. Image-like tensors are C x H x W.
#pragma once

#include <cstdint>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

/// Concatenates along dimension 0; remaining dimensions must match.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// Channels [begin, end) along dimension 0.
Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // 2-D only

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);

/// Cross-correlation with zero padding. x: Cin x H x W, w: Cout x Cin x k x k,
/// bias: Cout (may be undefined).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Samples src (C x H x W) at coords (2 x Ho x Wo, channel 0 = row y,
/// channel 1 = column x). Pixel-center convention; samples outside
/// [0, H-1] x [0, W-1] are 0.
Tensor bilinear_sample(const Tensor& src, const Tensor& coords);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum of absolute differences.
Tensor l1(const Tensor& a, const Tensor& b);
/// Per-pixel L1 norm of the channel difference, averaged over pixels where
/// mask != 0. a, b: C x H x W; mask: H*W entries.
Tensor masked_l1_mean(const Tensor& a, const Tensor& b, const std::vector<std::uint8_t>& mask);

}  // namespace evflow::ops
