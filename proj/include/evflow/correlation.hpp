// SPDX-License-Identifier: Apache-2.0
//
// All-pairs correlation volumes and the (linear) lookup that samples them
// around the current flow estimate.
#pragma once

#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

/// (H'W') x (H'W') matrix of scaled dot products; row p is the map of
/// similarities between source pixel p and every target pixel.
struct CorrelationVolume {
  Tensor matrix;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// C = F1^T F2 / sqrt(D) for D x H' x W' feature maps.
CorrelationVolume build_guide_corr(const Tensor& f1, const Tensor& f2);

/// Entry n correlates the reference features with target n.
std::vector<CorrelationVolume> build_temporal_corr(const Tensor& reference, const std::vector<Tensor>& targets);

/// Samples row p of `corr` at p + flow_scale * flow(p) + d for every
/// d in [-r, r]^2. Output channels are row-major in d (dy outer, dx inner);
/// out-of-range samples are 0. flow: 2 x H' x W' holding (u, v).
Tensor lookup(const CorrelationVolume& corr, const Tensor& flow, int radius, double flow_scale = 1.0);

/// lookup(C_T[i-1], flow * i / n, r) for 1 <= i <= n.
Tensor linear_lookup(const std::vector<CorrelationVolume>& temporal, const Tensor& flow, std::size_t i,
                     std::size_t n, int radius);

/// Forward-only lookup that evaluates correlation entries on demand from
/// the feature maps instead of a stored matrix. Matches the dense path
/// bit for bit.
Tensor lookup_lazy(const Tensor& f1, const Tensor& f2, const Tensor& flow, int radius, double flow_scale = 1.0);

}  // namespace evflow
