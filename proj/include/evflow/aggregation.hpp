// SPDX-License-Identifier: Apache-2.0
//
// Cross-modal guided aggregation: event motion features query the ICE
// motion features (keys and values) with single-head global attention over
// all feature-resolution pixels, then everything is fused for the GRU.
#pragma once

#include <vector>

#include "evflow/layers.hpp"

namespace evflow {

struct MotionFeatureSet {
  Tensor ice;                 // D_m x H' x W'
  std::vector<Tensor> event;  // N entries, each D_m x H' x W'
};

/// Projections are stored channel-major: tokens are columns of D x P
/// matrices (P = H'W').
struct Projections {
  std::vector<Tensor> query_event;  // D_a x P each
  Tensor query_ice;                 // D_a x P
  Tensor key;                       // D_a x P
  Tensor value;                     // D_a x P
};

class GuidedAggregation {
 public:
  GuidedAggregation() = default;
  GuidedAggregation(ParamStore& store, const std::string& prefix, std::size_t motion_channels);

  /// Q_ev^i = W_Q M_ev^i, Q_img = W_Q M_ice, K = W_K M_ice, V = W_V M_ice.
  Projections project_qkv(const MotionFeatureSet& set) const;

  /// AM = M + ffn(softmax(Q^T K / sqrt(D_a)) V^T) reshaped back to D_m x H' x W'.
  Tensor aggregate(const Tensor& motion, const Tensor& query, const Tensor& key, const Tensor& value) const;

  /// Attention weights (P x P, rows sum to one) for inspection and tests.
  Tensor attention(const Tensor& query, const Tensor& key) const;

  Tensor w_query, w_key, w_value;  // D_a x D_m
  Conv2d ffn_a, ffn_b;
};

/// Channel-concatenates [first, rest...] and projects to D_m with a 1x1
/// conv + relu.
class MotionFusion {
 public:
  MotionFusion() = default;
  MotionFusion(ParamStore& store, const std::string& prefix, std::size_t parts, std::size_t motion_channels);

  Tensor operator()(const Tensor& first, const std::vector<Tensor>& rest) const;

  Conv2d proj;
};

}  // namespace evflow
