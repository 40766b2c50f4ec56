// SPDX-License-Identifier: Apache-2.0
//
// The full flow network: guide and event correlation branches, context
// encoding, guided aggregation and iterative ConvGRU refinement.
#pragma once

#include <cstdint>
#include <vector>

#include "evflow/aggregation.hpp"
#include "evflow/config.hpp"
#include "evflow/correlation.hpp"
#include "evflow/encoders.hpp"
#include "evflow/events.hpp"
#include "evflow/image.hpp"
#include "evflow/refinement.hpp"

namespace evflow {

/// Network-ready tensors for one frame pair.
struct NetworkInputs {
  Tensor guide0;                 // ICE (or normalized frame) at T_k
  Tensor guide1;                 // ICE (or normalized frame) at T_k1
  std::vector<Tensor> segments;  // normalized voxels V_0 .. V_N, seg_bins channels each
  Tensor frame0;                 // normalized I_k, 1 channel
  Tensor full_voxel;             // normalized voxel over [T_k, T_k1), `bins` channels
};

/// Segments the stream, voxelizes and normalizes everything the network
/// consumes. `events` must cover [T_k - dt, T_k1).
NetworkInputs prepare_inputs(const EventWindow& events, const GrayImage& image0, const GrayImage& image1,
                             std::uint64_t t_k, std::uint64_t t_k1, const ModelConfig& cfg);

/// Intermediate quantities of one forward pass, kept for tests/inspection.
struct ForwardTrace {
  std::vector<Tensor> predictions;          // full resolution, one per iteration
  std::vector<Tensor> coarse_flows;         // feature resolution, one per iteration
  Tensor context;                           // F_st (or single-modality context)
};

class FlowNet {
 public:
  FlowNet(const ModelConfig& cfg, std::uint64_t seed);
  FlowNet(const FlowNet&) = delete;
  FlowNet& operator=(const FlowNet&) = delete;
  FlowNet(FlowNet&&) = default;

  /// Returns `iters` full-resolution flow predictions.
  std::vector<Tensor> forward(const NetworkInputs& in, std::size_t iters) const;
  ForwardTrace forward_trace(const NetworkInputs& in, std::size_t iters) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// F_st, or the single-modality context when configured.
  Tensor context(const NetworkInputs& in) const;
  /// Fused motion feature for the current coarse flow.
  Tensor motion(const CorrelationVolume& guide, const std::vector<CorrelationVolume>& temporal,
                const Tensor& flow) const;

 private:
  // Declared before the modules: they register into params_ on construction.
  ModelConfig cfg_;
  ParamStore params_;

 public:
  ConvEncoder guide_encoder;
  ConvEncoder event_encoder;
  ConvEncoder spatial_context;
  ConvEncoder temporal_context;
  MixFusion mix;
  MotionEncoder ice_motion;
  MotionEncoder event_motion;
  GuidedAggregation aggregation;
  MotionFusion fusion;
  StateInit state_init;
  ConvGru gru;
  FlowHead head;
};

}  // namespace evflow
