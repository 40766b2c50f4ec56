// SPDX-License-Identifier: Apache-2.0
#include "evflow/model.hpp"

#include "evflow/error.hpp"
#include "evflow/ice.hpp"
#include "evflow/ops.hpp"

namespace evflow {

NetworkInputs prepare_inputs(const EventWindow& events, const GrayImage& image0, const GrayImage& image1,
                             std::uint64_t t_k, std::uint64_t t_k1, const ModelConfig& cfg) {
  if (image0.height != image1.height || image0.width != image1.width ||
      events.sensor() != SensorSize{image0.height, image0.width}) {
    throw ArgumentError("frames and event sensor sizes differ");
  }
  NoGradGuard no_grad;
  const Segmentation seg = segment_reference_targets(events, t_k, t_k1, cfg.num_targets);
  NetworkInputs in;
  if (cfg.guidance == GuidanceMode::Ice) {
    in.guide0 = build_ice(seg.reference, image0, cfg.seg_bins, cfg.eps).values;
    in.guide1 = build_ice(seg.targets.back(), image1, cfg.seg_bins, cfg.eps).values;
  } else {
    in.guide0 = normalize_image(image0);
    in.guide1 = normalize_image(image1);
  }
  in.segments.push_back(normalize_voxel(voxelize(seg.reference, cfg.seg_bins), cfg.eps));
  for (const auto& t : seg.targets) in.segments.push_back(normalize_voxel(voxelize(t, cfg.seg_bins), cfg.eps));
  in.frame0 = normalize_image(image0);
  in.full_voxel = normalize_voxel(voxelize(slice_window(events, t_k, t_k1), cfg.bins), cfg.eps);
  return in;
}

FlowNet::FlowNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  params_.seed(seed);
  const std::size_t s = cfg_.stride;
  guide_encoder = ConvEncoder(params_, "guide_enc", cfg_.guide_channels(), cfg_.feat_dim, s);
  event_encoder = ConvEncoder(params_, "event_enc", cfg_.seg_bins, cfg_.feat_dim, s);
  if (cfg_.context != ContextMode::Event) {
    spatial_context = ConvEncoder(params_, "ctx_spatial", 1, cfg_.ctx_dim, s);
  }
  if (cfg_.context != ContextMode::Frame) {
    temporal_context = ConvEncoder(params_, "ctx_temporal", cfg_.bins, cfg_.ctx_dim, s);
  }
  if (cfg_.context == ContextMode::SpatioTemporal) mix = MixFusion(params_, "mix", cfg_.ctx_dim);
  ice_motion = MotionEncoder(params_, "em_ice", cfg_.cost_channels(), cfg_.motion_dim);
  event_motion = MotionEncoder(params_, "em_event", cfg_.cost_channels(), cfg_.motion_dim);
  if (cfg_.fusion == FusionMode::Guided) aggregation = GuidedAggregation(params_, "attn", cfg_.motion_dim);
  fusion = MotionFusion(params_, "fuse", cfg_.num_targets + 1, cfg_.motion_dim);
  state_init = StateInit(params_, "init", cfg_.ctx_dim, cfg_.hidden_dim);
  gru = ConvGru(params_, "gru", cfg_.hidden_dim, cfg_.motion_dim + cfg_.ctx_dim);
  head = FlowHead(params_, "head", cfg_.hidden_dim, 32);
}

Tensor FlowNet::context(const NetworkInputs& in) const {
  switch (cfg_.context) {
    case ContextMode::Frame: return spatial_context(in.frame0);
    case ContextMode::Event: return temporal_context(in.full_voxel);
    case ContextMode::SpatioTemporal: break;
  }
  return mix(spatial_context(in.frame0), temporal_context(in.full_voxel));
}

Tensor FlowNet::motion(const CorrelationVolume& guide, const std::vector<CorrelationVolume>& temporal,
                       const Tensor& flow) const {
  const std::size_t n = temporal.size();
  MotionFeatureSet set;
  set.ice = ice_motion(lookup(guide, flow, cfg_.radius), flow);
  for (std::size_t i = 1; i <= n; ++i) {
    set.event.push_back(event_motion(linear_lookup(temporal, flow, i, n, cfg_.radius), flow));
  }
  if (cfg_.fusion == FusionMode::Concat) return fusion(set.ice, set.event);

  const Projections qkv = aggregation.project_qkv(set);
  std::vector<Tensor> aggregated;
  aggregated.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    aggregated.push_back(aggregation.aggregate(set.event[i], qkv.query_event[i], qkv.key, qkv.value));
  }
  const Tensor ice = cfg_.aggregate_ice ? aggregation.aggregate(set.ice, qkv.query_ice, qkv.key, qkv.value) : set.ice;
  return fusion(ice, aggregated);
}

ForwardTrace FlowNet::forward_trace(const NetworkInputs& in, std::size_t iters) const {
  if (iters == 0) throw ArgumentError("forward pass needs at least one iteration");
  if (in.segments.size() != cfg_.num_targets + 1) {
    throw ArgumentError("expected " + std::to_string(cfg_.num_targets + 1) + " event segments, got " +
                        std::to_string(in.segments.size()));
  }
  const CorrelationVolume guide = build_guide_corr(guide_encoder(in.guide0), guide_encoder(in.guide1));
  std::vector<Tensor> segment_features;
  segment_features.reserve(in.segments.size());
  for (const auto& v : in.segments) segment_features.push_back(event_encoder(v));
  const std::vector<CorrelationVolume> temporal = build_temporal_corr(
      segment_features.front(), std::vector<Tensor>(segment_features.begin() + 1, segment_features.end()));

  ForwardTrace trace;
  trace.context = context(in);
  Tensor hidden = state_init(trace.context);
  Tensor flow(Shape{2, guide.height, guide.width});
  for (std::size_t it = 0; it < iters; ++it) {
    // Each update sees the previous estimate as a constant.
    flow = flow.detach();
    const Tensor m = motion(guide, temporal, flow);
    hidden = gru(hidden, ops::concat_channels({m, trace.context}));
    flow = ops::add(flow, head(hidden));
    trace.coarse_flows.push_back(flow);
    trace.predictions.push_back(upsample_flow(flow, cfg_.stride));
  }
  return trace;
}

std::vector<Tensor> FlowNet::forward(const NetworkInputs& in, std::size_t iters) const {
  return forward_trace(in, iters).predictions;
}

}  // namespace evflow
