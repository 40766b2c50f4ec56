// SPDX-License-Identifier: Apache-2.0
#include "evflow/aggregation.hpp"

#include <cmath>

#include "evflow/error.hpp"
#include "evflow/ops.hpp"

namespace evflow {

namespace {

Tensor flatten(const Tensor& m) {
  if (m.rank() != 3) throw DimensionError("motion feature must be D x H x W, got " + shape_str(m.shape()));
  return ops::reshape(m, Shape{m.dim(0), m.dim(1) * m.dim(2)});
}

}  // namespace

GuidedAggregation::GuidedAggregation(ParamStore& store, const std::string& prefix, std::size_t motion_channels)
    : w_query(store.add(prefix + ".w_query", Shape{motion_channels, motion_channels}, motion_channels)),
      w_key(store.add(prefix + ".w_key", Shape{motion_channels, motion_channels}, motion_channels)),
      w_value(store.add(prefix + ".w_value", Shape{motion_channels, motion_channels}, motion_channels)),
      ffn_a(store, prefix + ".ffn_a", motion_channels, motion_channels, 1),
      ffn_b(store, prefix + ".ffn_b", motion_channels, motion_channels, 1, 1, 0.5) {}

Projections GuidedAggregation::project_qkv(const MotionFeatureSet& set) const {
  Projections out;
  const Tensor ice = flatten(set.ice);
  for (const auto& m : set.event) {
    if (m.shape() != set.ice.shape()) throw DimensionError("event motion feature shape differs from ICE feature");
    out.query_event.push_back(ops::matmul(w_query, flatten(m)));
  }
  out.query_ice = ops::matmul(w_query, ice);
  out.key = ops::matmul(w_key, ice);
  out.value = ops::matmul(w_value, ice);
  return out;
}

Tensor GuidedAggregation::attention(const Tensor& query, const Tensor& key) const {
  if (query.rank() != 2 || key.rank() != 2 || query.dim(0) != key.dim(0)) {
    throw DimensionError("attention: query/key widths differ");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(key.dim(0)));
  return ops::softmax_rows(ops::scale(ops::matmul(ops::transpose(query), key), inv));
}

Tensor GuidedAggregation::aggregate(const Tensor& motion, const Tensor& query, const Tensor& key,
                                    const Tensor& value) const {
  if (key.shape() != value.shape()) throw DimensionError("aggregate: key and value token counts differ");
  if (motion.rank() != 3 || query.dim(1) != motion.dim(1) * motion.dim(2)) {
    throw DimensionError("aggregate: query tokens do not match motion feature pixels");
  }
  const Tensor weights = attention(query, key);                       // P_q x P_k
  const Tensor mixed = ops::matmul(value, ops::transpose(weights));   // D_a x P_q
  const Tensor grid = ops::reshape(mixed, Shape{value.dim(0), motion.dim(1), motion.dim(2)});
  return ops::add(motion, ffn_b(ops::relu(ffn_a(grid))));
}

MotionFusion::MotionFusion(ParamStore& store, const std::string& prefix, std::size_t parts,
                           std::size_t motion_channels)
    : proj(store, prefix + ".proj", parts * motion_channels, motion_channels, 1) {}

Tensor MotionFusion::operator()(const Tensor& first, const std::vector<Tensor>& rest) const {
  std::vector<Tensor> parts{first};
  parts.insert(parts.end(), rest.begin(), rest.end());
  const Tensor stacked = ops::concat_channels(parts);
  if (stacked.dim(0) != proj.in_channels()) {
    throw DimensionError("motion fusion expects " + std::to_string(proj.in_channels()) + " channels, got " +
                         std::to_string(stacked.dim(0)));
  }
  return ops::relu(proj(stacked));
}

}  // namespace evflow
