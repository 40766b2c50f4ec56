// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

/// A leaf tensor and the flat indices of it that get perturbed.
/// Empty `indices` means every element.
struct GradCheckTarget {
  Tensor leaf;
  std::vector<std::size_t> indices;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central-difference check of a scalar-valued closure. `loss` must
/// rebuild its graph from the targets' current values on every call.
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|).
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss,
                                  const std::vector<GradCheckTarget>& targets, double h = 1e-5);

/// Reduces an arbitrary-shaped op output to a scalar with fixed random
/// weights, so a non-scalar op can be checked: sum(out * weights).
Tensor project_to_scalar(const Tensor& out, std::uint64_t seed);

}  // namespace evflow
