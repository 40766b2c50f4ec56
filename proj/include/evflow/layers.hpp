// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "evflow/params.hpp"

namespace evflow {

/// k x k convolution with bias, registered as <name>.weight / <name>.bias.
struct Conv2d {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
         std::size_t stride = 1, double gain = 1.0);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
};

}  // namespace evflow
