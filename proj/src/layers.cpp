// SPDX-License-Identifier: Apache-2.0
#include "evflow/layers.hpp"

#include "evflow/ops.hpp"

namespace evflow {

Conv2d::Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t stride_, double gain)
    : weight(store.add(name + ".weight", Shape{out, in, kernel, kernel}, in * kernel * kernel, gain)),
      bias(store.add_zeros(name + ".bias", Shape{out})),
      stride(stride_),
      pad(kernel / 2) {}

Tensor Conv2d::operator()(const Tensor& x) const { return ops::conv2d(x, weight, bias, stride, pad); }

}  // namespace evflow
