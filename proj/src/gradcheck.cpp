// SPDX-License-Identifier: Apache-2.0
#include "evflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "evflow/ops.hpp"

namespace evflow {

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss,
                                  const std::vector<GradCheckTarget>& targets, double h) {
  for (const auto& t : targets) {
    t.leaf.impl()->requires_grad = true;
    t.leaf.impl()->grad.clear();
  }
  loss().backward();

  GradCheckResult result;
  for (const auto& t : targets) {
    Tensor leaf = t.leaf;
    std::vector<std::size_t> idx = t.indices;
    if (idx.empty()) {
      idx.resize(leaf.numel());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    for (std::size_t i : idx) {
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double saved = leaf.mutable_data()[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        leaf.mutable_data()[i] = saved + h;
        plus = loss().item();
        leaf.mutable_data()[i] = saved - h;
        minus = loss().item();
      }
      leaf.mutable_data()[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.coordinates;
    }
  }
  return result;
}

Tensor project_to_scalar(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(out.numel());
  for (auto& v : w) v = dist(rng);
  return ops::sum(ops::mul(out, Tensor(out.shape(), std::move(w))));
}

}  // namespace evflow
