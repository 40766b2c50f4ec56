// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "evflow/error.hpp"
#include "evflow/gradcheck.hpp"
#include "evflow/ops.hpp"
#include "oracles.hpp"

using namespace evflow;

TEST_CASE("shape and element access") {
  Tensor t(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(shape_str(t.shape()) == "[2x3]");
}

TEST_CASE("backward through a shared subexpression") {
  Tensor x = Tensor::scalar(3.0);
  x.set_requires_grad(true);
  const Tensor y = ops::mul(x, x);       // x^2
  const Tensor z = ops::add(y, ops::mul(y, x));  // x^2 + x^3
  z.backward();
  CHECK(x.grad()[0] == doctest::Approx(2 * 3.0 + 3 * 9.0));
}

TEST_CASE("leaf gradients accumulate until zero_grad") {
  Tensor x = Tensor::scalar(2.0);
  x.set_requires_grad(true);
  ops::scale(x, 3.0).backward();
  ops::scale(x, 3.0).backward();
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("second backward on the same graph is a stale-graph error") {
  Tensor x = Tensor::scalar(2.0);
  x.set_requires_grad(true);
  const Tensor y = ops::tanh(ops::mul(x, x));
  y.backward();
  CHECK_THROWS_AS(y.backward(), StaleGraphError);
}

TEST_CASE("backward requires a scalar reachable from leaves") {
  Tensor a(Shape{2}, 1.0);
  a.set_requires_grad(true);
  CHECK_THROWS_AS(ops::scale(a, 2.0).backward(), DimensionError);
  CHECK_THROWS_AS(Tensor::scalar(1.0).backward(), ArgumentError);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor x = Tensor::scalar(2.0);
  x.set_requires_grad(true);
  NoGradGuard guard;
  const Tensor y = ops::mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(grad_enabled() == false);
}

TEST_CASE("detach cuts the graph") {
  Tensor x = Tensor::scalar(2.0);
  x.set_requires_grad(true);
  const Tensor y = ops::mul(ops::mul(x, x).detach(), x);
  y.backward();
  CHECK(x.grad()[0] == 4.0);
}

TEST_CASE("deep chains do not overflow the stack") {
  Tensor x = Tensor::scalar(1.0);
  x.set_requires_grad(true);
  Tensor y = x;
  for (int i = 0; i < 200000; ++i) y = ops::add_scalar(y, 0.0);
  y.backward();
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("every leaf gets a gradient with its own shape") {
  std::mt19937_64 rng(3);
  Tensor a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 2}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  ops::sum(ops::matmul(a, b)).backward();
  CHECK(a.grad().size() == a.numel());
  CHECK(b.grad().size() == b.numel());
}

TEST_CASE("finite-difference checker examples") {
  std::mt19937_64 rng(5);
  Tensor a = oracle::random_tensor({4, 4}, rng), b = oracle::random_tensor({4, 4}, rng);
  const auto mm = finite_diff_check([&] { return project_to_scalar(ops::matmul(a, b), 1); }, {{a, {}}, {b, {}}});
  CHECK(mm.max_rel_error < 1e-6);
  CHECK(mm.coordinates == 32);
  Tensor s = oracle::random_tensor({3, 5}, rng);
  const auto sm = finite_diff_check([&] { return project_to_scalar(ops::softmax_rows(s), 2); }, {{s, {}}});
  CHECK(sm.max_rel_error < 1e-6);
}

TEST_CASE("finite-difference checker detects a wrong gradient") {
  Tensor x(Shape{3}, std::vector<double>{0.3, -0.2, 0.5});
  // Forward is x^2 but the recorded derivative is deliberately 3x.
  auto bad_square = [](const Tensor& in) {
    std::vector<double> v(in.data().begin(), in.data().end());
    for (auto& e : v) e *= e;
    return Tensor::make_result(in.shape(), v, {in}, [in](std::span<const double> g) {
      auto gi = grad_buffer(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i] * 3.0 * in[i];
    });
  };
  const auto r = finite_diff_check([&] { return ops::sum(bad_square(x)); }, {{x, {}}});
  CHECK(r.max_rel_error > 0.1);
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(9);
  Tensor x = oracle::random_tensor({3, 8, 8}, rng), w = oracle::random_tensor({4, 3, 3, 3}, rng);
  const Tensor a = ops::softmax_rows(ops::reshape(ops::conv2d(x, w, Tensor(), 1, 1), {4, 64}));
  const Tensor b = ops::softmax_rows(ops::reshape(ops::conv2d(x, w, Tensor(), 1, 1), {4, 64}));
  CHECK(oracle::max_abs_diff(a.data(), b.data()) == 0.0);
}
