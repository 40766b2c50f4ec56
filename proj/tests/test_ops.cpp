// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "evflow/error.hpp"
#include "evflow/ops.hpp"
#include "evflow/verify.hpp"
#include "oracles.hpp"

using namespace evflow;

TEST_CASE("matmul examples") {
  const Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  CHECK(oracle::max_abs_diff(ops::matmul(eye, eye).data(), eye.data()) == 0.0);
  const Tensor c = ops::matmul(Tensor::from_rows({{1, 2}, {3, 4}}), Tensor::from_rows({{1}, {1}}));
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
  CHECK_THROWS_AS(ops::matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3})), DimensionError);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  std::mt19937_64 rng(1);
  const Tensor a = oracle::random_tensor({5, 7}, rng), b = oracle::random_tensor({7, 3}, rng);
  const auto ref = oracle::matmul({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, 5, 7, 3);
  CHECK(oracle::max_abs_diff(ops::matmul(a, b).data(), ref) < 1e-12);
}

TEST_CASE("conv2d examples") {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({1, 4, 5}, rng);
  const Tensor doubled = ops::conv2d(x, Tensor(Shape{1, 1, 1, 1}, 2.0), Tensor(Shape{1}, 0.0), 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(doubled[i] == 2.0 * x[i]);

  const Tensor zeros(Shape{2, 6, 6});
  const Tensor bias(Shape{3}, std::vector<double>{0.5, -1.0, 2.0});
  const Tensor out = ops::conv2d(zeros, oracle::random_tensor({3, 2, 3, 3}, rng), bias, 1, 1);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 36; ++p) CHECK(out[c * 36 + p] == bias[c]);
}

TEST_CASE("conv2d matches the direct oracle, stride 1 and 2") {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({3, 8, 8}, rng);
  const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng), b = oracle::random_tensor({4}, rng);
  for (std::size_t stride : {1u, 2u}) {
    std::size_t ho = 0, wo = 0;
    const auto ref = oracle::conv2d({x.data().begin(), x.data().end()}, 3, 8, 8, {w.data().begin(), w.data().end()}, 4,
                                    3, {b.data().begin(), b.data().end()}, stride, 1, ho, wo);
    const Tensor got = ops::conv2d(x, w, b, stride, 1);
    CHECK(got.shape() == Shape{4, ho, wo});
    CHECK(oracle::max_abs_diff(got.data(), ref) < 1e-12);
  }
}

TEST_CASE("conv2d argument errors") {
  const Tensor x(Shape{1, 2, 2});
  CHECK_THROWS_AS(ops::conv2d(x, Tensor(Shape{1, 1, 5, 5}), Tensor(), 1, 0), DimensionError);
  CHECK_THROWS_AS(ops::conv2d(x, Tensor(Shape{1, 1, 2, 2}), Tensor(), 1, 0), DimensionError);
  CHECK_THROWS_AS(ops::conv2d(x, Tensor(Shape{1, 3, 1, 1}), Tensor(), 1, 0), DimensionError);
}

TEST_CASE("bilinear_sample examples") {
  std::mt19937_64 rng(4);
  const Tensor src = oracle::random_tensor({2, 3, 4}, rng);
  std::vector<double> c;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) c.push_back(y);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) c.push_back(x);
  const Tensor same = ops::bilinear_sample(src, Tensor(Shape{2, 3, 4}, c));
  CHECK(oracle::max_abs_diff(same.data(), src.data()) == 0.0);

  // v00 = 0 above v10 = 1; halfway down the column reads 0.5.
  const Tensor col(Shape{1, 2, 1}, std::vector<double>{0.0, 1.0});
  const Tensor mid = ops::bilinear_sample(col, Tensor(Shape{2, 1, 1}, std::vector<double>{0.5, 0.0}));
  CHECK(mid[0] == 0.5);
}

TEST_CASE("bilinear_sample zero policy outside the pixel-centre rectangle") {
  const Tensor src(Shape{1, 3, 3}, 7.0);
  const Tensor coords(Shape{2, 1, 4}, std::vector<double>{-0.01, 0.0, 2.0, 2.001, 1.0, -0.5, 2.0, 1.0});
  const Tensor out = ops::bilinear_sample(src, coords);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 7.0);
  CHECK(out[3] == 0.0);
}

TEST_CASE("bilinear_sample matches the hat-function oracle") {
  std::mt19937_64 rng(5);
  const Tensor src = oracle::random_tensor({3, 6, 7}, rng);
  const Tensor coords = oracle::random_tensor({2, 5, 5}, rng, -1.0, 7.5);
  CHECK(oracle::max_abs_diff(ops::bilinear_sample(src, coords).data(), oracle::bilinear_sample(src, coords)) < 1e-12);
}

TEST_CASE("softmax_rows examples and invariants") {
  const Tensor uni = ops::softmax_rows(Tensor(Shape{1, 4}, 2.5));
  for (double v : uni.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  const Tensor two = ops::softmax_rows(Tensor(Shape{1, 2}, std::vector<double>{0.0, std::log(3.0)}));
  CHECK(two[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.75).epsilon(1e-12));

  const std::vector<double> row{0.0, 1.0, 2.5, -3.0};
  std::vector<double> shifted;
  for (double v : row) shifted.push_back(v + 1e6);
  const Tensor a = ops::softmax_rows(Tensor(Shape{1, 4}, row));
  const Tensor b = ops::softmax_rows(Tensor(Shape{1, 4}, shifted));
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == b[i]);

  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_tensor({6, 9}, rng, -20.0, 20.0);
  const Tensor y = ops::softmax_rows(x);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(y[i * 9 + j] >= 0.0);
      s += y[i * 9 + j];
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  CHECK(oracle::max_abs_diff(y.data(), oracle::softmax_rows({x.data().begin(), x.data().end()}, 6, 9)) < 1e-12);
}

TEST_CASE("pointwise family") {
  CHECK(ops::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::relu(Tensor::scalar(-2.0)).item() == 0.0);
  std::mt19937_64 rng(7);
  const Tensor a = oracle::random_tensor({3, 2, 2}, rng), b = oracle::random_tensor({5, 2, 2}, rng);
  const Tensor cat = ops::concat_channels({a, b});
  CHECK(cat.dim(0) == 8);
  CHECK(oracle::max_abs_diff(ops::slice_channels(cat, 0, 3).data(), a.data()) == 0.0);
  CHECK(oracle::max_abs_diff(ops::slice_channels(cat, 3, 8).data(), b.data()) == 0.0);
  CHECK(ops::l1(a, a).item() == 0.0);
  CHECK(ops::mean(Tensor(Shape{4}, std::vector<double>{1, 2, 3, 6})).item() == 3.0);
  CHECK_THROWS_AS(ops::add(a, b), DimensionError);
  CHECK_THROWS_AS(ops::concat_channels({a, Tensor(Shape{1, 3, 2})}), DimensionError);
}

TEST_CASE("masked_l1_mean ignores invalid pixels and rejects empty masks") {
  const Tensor a(Shape{2, 1, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor b(Shape{2, 1, 3}, 0.0);
  CHECK(ops::masked_l1_mean(a, b, {1, 0, 1}).item() == doctest::Approx((1 + 4 + 3 + 6) / 2.0));
  CHECK_THROWS_AS(ops::masked_l1_mean(a, b, {0, 0, 0}), ArgumentError);
}

TEST_CASE("every op passes the finite-difference check") {
  for (const auto& c : gradcheck_ops(17)) {
    INFO(c.name << " error " << c.error);
    CHECK(c.pass());
  }
}
