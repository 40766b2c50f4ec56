// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "evflow/correlation.hpp"
#include "evflow/error.hpp"
#include "evflow/ops.hpp"
#include "oracles.hpp"

using namespace evflow;

namespace {

CorrelationVolume random_volume(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return {oracle::random_tensor({h * w, h * w}, rng), h, w};
}

}  // namespace

TEST_CASE("guide correlation examples") {
  // Two pixels with orthonormal features e1, e2.
  const Tensor f(Shape{2, 1, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  const CorrelationVolume c = build_guide_corr(f, f);
  CHECK(c.height == 1);
  CHECK(c.width == 2);
  CHECK(c.matrix.at(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(c.matrix.at(1, 1) == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(c.matrix.at(0, 1) == 0.0);

  std::mt19937_64 rng(1);
  const Tensor a = oracle::random_tensor({6, 4, 4}, rng), b = oracle::random_tensor({6, 4, 4}, rng);
  const CorrelationVolume r = build_guide_corr(a, b);
  CHECK(oracle::max_abs_diff(r.matrix.data(), oracle::correlation(a, b)) < 1e-12);
  const CorrelationVolume scaled = build_guide_corr(a, ops::scale(b, 3.0));
  for (std::size_t i = 0; i < r.matrix.numel(); ++i) CHECK(std::abs(scaled.matrix[i] - 3.0 * r.matrix[i]) < 1e-12);

  CHECK_THROWS_AS(build_guide_corr(a, Tensor(Shape{6, 4, 3})), DimensionError);
  CHECK_THROWS_AS(build_guide_corr(a, Tensor(Shape{5, 4, 4})), DimensionError);
}

TEST_CASE("temporal correlation") {
  std::mt19937_64 rng(2);
  const Tensor ref = oracle::random_tensor({4, 3, 3}, rng);
  std::vector<Tensor> targets;
  for (int i = 0; i < 5; ++i) targets.push_back(oracle::random_tensor({4, 3, 3}, rng));
  const auto t = build_temporal_corr(ref, targets);
  REQUIRE(t.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(oracle::max_abs_diff(t[i].matrix.data(), oracle::correlation(ref, targets[i])) < 1e-12);

  const auto one = build_temporal_corr(ref, {targets[0]});
  CHECK(oracle::max_abs_diff(one[0].matrix.data(), build_guide_corr(ref, targets[0]).matrix.data()) == 0.0);
  const auto dup = build_temporal_corr(ref, {targets[1], targets[1]});
  CHECK(oracle::max_abs_diff(dup[0].matrix.data(), dup[1].matrix.data()) == 0.0);
  CHECK_THROWS_AS(build_temporal_corr(ref, {Tensor(Shape{4, 3, 2})}), DimensionError);
}

TEST_CASE("lookup examples") {
  std::mt19937_64 rng(3);
  const CorrelationVolume c = random_volume(4, 5, rng);
  const std::size_t P = 20;

  const Tensor zero(Shape{2, 4, 5});
  const Tensor diag = lookup(c, zero, 0);
  CHECK(diag.shape() == Shape{1, 4, 5});
  for (std::size_t p = 0; p < P; ++p) CHECK(diag[p] == c.matrix.at(p, p));

  // Integer flow (u, v) = (1, -1): exact entries at the target pixel.
  Tensor flow(Shape{2, 4, 5});
  for (std::size_t p = 0; p < P; ++p) {
    flow.mutable_data()[p] = 1.0;
    flow.mutable_data()[P + p] = -1.0;
  }
  const Tensor v = lookup(c, flow, 1);
  for (std::size_t y = 1; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const std::size_t p = y * 5 + x;
      CHECK(v[4 * P + p] == c.matrix.at(p, (y - 1) * 5 + x + 1));  // centre tap
    }
  // Row 0 looks at y = -1 on its centre tap: out of bounds.
  CHECK(v[4 * P + 2] == 0.0);
  CHECK_THROWS_AS(lookup(c, flow, -1), ArgumentError);
  CHECK_THROWS_AS(lookup(c, Tensor(Shape{2, 4, 4}), 1), DimensionError);
}

TEST_CASE("lookup matches oracle, centre channel and linearity") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const CorrelationVolume c = random_volume(4, 4, rng);
    Tensor flow(Shape{2, 4, 4});
    for (auto& x : flow.mutable_data()) x = d(rng);
    const int r = trial % 3;
    const Tensor out = lookup(c, flow, r);
    const std::vector<double> corr(c.matrix.data().begin(), c.matrix.data().end());
    CHECK(oracle::max_abs_diff(out.data(), oracle::lookup(corr, 4, 4, flow, r, 1.0)) < 1e-12);

    const std::size_t taps = static_cast<std::size_t>((2 * r + 1) * (2 * r + 1));
    const Tensor centre = lookup(c, flow, 0);
    for (std::size_t p = 0; p < 16; ++p) CHECK(out[(taps / 2) * 16 + p] == centre[p]);

    const CorrelationVolume c2 = random_volume(4, 4, rng);
    const CorrelationVolume sum{ops::add(ops::scale(c.matrix, 2.0), c2.matrix), 4, 4};
    const Tensor ls = lookup(sum, flow, r), l2 = lookup(c2, flow, r);
    for (std::size_t i = 0; i < ls.numel(); ++i) CHECK(std::abs(ls[i] - (2.0 * out[i] + l2[i])) < 1e-12);

    const Tensor lazy = lookup_lazy(oracle::random_tensor({3, 4, 4}, rng), oracle::random_tensor({3, 4, 4}, rng), flow, r);
    CHECK(lazy.shape() == out.shape());
  }
}

TEST_CASE("lazy lookup equals dense lookup bitwise") {
  std::mt19937_64 rng(5);
  const Tensor a = oracle::random_tensor({8, 4, 6}, rng), b = oracle::random_tensor({8, 4, 6}, rng);
  const Tensor flow = oracle::random_tensor({2, 4, 6}, rng, -4.0, 4.0);
  const Tensor dense = lookup(build_guide_corr(a, b), flow, 2, 0.6);
  const Tensor lazy = lookup_lazy(a, b, flow, 2, 0.6);
  CHECK(oracle::max_abs_diff(dense.data(), lazy.data()) == 0.0);
}

TEST_CASE("linear lookup") {
  std::mt19937_64 rng(6);
  std::vector<CorrelationVolume> t;
  for (int i = 0; i < 5; ++i) t.push_back(random_volume(3, 12, rng));
  const Tensor flow = oracle::random_tensor({2, 3, 12}, rng, -2.0, 2.0);

  CHECK(oracle::max_abs_diff(linear_lookup(t, flow, 5, 5, 2).data(), lookup(t[4], flow, 2).data()) == 0.0);
  for (std::size_t i = 1; i <= 5; ++i) {
    const std::vector<double> corr(t[i - 1].matrix.data().begin(), t[i - 1].matrix.data().end());
    CHECK(oracle::max_abs_diff(linear_lookup(t, flow, i, 5, 1).data(),
                               oracle::lookup(corr, 3, 12, flow, 1, static_cast<double>(i) / 5.0)) < 1e-12);
  }

  // f = (10, 0), i = 2 of 5: the centre tap reads the pixel 4 columns right.
  Tensor ten(Shape{2, 3, 12});
  for (std::size_t p = 0; p < 36; ++p) ten.mutable_data()[p] = 10.0;
  const Tensor v = linear_lookup(t, ten, 2, 5, 0);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x + 4 < 12; ++x) CHECK(v[y * 12 + x] == t[1].matrix.at(y * 12 + x, y * 12 + x + 4));

  CHECK_THROWS_AS(linear_lookup(t, flow, 0, 5, 1), ArgumentError);
  CHECK_THROWS_AS(linear_lookup(t, flow, 6, 5, 1), ArgumentError);
}
