// SPDX-License-Identifier: Apache-2.0
//
// The OpenMP kernels against the serial reference, bit for bit.
#include <doctest.h>
#include <omp.h>

#include "evflow/kernels.hpp"
#include "oracles.hpp"

using namespace evflow;
namespace k = evflow::kernels;

namespace {

std::vector<double> vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void with_threads(int n, const std::function<void()>& f) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(n);
  f();
  omp_set_num_threads(saved);
}

}  // namespace

TEST_CASE("matmul variants agree bitwise") {
  std::mt19937_64 rng(1);
  for (int threads : {1, 3}) {
    with_threads(threads, [&] {
      const std::size_t m = 7, kk = 11, n = 5;
      const auto a = vec(m * kk, rng), b = vec(kk * n, rng), at = vec(kk * m, rng), bt = vec(n * kk, rng);
      std::vector<double> c1(m * n), c2(m * n);
      k::serial::matmul(a, b, c1, m, kk, n);
      k::parallel::matmul(a, b, c2, m, kk, n);
      CHECK(c1 == c2);
      std::vector<double> d1(m * n, 0.5), d2(m * n, 0.5);
      k::serial::matmul_tn_acc(at, b, d1, m, kk, n);
      k::parallel::matmul_tn_acc(at, b, d2, m, kk, n);
      CHECK(oracle::max_abs_diff(d1, d2) < 1e-12);
      std::vector<double> e1(m * n, 0.25), e2(m * n, 0.25);
      k::serial::matmul_nt_acc(a, bt, e1, m, kk, n);
      k::parallel::matmul_nt_acc(a, bt, e2, m, kk, n);
      CHECK(oracle::max_abs_diff(e1, e2) < 1e-12);
    });
  }
}

TEST_CASE("conv2d forward and backward: parallel vs serial") {
  std::mt19937_64 rng(2);
  for (const k::ConvGeometry g : {k::ConvGeometry{3, 9, 7, 4, 3, 1, 1}, k::ConvGeometry{2, 8, 8, 5, 3, 2, 1},
                                  k::ConvGeometry{6, 4, 4, 3, 1, 1, 0}}) {
    const auto x = vec(g.in_channels * g.height * g.width, rng);
    const auto w = vec(g.out_channels * g.in_channels * g.kernel * g.kernel, rng);
    const auto b = vec(g.out_channels, rng);
    const std::size_t no = g.out_channels * g.out_height() * g.out_width();
    std::vector<double> o1(no), o2(no);
    k::serial::conv2d_forward(g, x, w, b, o1);
    k::parallel::conv2d_forward(g, x, w, b, o2);
    CHECK(oracle::max_abs_diff(o1, o2) < 1e-12);

    const auto go = vec(no, rng);
    std::vector<double> gx1(x.size()), gw1(w.size()), gb1(b.size()), gx2(x.size()), gw2(w.size()), gb2(b.size());
    k::serial::conv2d_backward(g, x, w, go, gx1, gw1, gb1);
    k::parallel::conv2d_backward(g, x, w, go, gx2, gw2, gb2);
    CHECK(oracle::max_abs_diff(gx1, gx2) < 1e-12);
    CHECK(oracle::max_abs_diff(gw1, gw2) < 1e-12);
    CHECK(oracle::max_abs_diff(gb1, gb2) < 1e-12);
  }
}

TEST_CASE("bilinear and lookup kernels: parallel vs serial") {
  std::mt19937_64 rng(3);
  const std::size_t c = 3, h = 5, w = 6, ho = 4, wo = 4;
  const auto src = vec(c * h * w, rng);
  const auto coords = vec(2 * ho * wo, rng, -1.0, 6.0);
  std::vector<double> o1(c * ho * wo), o2(c * ho * wo);
  k::serial::bilinear_forward(src, c, h, w, coords, ho, wo, o1);
  k::parallel::bilinear_forward(src, c, h, w, coords, ho, wo, o2);
  CHECK(o1 == o2);
  const auto go = vec(o1.size(), rng);
  std::vector<double> gs1(src.size()), gc1(coords.size()), gs2(src.size()), gc2(coords.size());
  k::serial::bilinear_backward(src, c, h, w, coords, ho, wo, go, gs1, gc1);
  k::parallel::bilinear_backward(src, c, h, w, coords, ho, wo, go, gs2, gc2);
  CHECK(oracle::max_abs_diff(gs1, gs2) < 1e-12);
  CHECK(oracle::max_abs_diff(gc1, gc2) < 1e-12);

  const k::LookupGeometry lg{4, 5, 2, 0.6};
  const std::size_t p = 20;
  const auto corr = vec(p * p, rng);
  const auto flow = vec(2 * p, rng, -3.0, 3.0);
  std::vector<double> l1(lg.taps() * p), l2(lg.taps() * p);
  k::serial::lookup_forward(lg, corr, flow, l1);
  k::parallel::lookup_forward(lg, corr, flow, l2);
  CHECK(l1 == l2);
  const auto gl = vec(l1.size(), rng);
  std::vector<double> gcr1(corr.size()), gf1(flow.size()), gcr2(corr.size()), gf2(flow.size());
  k::serial::lookup_backward(lg, corr, flow, gl, gcr1, gf1);
  k::parallel::lookup_backward(lg, corr, flow, gl, gcr2, gf2);
  CHECK(oracle::max_abs_diff(gcr1, gcr2) < 1e-12);
  CHECK(oracle::max_abs_diff(gf1, gf2) < 1e-12);
}

TEST_CASE("softmax kernels: parallel vs serial") {
  std::mt19937_64 rng(4);
  const auto x = vec(5 * 8, rng, -5.0, 5.0);
  std::vector<double> y1(x.size()), y2(x.size());
  k::serial::softmax_rows(x, 5, 8, y1);
  k::parallel::softmax_rows(x, 5, 8, y2);
  CHECK(y1 == y2);
  const auto g = vec(x.size(), rng);
  std::vector<double> g1(x.size()), g2(x.size());
  k::serial::softmax_rows_backward(y1, g, 5, 8, g1);
  k::parallel::softmax_rows_backward(y1, g, 5, 8, g2);
  CHECK(g1 == g2);
}

TEST_CASE("parallel results do not depend on the thread count") {
  std::mt19937_64 rng(5);
  const k::ConvGeometry g{4, 10, 10, 6, 3, 1, 1};
  const auto x = vec(g.in_channels * 100, rng), w = vec(6 * 4 * 9, rng), b = vec(6, rng);
  std::vector<double> ref(6 * 100), out(6 * 100);
  with_threads(1, [&] { k::parallel::conv2d_forward(g, x, w, b, ref); });
  with_threads(4, [&] { k::parallel::conv2d_forward(g, x, w, b, out); });
  CHECK(ref == out);
}
