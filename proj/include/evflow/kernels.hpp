// SPDX-License-Identifier: Apache-2.0
//
// Raw numeric kernels behind the differentiable ops.
//
// Every kernel exists twice: `serial` is the plain loop nest kept as the
// reference, `parallel` is the OpenMP version the ops dispatch to. Parallel
// kernels split work only over independent outputs, so each output element
// is produced by a fixed summation order regardless of the thread count.
#pragma once

#include <cstddef>
#include <span>

namespace evflow::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

/// Correlation lookup geometry: a (P x P) matrix whose rows are maps of
/// `height` x `width` target pixels, P = height * width.
struct LookupGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  int radius = 0;
  double flow_scale = 1.0;

  std::size_t taps() const { return static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)); }
};

/// Bilinear read of a single-channel map with the zero out-of-bounds policy.
/// Coordinates outside [0, h-1] x [0, w-1] read as 0 with zero derivative.
struct BilinearTap {
  double value = 0.0;
  double d_dy = 0.0;
  double d_dx = 0.0;
};

BilinearTap bilinear_tap(const double* map, std::size_t h, std::size_t w, double y, double x);

/// Adds `g` into the four neighbours of (y, x) with bilinear weights.
void bilinear_scatter(double* map, std::size_t h, std::size_t w, double y, double x, double g);

#define EVFLOW_KERNEL_SET                                                                       \
  /* c[m x n] = a[m x k] * b[k x n] */                                                          \
  void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,         \
              std::size_t m, std::size_t k, std::size_t n);                                      \
  /* c[m x n] += a[k x m]^T * b[k x n] */                                                        \
  void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,  \
                     std::size_t m, std::size_t k, std::size_t n);                               \
  /* c[m x n] += a[m x k] * b[n x k]^T */                                                        \
  void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,  \
                     std::size_t m, std::size_t k, std::size_t n);                               \
  void conv2d_forward(const ConvGeometry& g, std::span<const double> x,                         \
                      std::span<const double> w, std::span<const double> bias,                  \
                      std::span<double> out);                                                   \
  /* accumulates into gx, gw, gb; any of them may be empty to skip */                           \
  void conv2d_backward(const ConvGeometry& g, std::span<const double> x,                        \
                       std::span<const double> w, std::span<const double> gout,                 \
                       std::span<double> gx, std::span<double> gw, std::span<double> gb);       \
  /* src C x H x W, coords 2 x Ho x Wo holding (y, x) */                                         \
  void bilinear_forward(std::span<const double> src, std::size_t c, std::size_t h,              \
                        std::size_t w, std::span<const double> coords, std::size_t ho,          \
                        std::size_t wo, std::span<double> out);                                 \
  void bilinear_backward(std::span<const double> src, std::size_t c, std::size_t h,             \
                         std::size_t w, std::span<const double> coords, std::size_t ho,         \
                         std::size_t wo, std::span<const double> gout, std::span<double> gsrc,  \
                         std::span<double> gcoords);                                            \
  /* corr P x P, flow 2 x H x W holding (u, v), out taps x H x W */                              \
  void lookup_forward(const LookupGeometry& g, std::span<const double> corr,                    \
                      std::span<const double> flow, std::span<double> out);                     \
  void lookup_backward(const LookupGeometry& g, std::span<const double> corr,                   \
                       std::span<const double> flow, std::span<const double> gout,              \
                       std::span<double> gcorr, std::span<double> gflow);                       \
  void softmax_rows(std::span<const double> x, std::size_t m, std::size_t n,                    \
                    std::span<double> y);                                                       \
  /* gx += J^T gout using the softmax output y */                                               \
  void softmax_rows_backward(std::span<const double> y, std::span<const double> gout,           \
                             std::size_t m, std::size_t n, std::span<double> gx);

namespace serial {
EVFLOW_KERNEL_SET
}  // namespace serial

namespace parallel {
EVFLOW_KERNEL_SET
}  // namespace parallel

#undef EVFLOW_KERNEL_SET

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int thread_count();

}  // namespace evflow::kernels
