// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels. Work is split over independent output rows/channels/pixels
// with static schedules; reductions that cross the split are never shared.
#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evflow/kernels.hpp"

namespace evflow::kernels {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

namespace {

using idx = std::ptrdiff_t;

// Column matrix of shape (Cin*k*k) x (Ho*Wo).
std::vector<double> im2col(const ConvGeometry& g, std::span<const double> x) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t rows = g.in_channels * k * k, cols = ho * wo;
  std::vector<double> col(rows * cols, 0.0);
#pragma omp parallel for schedule(static)
  for (idx r = 0; r < static_cast<idx>(rows); ++r) {
    const std::size_t ci = static_cast<std::size_t>(r) / (k * k);
    const std::size_t ky = (static_cast<std::size_t>(r) / k) % k;
    const std::size_t kx = static_cast<std::size_t>(r) % k;
    double* dst = col.data() + static_cast<std::size_t>(r) * cols;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
      if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
      const double* src = x.data() + (ci * g.height + static_cast<std::size_t>(iy)) * g.width;
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
        if (ix >= 0 && ix < static_cast<long>(g.width)) dst[oy * wo + ox] = src[ix];
      }
    }
  }
  return col;
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    double* ci = c.data() + static_cast<std::size_t>(i) * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a.data() + static_cast<std::size_t>(i) * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ai[l];
      const double* bl = b.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    double* ci = c.data() + static_cast<std::size_t>(i) * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[l * m + static_cast<std::size_t>(i)];
      if (av == 0.0) continue;
      const double* bl = b.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    const double* ai = a.data() + static_cast<std::size_t>(i) * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += ai[l] * bj[l];
      c[static_cast<std::size_t>(i) * n + j] += s;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t cols = g.out_height() * g.out_width();
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  if (g.kernel == 1 && g.stride == 1 && g.pad == 0) {
    matmul(w, x, out, g.out_channels, rows, cols);
  } else {
    const std::vector<double> col = im2col(g, x);
    matmul(w, col, out, g.out_channels, rows, cols);
  }
  if (bias.empty()) return;
#pragma omp parallel for schedule(static)
  for (idx co = 0; co < static_cast<idx>(g.out_channels); ++co) {
    double* o = out.data() + static_cast<std::size_t>(co) * cols;
    const double b = bias[static_cast<std::size_t>(co)];
    for (std::size_t p = 0; p < cols; ++p) o[p] += b;
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gout, std::span<double> gx, std::span<double> gw,
                     std::span<double> gb) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t cols = ho * wo, rows = g.in_channels * k * k;
  const bool pointwise = k == 1 && g.stride == 1 && g.pad == 0;

  if (!gb.empty()) {
#pragma omp parallel for schedule(static)
    for (idx co = 0; co < static_cast<idx>(g.out_channels); ++co) {
      const double* go = gout.data() + static_cast<std::size_t>(co) * cols;
      double s = 0.0;
      for (std::size_t p = 0; p < cols; ++p) s += go[p];
      gb[static_cast<std::size_t>(co)] += s;
    }
  }
  if (!gw.empty()) {
    if (pointwise) {
      matmul_nt_acc(gout, x, gw, g.out_channels, cols, rows);
    } else {
      const std::vector<double> col = im2col(g, x);
      matmul_nt_acc(gout, col, gw, g.out_channels, cols, rows);
    }
  }
  if (gx.empty()) return;
  if (pointwise) {
    matmul_tn_acc(w, gout, gx, rows, g.out_channels, cols);
    return;
  }
  std::vector<double> gcol(rows * cols, 0.0);
  matmul_tn_acc(w, gout, gcol, rows, g.out_channels, cols);
  // col2im: each input channel gathers from its own k*k rows only.
#pragma omp parallel for schedule(static)
  for (idx ci = 0; ci < static_cast<idx>(g.in_channels); ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = gcol.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          double* dst = gx.data() + (static_cast<std::size_t>(ci) * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.width)) dst[ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

void bilinear_forward(std::span<const double> src, std::size_t c, std::size_t h, std::size_t w,
                      std::span<const double> coords, std::size_t ho, std::size_t wo,
                      std::span<double> out) {
  const std::size_t po = ho * wo;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(po); ++p) {
    const double y = coords[static_cast<std::size_t>(p)], x = coords[po + static_cast<std::size_t>(p)];
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[ch * po + static_cast<std::size_t>(p)] = bilinear_tap(src.data() + ch * h * w, h, w, y, x).value;
    }
  }
}

void bilinear_backward(std::span<const double> src, std::size_t c, std::size_t h, std::size_t w,
                       std::span<const double> coords, std::size_t ho, std::size_t wo,
                       std::span<const double> gout, std::span<double> gsrc,
                       std::span<double> gcoords) {
  const std::size_t po = ho * wo;
  if (!gsrc.empty()) {
    // Scatter targets overlap between output pixels, so split over channels.
#pragma omp parallel for schedule(static)
    for (idx ch = 0; ch < static_cast<idx>(c); ++ch) {
      double* map = gsrc.data() + static_cast<std::size_t>(ch) * h * w;
      for (std::size_t p = 0; p < po; ++p) {
        bilinear_scatter(map, h, w, coords[p], coords[po + p], gout[static_cast<std::size_t>(ch) * po + p]);
      }
    }
  }
  if (!gcoords.empty()) {
#pragma omp parallel for schedule(static)
    for (idx p = 0; p < static_cast<idx>(po); ++p) {
      const std::size_t q = static_cast<std::size_t>(p);
      double gy = 0.0, gxv = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const BilinearTap t = bilinear_tap(src.data() + ch * h * w, h, w, coords[q], coords[po + q]);
        gy += gout[ch * po + q] * t.d_dy;
        gxv += gout[ch * po + q] * t.d_dx;
      }
      gcoords[q] += gy;
      gcoords[po + q] += gxv;
    }
  }
}

void lookup_forward(const LookupGeometry& g, std::span<const double> corr,
                    std::span<const double> flow, std::span<double> out) {
  const std::size_t P = g.height * g.width;
#pragma omp parallel for schedule(static)
  for (idx pi = 0; pi < static_cast<idx>(P); ++pi) {
    const std::size_t p = static_cast<std::size_t>(pi);
    const double cx = static_cast<double>(p % g.width) + g.flow_scale * flow[p];
    const double cy = static_cast<double>(p / g.width) + g.flow_scale * flow[P + p];
    const double* row = corr.data() + p * P;
    std::size_t tap = 0;
    for (int dy = -g.radius; dy <= g.radius; ++dy) {
      for (int dx = -g.radius; dx <= g.radius; ++dx, ++tap) {
        out[tap * P + p] = bilinear_tap(row, g.height, g.width, cy + dy, cx + dx).value;
      }
    }
  }
}

void lookup_backward(const LookupGeometry& g, std::span<const double> corr,
                     std::span<const double> flow, std::span<const double> gout,
                     std::span<double> gcorr, std::span<double> gflow) {
  const std::size_t P = g.height * g.width;
  // Each source pixel owns one row of the correlation matrix and one flow
  // vector, so the split over pixels is race free.
#pragma omp parallel for schedule(static)
  for (idx pi = 0; pi < static_cast<idx>(P); ++pi) {
    const std::size_t p = static_cast<std::size_t>(pi);
    const double cx = static_cast<double>(p % g.width) + g.flow_scale * flow[p];
    const double cy = static_cast<double>(p / g.width) + g.flow_scale * flow[P + p];
    const double* row = corr.data() + p * P;
    double gu = 0.0, gv = 0.0;
    std::size_t tap = 0;
    for (int dy = -g.radius; dy <= g.radius; ++dy) {
      for (int dx = -g.radius; dx <= g.radius; ++dx, ++tap) {
        const double go = gout[tap * P + p];
        if (go == 0.0) continue;
        if (!gcorr.empty()) bilinear_scatter(gcorr.data() + p * P, g.height, g.width, cy + dy, cx + dx, go);
        if (!gflow.empty()) {
          const BilinearTap t = bilinear_tap(row, g.height, g.width, cy + dy, cx + dx);
          gu += go * t.d_dx;
          gv += go * t.d_dy;
        }
      }
    }
    if (!gflow.empty()) {
      gflow[p] += g.flow_scale * gu;
      gflow[P + p] += g.flow_scale * gv;
    }
  }
}

void softmax_rows(std::span<const double> x, std::size_t m, std::size_t n, std::span<double> y) {
#pragma omp parallel for schedule(static)
  for (idx ii = 0; ii < static_cast<idx>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double* xi = x.data() + i * n;
    double* yi = y.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      s += yi[j];
    }
    for (std::size_t j = 0; j < n; ++j) yi[j] /= s;
  }
}

void softmax_rows_backward(std::span<const double> y, std::span<const double> gout, std::size_t m,
                           std::size_t n, std::span<double> gx) {
#pragma omp parallel for schedule(static)
  for (idx ii = 0; ii < static_cast<idx>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += gout[i * n + j] * y[i * n + j];
    for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (gout[i * n + j] - dot);
  }
}

}  // namespace parallel
}  // namespace evflow::kernels
