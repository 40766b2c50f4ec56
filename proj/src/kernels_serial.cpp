// SPDX-License-Identifier: Apache-2.0
//
// Reference loop nests. Kept deliberately plain; the parallel versions are
// checked against these.
#include <algorithm>
#include <cmath>

#include "evflow/kernels.hpp"

namespace evflow::kernels {

namespace {

struct Corner {
  std::size_t i0, i1;
  double f;
};

Corner corner(double c, std::size_t n) {
  std::size_t i0 = static_cast<std::size_t>(std::floor(c));
  if (n >= 2 && i0 > n - 2) i0 = n - 2;
  if (n < 2) i0 = 0;
  const std::size_t i1 = n >= 2 ? i0 + 1 : i0;
  return {i0, i1, c - static_cast<double>(i0)};
}

bool inside(double y, double x, std::size_t h, std::size_t w) {
  return y >= 0.0 && x >= 0.0 && y <= static_cast<double>(h - 1) && x <= static_cast<double>(w - 1);
}

}  // namespace

BilinearTap bilinear_tap(const double* map, std::size_t h, std::size_t w, double y, double x) {
  if (!inside(y, x, h, w)) return {};
  const Corner cy = corner(y, h);
  const Corner cx = corner(x, w);
  const double v00 = map[cy.i0 * w + cx.i0];
  const double v01 = map[cy.i0 * w + cx.i1];
  const double v10 = map[cy.i1 * w + cx.i0];
  const double v11 = map[cy.i1 * w + cx.i1];
  BilinearTap t;
  t.value = (1 - cy.f) * ((1 - cx.f) * v00 + cx.f * v01) + cy.f * ((1 - cx.f) * v10 + cx.f * v11);
  t.d_dy = (1 - cx.f) * (v10 - v00) + cx.f * (v11 - v01);
  t.d_dx = (1 - cy.f) * (v01 - v00) + cy.f * (v11 - v10);
  return t;
}

void bilinear_scatter(double* map, std::size_t h, std::size_t w, double y, double x, double g) {
  if (!inside(y, x, h, w)) return;
  const Corner cy = corner(y, h);
  const Corner cx = corner(x, w);
  map[cy.i0 * w + cx.i0] += g * (1 - cy.f) * (1 - cx.f);
  map[cy.i0 * w + cx.i1] += g * (1 - cy.f) * cx.f;
  map[cy.i1 * w + cx.i0] += g * cy.f * (1 - cx.f);
  map[cy.i1 * w + cx.i1] += g * cy.f * cx.f;
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[l * m + i] * b[l * n + j];
      c[i * n + j] += s;
    }
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[j * k + l];
      c[i * n + j] += s;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double s = bias.empty() ? 0.0 : bias[co];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              s += w[((co * g.in_channels + ci) * k + ky) * k + kx] *
                   x[(ci * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)];
            }
          }
        }
        out[(co * ho + oy) * wo + ox] = s;
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gout, std::span<double> gx, std::span<double> gw,
                     std::span<double> gb) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double go = gout[(co * ho + oy) * wo + ox];
        if (!gb.empty()) gb[co] += go;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              const std::size_t wi = ((co * g.in_channels + ci) * k + ky) * k + kx;
              const std::size_t xi =
                  (ci * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix);
              if (!gw.empty()) gw[wi] += go * x[xi];
              if (!gx.empty()) gx[xi] += go * w[wi];
            }
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
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < po; ++p) {
      out[ch * po + p] = bilinear_tap(src.data() + ch * h * w, h, w, coords[p], coords[po + p]).value;
    }
  }
}

void bilinear_backward(std::span<const double> src, std::size_t c, std::size_t h, std::size_t w,
                       std::span<const double> coords, std::size_t ho, std::size_t wo,
                       std::span<const double> gout, std::span<double> gsrc,
                       std::span<double> gcoords) {
  const std::size_t po = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < po; ++p) {
      const double y = coords[p], x = coords[po + p], go = gout[ch * po + p];
      if (!gsrc.empty()) bilinear_scatter(gsrc.data() + ch * h * w, h, w, y, x, go);
      if (!gcoords.empty()) {
        const BilinearTap t = bilinear_tap(src.data() + ch * h * w, h, w, y, x);
        gcoords[p] += go * t.d_dy;
        gcoords[po + p] += go * t.d_dx;
      }
    }
  }
}

void lookup_forward(const LookupGeometry& g, std::span<const double> corr,
                    std::span<const double> flow, std::span<double> out) {
  const std::size_t P = g.height * g.width;
  for (std::size_t py = 0; py < g.height; ++py) {
    for (std::size_t px = 0; px < g.width; ++px) {
      const std::size_t p = py * g.width + px;
      const double cx = static_cast<double>(px) + g.flow_scale * flow[p];
      const double cy = static_cast<double>(py) + g.flow_scale * flow[P + p];
      std::size_t tap = 0;
      for (int dy = -g.radius; dy <= g.radius; ++dy) {
        for (int dx = -g.radius; dx <= g.radius; ++dx, ++tap) {
          out[tap * P + p] = bilinear_tap(corr.data() + p * P, g.height, g.width, cy + dy, cx + dx).value;
        }
      }
    }
  }
}

void lookup_backward(const LookupGeometry& g, std::span<const double> corr,
                     std::span<const double> flow, std::span<const double> gout,
                     std::span<double> gcorr, std::span<double> gflow) {
  const std::size_t P = g.height * g.width;
  for (std::size_t py = 0; py < g.height; ++py) {
    for (std::size_t px = 0; px < g.width; ++px) {
      const std::size_t p = py * g.width + px;
      const double cx = static_cast<double>(px) + g.flow_scale * flow[p];
      const double cy = static_cast<double>(py) + g.flow_scale * flow[P + p];
      std::size_t tap = 0;
      for (int dy = -g.radius; dy <= g.radius; ++dy) {
        for (int dx = -g.radius; dx <= g.radius; ++dx, ++tap) {
          const double go = gout[tap * P + p];
          if (!gcorr.empty()) bilinear_scatter(gcorr.data() + p * P, g.height, g.width, cy + dy, cx + dx, go);
          if (!gflow.empty()) {
            const BilinearTap t = bilinear_tap(corr.data() + p * P, g.height, g.width, cy + dy, cx + dx);
            gflow[p] += go * g.flow_scale * t.d_dx;
            gflow[P + p] += go * g.flow_scale * t.d_dy;
          }
        }
      }
    }
  }
}

void softmax_rows(std::span<const double> x, std::size_t m, std::size_t n, std::span<double> y) {
  for (std::size_t i = 0; i < m; ++i) {
    double mx = x[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp(x[i * n + j] - mx);
      s += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
}

void softmax_rows_backward(std::span<const double> y, std::span<const double> gout, std::size_t m,
                           std::size_t n, std::span<double> gx) {
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += gout[i * n + j] * y[i * n + j];
    for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (gout[i * n + j] - dot);
  }
}

}  // namespace serial
}  // namespace evflow::kernels
