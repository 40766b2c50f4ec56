// SPDX-License-Identifier: Apache-2.0
#include "evflow/correlation.hpp"

#include <cmath>

#include "evflow/error.hpp"
#include "evflow/kernels.hpp"
#include "evflow/ops.hpp"

namespace evflow {

namespace {

void require_feature_map(const Tensor& f, const char* what) {
  if (f.rank() != 3) throw DimensionError(std::string(what) + ": expected D x H x W, got " + shape_str(f.shape()));
}

}  // namespace

CorrelationVolume build_guide_corr(const Tensor& f1, const Tensor& f2) {
  require_feature_map(f1, "build_guide_corr");
  require_feature_map(f2, "build_guide_corr");
  if (f1.shape() != f2.shape()) {
    throw DimensionError("build_guide_corr: feature shapes differ " + shape_str(f1.shape()) + " vs " +
                         shape_str(f2.shape()));
  }
  const std::size_t d = f1.dim(0), h = f1.dim(1), w = f1.dim(2);
  const Tensor a = ops::transpose(ops::reshape(f1, Shape{d, h * w}));
  const Tensor b = ops::reshape(f2, Shape{d, h * w});
  return {ops::scale(ops::matmul(a, b), 1.0 / std::sqrt(static_cast<double>(d))), h, w};
}

std::vector<CorrelationVolume> build_temporal_corr(const Tensor& reference, const std::vector<Tensor>& targets) {
  std::vector<CorrelationVolume> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(build_guide_corr(reference, t));
  return out;
}

Tensor lookup(const CorrelationVolume& corr, const Tensor& flow, int radius, double flow_scale) {
  if (radius < 0) throw ArgumentError("lookup radius must be >= 0");
  const std::size_t P = corr.height * corr.width;
  if (corr.matrix.rank() != 2 || corr.matrix.dim(0) != P || corr.matrix.dim(1) != P) {
    throw DimensionError("lookup: correlation matrix does not match its grid");
  }
  if (flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != corr.height || flow.dim(2) != corr.width) {
    throw DimensionError("lookup: flow " + shape_str(flow.shape()) + " does not match correlation grid");
  }
  kernels::LookupGeometry g{corr.height, corr.width, radius, flow_scale};
  std::vector<double> out(g.taps() * P);
  kernels::parallel::lookup_forward(g, corr.matrix.data(), flow.data(), out);
  const Tensor m = corr.matrix;
  return Tensor::make_result(Shape{g.taps(), corr.height, corr.width}, std::move(out), {m, flow},
                             [m, flow, g](std::span<const double> grad) {
                               kernels::parallel::lookup_backward(
                                   g, m.data(), flow.data(), grad, needs_grad(m) ? grad_buffer(m) : std::span<double>{},
                                   needs_grad(flow) ? grad_buffer(flow) : std::span<double>{});
                             });
}

Tensor linear_lookup(const std::vector<CorrelationVolume>& temporal, const Tensor& flow, std::size_t i, std::size_t n,
                     int radius) {
  if (i < 1 || i > n || n > temporal.size()) throw ArgumentError("linear_lookup: target index out of range");
  return lookup(temporal[i - 1], flow, radius, static_cast<double>(i) / static_cast<double>(n));
}

Tensor lookup_lazy(const Tensor& f1, const Tensor& f2, const Tensor& flow, int radius, double flow_scale) {
  require_feature_map(f1, "lookup_lazy");
  if (f1.shape() != f2.shape()) throw DimensionError("lookup_lazy: feature shapes differ");
  const std::size_t d = f1.dim(0), h = f1.dim(1), w = f1.dim(2), P = h * w;
  if (flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != h || flow.dim(2) != w) {
    throw DimensionError("lookup_lazy: flow does not match feature grid");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const auto a = f1.data(), b = f2.data(), fl = flow.data();
  kernels::LookupGeometry g{h, w, radius, flow_scale};
  std::vector<double> out(g.taps() * P, 0.0);
  // Same accumulation order as the dense matmul path: ascending channel.
  auto entry = [&](std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += a[c * P + p] * b[c * P + q];
    return s * inv;
  };
  for (std::size_t p = 0; p < P; ++p) {
    const double cx = static_cast<double>(p % w) + flow_scale * fl[p];
    const double cy = static_cast<double>(p / w) + flow_scale * fl[P + p];
    std::size_t tap = 0;
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx, ++tap) {
        const double y = cy + dy, x = cx + dx;
        if (y < 0.0 || x < 0.0 || y > static_cast<double>(h - 1) || x > static_cast<double>(w - 1)) continue;
        // Only the 2x2 neighbourhood the bilinear tap reads is evaluated.
        double patch[4];
        std::size_t y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
        if (h >= 2 && y0 > h - 2) y0 = h - 2;
        if (w >= 2 && x0 > w - 2) x0 = w - 2;
        if (h < 2) y0 = 0;
        if (w < 2) x0 = 0;
        const std::size_t y1 = h >= 2 ? y0 + 1 : y0, x1 = w >= 2 ? x0 + 1 : x0;
        patch[0] = entry(p, y0 * w + x0);
        patch[1] = entry(p, y0 * w + x1);
        patch[2] = entry(p, y1 * w + x0);
        patch[3] = entry(p, y1 * w + x1);
        const std::size_t ph = y1 - y0 + 1, pw = x1 - x0 + 1;
        double local[4];
        local[0] = patch[0];
        if (pw == 2) local[1] = patch[1];
        if (ph == 2) local[pw] = patch[2];
        if (ph == 2 && pw == 2) local[3] = patch[3];
        out[tap * P + p] = kernels::bilinear_tap(local, ph, pw, y - static_cast<double>(y0), x - static_cast<double>(x0)).value;
      }
    }
  }
  return Tensor(Shape{g.taps(), h, w}, std::move(out));
}

}  // namespace evflow
