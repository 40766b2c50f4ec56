// SPDX-License-Identifier: Apache-2.0
#include "evflow/ops.hpp"

#include <cmath>

#include "evflow/error.hpp"
#include "evflow/kernels.hpp"

namespace evflow::ops {

namespace k = evflow::kernels::parallel;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

template <class F, class D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [a, dfdx](std::span<const double> g) {
    auto ga = grad_buffer(a);
    const auto xa = a.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfdx(xa[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    if (needs_grad(a)) {
      auto ga = grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (needs_grad(b)) {
      auto gb = grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    if (needs_grad(a)) {
      auto ga = grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (needs_grad(b)) {
      auto gb = grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    if (needs_grad(a)) {
      auto ga = grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (needs_grad(b)) {
      auto gb = grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor sigmoid(const Tensor& a) {
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, sig, [sig](double x) {
    const double s = sig(x);
    return s * (1.0 - s);
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw DimensionError("concat_channels: rank-0 input");
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat_channels: non-channel dims differ: " + shape_str(shape) + " vs " +
                           shape_str(p.shape()));
    }
    channels += p.dim(0);
  }
  shape[0] = channels;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result(shape, std::move(out), parts, [parts](std::span<const double> g) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      if (needs_grad(p)) {
        auto gp = grad_buffer(p);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      }
      offset += p.numel();
    }
  });
}

Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.dim(0)) {
    throw DimensionError("slice_channels: invalid range for " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  const std::size_t plane = a.numel() / shape[0];
  shape[0] = end - begin;
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * plane),
                          a.data().begin() + static_cast<std::ptrdiff_t>(end * plane));
  return Tensor::make_result(shape, std::move(out), {a}, [a, begin, plane](std::span<const double> g) {
    auto ga = grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * plane + i] += g[i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [a](std::span<const double> g) {
    auto ga = grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return Tensor::make_result(Shape{n, m}, std::move(out), {a}, [a, m, n](std::span<const double> g) {
    auto ga = grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  if (b.dim(0) != kk) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  k::matmul(a.data(), b.data(), out, m, kk, n);
  return Tensor::make_result(Shape{m, n}, std::move(out), {a, b}, [a, b, m, kk, n](std::span<const double> g) {
    if (needs_grad(a)) k::matmul_nt_acc(g, b.data(), grad_buffer(a), m, n, kk);
    if (needs_grad(b)) k::matmul_tn_acc(a.data(), g, grad_buffer(b), kk, m, n);
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  k::softmax_rows(x.data(), m, n, out);
  auto saved = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [x, saved, m, n](std::span<const double> g) {
    k::softmax_rows_backward(*saved, g, m, n, grad_buffer(x));
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  kernels::ConvGeometry geom;
  geom.in_channels = x.dim(0);
  geom.height = x.dim(1);
  geom.width = x.dim(2);
  geom.out_channels = w.dim(0);
  geom.kernel = w.dim(2);
  geom.stride = stride;
  geom.pad = pad;
  if (w.dim(1) != geom.in_channels || w.dim(3) != geom.kernel) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
  }
  if (geom.kernel % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
  if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
  if (geom.kernel > geom.height + 2 * pad || geom.kernel > geom.width + 2 * pad) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  if (bias.defined() && bias.numel() != geom.out_channels) {
    throw DimensionError("conv2d: bias length differs from output channels");
  }
  const std::size_t ho = geom.out_height(), wo = geom.out_width();
  std::vector<double> out(geom.out_channels * ho * wo);
  k::conv2d_forward(geom, x.data(), w.data(), bias.defined() ? bias.data() : std::span<const double>{}, out);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(
      Shape{geom.out_channels, ho, wo}, std::move(out), inputs, [x, w, bias, geom](std::span<const double> g) {
        k::conv2d_backward(geom, x.data(), w.data(), g, needs_grad(x) ? grad_buffer(x) : std::span<double>{},
                           needs_grad(w) ? grad_buffer(w) : std::span<double>{},
                           needs_grad(bias) ? grad_buffer(bias) : std::span<double>{});
      });
}

Tensor bilinear_sample(const Tensor& src, const Tensor& coords) {
  require_rank(src, 3, "bilinear_sample source");
  require_rank(coords, 3, "bilinear_sample coords");
  if (coords.dim(0) != 2) throw DimensionError("bilinear_sample: coords must have 2 channels");
  const std::size_t c = src.dim(0), h = src.dim(1), w = src.dim(2);
  const std::size_t ho = coords.dim(1), wo = coords.dim(2);
  std::vector<double> out(c * ho * wo);
  k::bilinear_forward(src.data(), c, h, w, coords.data(), ho, wo, out);
  return Tensor::make_result(Shape{c, ho, wo}, std::move(out), {src, coords},
                             [src, coords, c, h, w, ho, wo](std::span<const double> g) {
                               k::bilinear_backward(src.data(), c, h, w, coords.data(), ho, wo, g,
                                                    needs_grad(src) ? grad_buffer(src) : std::span<double>{},
                                                    needs_grad(coords) ? grad_buffer(coords) : std::span<double>{});
                             });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_result(Shape{1}, {s}, {a}, [a](std::span<const double> g) {
    auto ga = grad_buffer(a);
    for (auto& v : ga) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor l1(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
  return Tensor::make_result(Shape{1}, {s}, {a, b}, [a, b](std::span<const double> g) {
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const double d = a[i] - b[i];
      const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (needs_grad(a)) grad_buffer(a)[i] += g[0] * sg;
      if (needs_grad(b)) grad_buffer(b)[i] -= g[0] * sg;
    }
  });
}

Tensor masked_l1_mean(const Tensor& a, const Tensor& b, const std::vector<std::uint8_t>& mask) {
  require_same_shape(a, b, "masked_l1_mean");
  require_rank(a, 3, "masked_l1_mean");
  const std::size_t c = a.dim(0), plane = a.dim(1) * a.dim(2);
  if (mask.size() != plane) throw DimensionError("masked_l1_mean: mask size differs from plane");
  std::size_t count = 0;
  for (auto m : mask) count += m != 0;
  if (count == 0) throw ArgumentError("masked_l1_mean: empty valid mask");
  const double inv = 1.0 / static_cast<double>(count);
  double s = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (!mask[p]) continue;
    for (std::size_t ch = 0; ch < c; ++ch) s += std::abs(a[ch * plane + p] - b[ch * plane + p]);
  }
  return Tensor::make_result(Shape{1}, {s * inv}, {a, b}, [a, b, mask, c, plane, inv](std::span<const double> g) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (!mask[p]) continue;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t i = ch * plane + p;
        const double d = a[i] - b[i];
        const double sg = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv * g[0];
        if (needs_grad(a)) grad_buffer(a)[i] += sg;
        if (needs_grad(b)) grad_buffer(b)[i] -= sg;
      }
    }
  });
}

}  // namespace evflow::ops
