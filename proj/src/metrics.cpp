// SPDX-License-Identifier: Apache-2.0
#include "evflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "evflow/error.hpp"
#include "evflow/kernels.hpp"

namespace evflow {

namespace {

constexpr double kPsnrCap = 99.0;
constexpr double kRange = 255.0;

std::size_t check_flow_pair(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid) {
  if (pred.rank() != 3 || pred.dim(0) != 2 || pred.shape() != gt.shape()) {
    throw DimensionError("flow metric: shapes " + shape_str(pred.shape()) + " and " + shape_str(gt.shape()));
  }
  const std::size_t hw = pred.dim(1) * pred.dim(2);
  if (valid.size() != hw) throw DimensionError("flow metric: mask size mismatch");
  if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
    throw ArgumentError("flow metric: empty valid mask");
  }
  return hw;
}

template <typename F>
double mean_over_valid(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid, F f) {
  const std::size_t hw = check_flow_pair(pred, gt, valid);
  const auto p = pred.data(), g = gt.data();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < hw; ++i) {
    if (!valid[i]) continue;
    sum += f(p[i], p[hw + i], g[i], g[hw + i]);
    ++count;
  }
  return sum / static_cast<double>(count);
}

void check_same_size(const GrayImage& a, const GrayImage& b) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("image sizes differ");
  if (a.pixels.empty()) throw ArgumentError("empty image");
}

}  // namespace

double epe(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid) {
  return mean_over_valid(pred, gt, valid,
                         [](double pu, double pv, double gu, double gv) { return std::hypot(pu - gu, pv - gv); });
}

double npe(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid, double n) {
  return 100.0 * mean_over_valid(pred, gt, valid, [n](double pu, double pv, double gu, double gv) {
           return std::hypot(pu - gu, pv - gv) > n ? 1.0 : 0.0;
         });
}

double ae(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid) {
  return mean_over_valid(pred, gt, valid, [](double pu, double pv, double gu, double gv) {
    const double dot = pu * gu + pv * gv + 1.0;
    const double norm = std::sqrt(pu * pu + pv * pv + 1.0) * std::sqrt(gu * gu + gv * gv + 1.0);
    return std::acos(std::clamp(dot / norm, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  });
}

double outlier_mvsec(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid,
                     OutlierRule rule) {
  return 100.0 * mean_over_valid(pred, gt, valid, [rule](double pu, double pv, double gu, double gv) {
           const double err = std::hypot(pu - gu, pv - gv);
           const bool abs_bad = err > 3.0;
           const bool rel_bad = err > 0.05 * std::hypot(gu, gv);
           const bool bad = rule == OutlierRule::Or ? (abs_bad || rel_bad) : (abs_bad && rel_bad);
           return bad ? 1.0 : 0.0;
         });
}

GrayImage warp_backward(const GrayImage& image1, const Tensor& flow) {
  if (flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != image1.height || flow.dim(2) != image1.width) {
    throw DimensionError("warp_backward: flow " + shape_str(flow.shape()) + " does not match image");
  }
  const std::size_t h = image1.height, w = image1.width, hw = h * w;
  const auto f = flow.data();
  GrayImage out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      out.pixels[i] = kernels::bilinear_tap(image1.pixels.data(), h, w, static_cast<double>(y) + f[hw + i],
                                            static_cast<double>(x) + f[i])
                          .value;
    }
  return out;
}

double ssim(const GrayImage& a, const GrayImage& b) {
  check_same_size(a, b);
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  const double c1 = (0.01 * kRange) * (0.01 * kRange), c2 = (0.03 * kRange) * (0.03 * kRange);
  std::array<double, 2 * kRadius + 1> g{};
  double gsum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) gsum += g[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
  for (auto& v : g) v /= gsum;

  const int h = static_cast<int>(a.height), w = static_cast<int>(a.width);
  if (h < 2 * kRadius + 1 || w < 2 * kRadius + 1) throw ArgumentError("ssim: image smaller than 11x11 window");
  double total = 0.0;
  std::size_t count = 0;
  for (int cy = kRadius; cy < h - kRadius; ++cy) {
    for (int cx = kRadius; cx < w - kRadius; ++cx) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -kRadius; dy <= kRadius; ++dy)
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const double wt = g[dy + kRadius] * g[dx + kRadius];
          const double va = a(cy + dy, cx + dx), vb = b(cy + dy, cx + dx);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double psnr(const GrayImage& a, const GrayImage& b) {
  check_same_size(a, b);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(kRange * kRange / mse));
}

MetricReport flow_report(const std::string& name, const Tensor& pred, const Tensor& gt,
                         const std::vector<std::uint8_t>& valid, OutlierRule rule) {
  MetricReport r;
  r.name = name;
  r.epe = epe(pred, gt, valid);
  for (std::size_t n = 1; n <= 3; ++n) r.npe[n - 1] = npe(pred, gt, valid, static_cast<double>(n));
  r.ae = ae(pred, gt, valid);
  r.outlier_pct = outlier_mvsec(pred, gt, valid, rule);
  return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport m;
  m.name = "mean";
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.epe += r.epe;
    for (std::size_t i = 0; i < 3; ++i) m.npe[i] += r.npe[i];
    m.ae += r.ae;
    m.outlier_pct += r.outlier_pct;
    m.ssim += r.ssim;
    m.psnr += r.psnr;
  }
  const double n = static_cast<double>(reports.size());
  m.epe /= n;
  for (auto& v : m.npe) v /= n;
  m.ae /= n;
  m.outlier_pct /= n;
  m.ssim /= n;
  m.psnr /= n;
  return m;
}

void write_report_table(std::ostream& os, const std::vector<MetricReport>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s %8s %8s %8s %8s\n", "sample", "EPE", "1PE", "2PE", "3PE",
                "AE", "OUT%", "SSIM", "PSNR");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %8.3f %8.2f %8.2f %8.2f %8.2f %8.2f %8.4f %8.2f\n", r.name.c_str(), r.epe,
                  r.npe[0], r.npe[1], r.npe[2], r.ae, r.outlier_pct, r.ssim, r.psnr);
    os << line;
  }
}

void write_report_csv(std::ostream& os, const std::vector<MetricReport>& rows) {
  os << "sample,EPE,1PE,2PE,3PE,AE,OUT,SSIM,PSNR\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.name.c_str(), r.epe, r.npe[0],
                  r.npe[1], r.npe[2], r.ae, r.outlier_pct, r.ssim, r.psnr);
    os << line;
  }
}

}  // namespace evflow
