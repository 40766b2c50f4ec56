// SPDX-License-Identifier: Apache-2.0
//
// Flow accuracy metrics and backward-warp image quality.
#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "evflow/image.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

enum class OutlierRule { Or, And };

/// Mean over valid pixels of ||pred - gt||_2. `pred` and `gt` are 2 x H x W.
double epe(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid);
/// Percent of valid pixels whose endpoint error exceeds n.
double npe(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid, double n);
/// Mean angle in degrees between (u, v, 1) vectors.
double ae(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid);
/// Percent of valid pixels with EPE > 3 px or/and EPE > 5% of |gt|.
double outlier_mvsec(const Tensor& pred, const Tensor& gt, const std::vector<std::uint8_t>& valid,
                     OutlierRule rule = OutlierRule::Or);

/// Reconstructs I_k by bilinearly sampling I_k1 at x + flow(x).
GrayImage warp_backward(const GrayImage& image1, const Tensor& flow);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 255),
/// averaged over window centres whose window fits inside the image.
double ssim(const GrayImage& a, const GrayImage& b);
/// 10 log10(255^2 / MSE), 99 when the images are identical.
double psnr(const GrayImage& a, const GrayImage& b);

struct MetricReport {
  std::string name;
  double epe = 0.0;
  std::array<double, 3> npe{0.0, 0.0, 0.0};  // n = 1, 2, 3
  double ae = 0.0;
  double outlier_pct = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
};

/// Flow metrics only; ssim/psnr are left at zero.
MetricReport flow_report(const std::string& name, const Tensor& pred, const Tensor& gt,
                         const std::vector<std::uint8_t>& valid, OutlierRule rule = OutlierRule::Or);
/// Field-wise mean of the reports, named "mean".
MetricReport mean_report(const std::vector<MetricReport>& reports);

void write_report_table(std::ostream& os, const std::vector<MetricReport>& rows);
void write_report_csv(std::ostream& os, const std::vector<MetricReport>& rows);

}  // namespace evflow
