// SPDX-License-Identifier: Apache-2.0
//
// Optimizers, the training loop and model evaluation.
#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/metrics.hpp"
#include "evflow/model.hpp"
#include "evflow/synth.hpp"

namespace evflow {

/// A sample with its network inputs precomputed.
struct PreparedSample {
  FlowSample sample;
  NetworkInputs inputs;
};

std::vector<PreparedSample> prepare_samples(std::vector<FlowSample> samples, const ModelConfig& cfg);

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, ParamStore& params);
  /// Clips gradients to the configured global norm, applies one update and
  /// returns the pre-clip norm.
  double step();

 private:
  TrainConfig cfg_;
  ParamStore& params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

double global_grad_norm(const ParamStore& params);

/// Mean sequence loss over `samples` without recording a graph.
double mean_loss(const FlowNet& net, const std::vector<PreparedSample>& samples);

struct TrainResult {
  std::vector<double> step_losses;  // mean batch loss per step
  double probe_initial = 0.0;       // mean loss over the probe subset before training
  double probe_final = 0.0;         // and after
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::ostream* log = nullptr;
  std::size_t probe_count = 64;   // leading samples used for probe_initial/final
};

/// Deterministic given the seed: each epoch visits the samples in an order
/// drawn from the seeded generator, and batch gradients are accumulated in
/// that order. Throws NumericError on a non-finite loss.
TrainResult train(FlowNet& net, const std::vector<PreparedSample>& data, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

/// Writes params + config.txt so `load_checkpoint` can rebuild the model.
void save_checkpoint(const std::filesystem::path& dir, const FlowNet& net, const RunConfig& run);
FlowNet load_checkpoint(const std::filesystem::path& dir, RunConfig* run = nullptr);

/// Final-iteration full-resolution prediction, rounded to float32 as it
/// would be stored in a .flo file.
Tensor predict(const FlowNet& net, const NetworkInputs& in, std::size_t iters);

struct EvalResult {
  std::vector<MetricReport> reports;  // sorted by sample name
  MetricReport mean;
  std::vector<double> epe_per_iter;   // mean EPE after each iteration
  double zero_flow_epe = 0.0;
};

/// Scores the network on each sample; ssim/psnr measure the backward warp of
/// image1 with the predicted flow against image0.
EvalResult evaluate(const FlowNet& net, const std::vector<PreparedSample>& samples, std::size_t iters,
                    OutlierRule rule = OutlierRule::Or);

}  // namespace evflow
