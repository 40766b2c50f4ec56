// SPDX-License-Identifier: Apache-2.0
//
// Model hyperparameters and the textual key=value run configuration.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evflow {

enum class FusionMode { Guided, Concat };
enum class ContextMode { SpatioTemporal, Frame, Event };
enum class GuidanceMode { Ice, Frame };
enum class OptimizerKind { Sgd, Adam };

std::string to_string(FusionMode m);
std::string to_string(ContextMode m);
std::string to_string(GuidanceMode m);
std::string to_string(OptimizerKind k);

struct ModelConfig {
  std::size_t feat_dim = 32;    // correlation feature channels
  std::size_t ctx_dim = 32;     // context channels
  std::size_t motion_dim = 32;  // motion feature channels (also attention width)
  std::size_t hidden_dim = 48;  // ConvGRU hidden channels
  std::size_t stride = 8;
  std::size_t num_targets = 5;
  std::size_t bins = 15;
  std::size_t seg_bins = 3;
  int radius = 4;
  double gamma = 0.85;
  std::size_t iters = 6;
  double eps = 0.1;
  FusionMode fusion = FusionMode::Guided;
  ContextMode context = ContextMode::SpatioTemporal;
  GuidanceMode guidance = GuidanceMode::Ice;
  bool aggregate_ice = true;  // false: M_ice bypasses attention

  std::size_t guide_channels() const { return guidance == GuidanceMode::Ice ? seg_bins + 1 : 1; }
  std::size_t cost_channels() const {
    return static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1));
  }
  void validate() const;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 2000;
  std::size_t batch = 4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-3;
  double momentum = 0.9;
  double clip = 1.0;
  std::size_t checkpoint_every = 500;
  std::size_t log_every = 50;
};

enum class MotionModel { Translation, Rotation, Affine };
std::string to_string(MotionModel m);

struct SynthConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  MotionModel motion = MotionModel::Translation;
  double max_disp = 5.0;
  double threshold = 0.15;      // log-intensity contrast threshold C
  std::size_t substeps = 32;    // per frame interval
  double contrast = 1.0;        // texture amplitude scale in (0, 1]
  double noise_rate = 0.0;      // noise events per pixel over the sample span
  std::uint64_t interval_us = 100000;
  std::size_t num_targets = 5;
};

/// Everything a CLI run needs. Unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;

  void set(const std::string& key, const std::string& value);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_text() const;
  static std::vector<std::string> keys();
};

}  // namespace evflow
