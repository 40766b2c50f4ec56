// SPDX-License-Identifier: Apache-2.0
//
// Synthetic brightness-constancy scenes: an analytic band-limited texture
// moved by a parametric motion, rendered frames, ground-truth flow and
// events from a log-intensity threshold-crossing sensor model.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/events.hpp"
#include "evflow/image.hpp"

namespace evflow {

/// Sum of random sinusoids, normalized to unit variance and squashed by tanh
/// into (8, 248) around mid-gray. Smooth, so exact warps and bilinear
/// resampling agree closely.
class Texture {
 public:
  Texture() = default;
  Texture(std::uint64_t seed, double contrast);
  double operator()(double x, double y) const;

 private:
  struct Wave {
    double kx, ky, phase, amplitude;
  };
  std::vector<Wave> waves_;
  double norm_ = 1.0;
  double contrast_ = 1.0;
};

struct SceneParams {
  MotionModel motion = MotionModel::Translation;
  double u = 0.0, v = 0.0;                           // translation
  double angle = 0.0;                                // rotation (radians)
  std::array<double, 4> linear{0.0, 0.0, 0.0, 0.0};  // affine L, row-major
  double tx = 0.0, ty = 0.0;                         // affine offset
  std::uint64_t texture_seed = 0;
  double contrast = 1.0;
  double cx = 0.0, cy = 0.0;                         // motion centre
};

/// Texture + motion. Time is the fraction alpha of the frame interval:
/// alpha = 0 at T_k, alpha = 1 at T_k1.
class Scene {
 public:
  Scene(const SceneParams& params);

  const SceneParams& params() const { return params_; }
  /// Where the point at p0 (alpha = 0) sits at time alpha.
  std::array<double, 2> position(double x0, double y0, double alpha) const;
  /// Inverse of position(): the alpha = 0 point that lands on (x, y).
  std::array<double, 2> source(double x, double y, double alpha) const;
  double intensity(double x, double y, double alpha) const;
  GrayImage render(std::size_t height, std::size_t width, double alpha) const;

 private:
  SceneParams params_;
  Texture texture_;
};

struct FlowSample {
  std::string name;
  GrayImage image0;  // at T_k, quantized to integer levels
  GrayImage image1;  // at T_k1
  EventWindow events;  // covers [T_k - dt, T_k1)
  FlowField flow_gt;
  std::uint64_t t_k = 0;
  std::uint64_t t_k1 = 0;
};

struct SyntheticSample : FlowSample {
  SceneParams scene;
  double threshold = 0.15;
};

/// Events from per-pixel threshold crossings of log(I + 1). `frames[j]` is
/// the intensity at `times_us[j]`. Each crossing of reference +- C emits one
/// event timestamped by linear interpolation; the reference then moves to
/// the crossed level. Times are floored to microseconds and clamped into
/// [t_start, t_end).
EventWindow simulate_events(const std::vector<GrayImage>& frames, const std::vector<double>& times_us,
                            double threshold, std::uint64_t t_start, std::uint64_t t_end);

/// Draws motion parameters with every displacement bounded by max_disp.
SceneParams draw_scene(std::uint64_t seed, const SynthConfig& cfg);

/// Renders one sample. Throws ArgumentError if max_disp exceeds what the
/// default lookup can reach (radius 4 x stride 8 = 32 px).
SyntheticSample gen_scene(std::uint64_t seed, const SynthConfig& cfg);
SyntheticSample render_sample(const SceneParams& scene, std::uint64_t noise_seed, const SynthConfig& cfg);

/// Deterministic per-sample seed.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t index);

std::vector<SyntheticSample> gen_samples(std::uint64_t seed, std::size_t count, const SynthConfig& cfg);

}  // namespace evflow
