// SPDX-License-Identifier: Apache-2.0
#include "evflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "evflow/error.hpp"

namespace evflow {

namespace {

constexpr std::size_t kWaves = 10;
constexpr double kMinWavelength = 6.0;
constexpr double kMaxWavelength = 16.0;
constexpr double kAmplitude = 120.0;
constexpr double kGain = 0.8;
constexpr double kLevelTolerance = 1e-9;
// Largest displacement a radius-4 lookup at stride 8 can reach.
constexpr double kMaxReach = 32.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index));
}

Texture::Texture(std::uint64_t seed, double contrast) : contrast_(contrast) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double power = 0.0;
  for (std::size_t i = 0; i < kWaves; ++i) {
    const double wavelength = kMinWavelength + (kMaxWavelength - kMinWavelength) * unit(rng);
    const double dir = 2.0 * std::numbers::pi * unit(rng);
    const double k = 2.0 * std::numbers::pi / wavelength;
    Wave w{k * std::cos(dir), k * std::sin(dir), 2.0 * std::numbers::pi * unit(rng), 0.5 + 0.5 * unit(rng)};
    power += 0.5 * w.amplitude * w.amplitude;
    waves_.push_back(w);
  }
  norm_ = std::sqrt(power);
}

double Texture::operator()(double x, double y) const {
  double s = 0.0;
  for (const auto& w : waves_) s += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  // Unit-variance sum squashed smoothly into (8, 248).
  return 128.0 + kAmplitude * std::tanh(kGain * contrast_ * s / norm_);
}

Scene::Scene(const SceneParams& params) : params_(params), texture_(params.texture_seed, params.contrast) {}

std::array<double, 2> Scene::position(double x0, double y0, double alpha) const {
  const auto& p = params_;
  switch (p.motion) {
    case MotionModel::Translation:
      return {x0 + alpha * p.u, y0 + alpha * p.v};
    case MotionModel::Rotation: {
      const double c = std::cos(alpha * p.angle), s = std::sin(alpha * p.angle);
      const double dx = x0 - p.cx, dy = y0 - p.cy;
      return {p.cx + c * dx - s * dy, p.cy + s * dx + c * dy};
    }
    case MotionModel::Affine: {
      const double dx = x0 - p.cx, dy = y0 - p.cy;
      return {p.cx + dx + alpha * (p.linear[0] * dx + p.linear[1] * dy + p.tx),
              p.cy + dy + alpha * (p.linear[2] * dx + p.linear[3] * dy + p.ty)};
    }
  }
  return {x0, y0};
}

std::array<double, 2> Scene::source(double x, double y, double alpha) const {
  const auto& p = params_;
  switch (p.motion) {
    case MotionModel::Translation:
      return {x - alpha * p.u, y - alpha * p.v};
    case MotionModel::Rotation: {
      const double c = std::cos(-alpha * p.angle), s = std::sin(-alpha * p.angle);
      const double dx = x - p.cx, dy = y - p.cy;
      return {p.cx + c * dx - s * dy, p.cy + s * dx + c * dy};
    }
    case MotionModel::Affine: {
      const double a = 1.0 + alpha * p.linear[0], b = alpha * p.linear[1];
      const double c = alpha * p.linear[2], d = 1.0 + alpha * p.linear[3];
      const double rx = x - p.cx - alpha * p.tx, ry = y - p.cy - alpha * p.ty;
      const double det = a * d - b * c;
      return {p.cx + (d * rx - b * ry) / det, p.cy + (-c * rx + a * ry) / det};
    }
  }
  return {x, y};
}

double Scene::intensity(double x, double y, double alpha) const {
  const auto src = source(x, y, alpha);
  return texture_(src[0], src[1]);
}

GrayImage Scene::render(std::size_t height, std::size_t width, double alpha) const {
  GrayImage img(height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) img(y, x) = intensity(static_cast<double>(x), static_cast<double>(y), alpha);
  return img;
}

EventWindow simulate_events(const std::vector<GrayImage>& frames, const std::vector<double>& times_us,
                            double threshold, std::uint64_t t_start, std::uint64_t t_end) {
  if (frames.size() < 2 || frames.size() != times_us.size()) {
    throw ArgumentError("simulate_events needs >= 2 frames with matching timestamps");
  }
  if (!(threshold > 0.0)) throw ArgumentError("contrast threshold must be positive");
  const std::size_t h = frames.front().height, w = frames.front().width;
  std::vector<Event> events;
  auto stamp = [&](double t) {
    const double clamped = std::clamp(std::floor(t), static_cast<double>(t_start), static_cast<double>(t_end - 1));
    return static_cast<std::uint64_t>(clamped);
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double base = std::log(frames[0](y, x) + 1.0);
      long level = 0;
      double prev = base;
      for (std::size_t j = 1; j < frames.size(); ++j) {
        const double cur = std::log(frames[j](y, x) + 1.0);
        const double t0 = times_us[j - 1], t1 = times_us[j];
        auto emit = [&](double crossing, std::int8_t polarity) {
          const double frac = cur != prev ? std::clamp((crossing - prev) / (cur - prev), 0.0, 1.0) : 1.0;
          events.push_back({stamp(t0 + frac * (t1 - t0)), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                            polarity});
        };
        if (cur > prev) {
          while (cur >= base + static_cast<double>(level + 1) * threshold - kLevelTolerance) {
            ++level;
            emit(base + static_cast<double>(level) * threshold, 1);
          }
        } else if (cur < prev) {
          while (cur <= base + static_cast<double>(level - 1) * threshold + kLevelTolerance) {
            --level;
            emit(base + static_cast<double>(level) * threshold, -1);
          }
        }
        prev = cur;
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
  });
  return EventWindow(SensorSize{h, w}, t_start, t_end, std::move(events));
}

SceneParams draw_scene(std::uint64_t seed, const SynthConfig& cfg) {
  if (!(cfg.max_disp >= 0.0) || cfg.max_disp > kMaxReach) {
    throw ArgumentError("max_disp must lie in [0, 32] so lookups can reach the true match");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SceneParams p;
  p.motion = cfg.motion;
  p.texture_seed = rng();
  p.contrast = cfg.contrast;
  p.cx = 0.5 * static_cast<double>(cfg.width - 1);
  p.cy = 0.5 * static_cast<double>(cfg.height - 1);
  const double reach = std::hypot(p.cx, p.cy);
  switch (cfg.motion) {
    case MotionModel::Translation: {
      const double r = cfg.max_disp * std::sqrt(unit(rng));
      const double dir = 2.0 * std::numbers::pi * unit(rng);
      p.u = r * std::cos(dir);
      p.v = r * std::sin(dir);
      break;
    }
    case MotionModel::Rotation: {
      const double limit = reach > 0.0 ? 2.0 * std::asin(std::min(1.0, cfg.max_disp / (2.0 * reach))) : 0.0;
      p.angle = (2.0 * unit(rng) - 1.0) * limit;
      break;
    }
    case MotionModel::Affine: {
      for (auto& v : p.linear) v = 0.2 * (2.0 * unit(rng) - 1.0);
      p.tx = 2.0 * unit(rng) - 1.0;
      p.ty = 2.0 * unit(rng) - 1.0;
      // Affine displacement over the frame peaks at a corner.
      double peak = 0.0;
      for (double cx : {-p.cx, p.cx})
        for (double cy : {-p.cy, p.cy})
          peak = std::max(peak, std::hypot(p.linear[0] * cx + p.linear[1] * cy + p.tx,
                                           p.linear[2] * cx + p.linear[3] * cy + p.ty));
      const double k = peak > 0.0 ? cfg.max_disp * (0.2 + 0.8 * unit(rng)) / peak : 0.0;
      for (auto& v : p.linear) v *= k;
      p.tx *= k;
      p.ty *= k;
      break;
    }
  }
  return p;
}

SyntheticSample render_sample(const SceneParams& params, std::uint64_t noise_seed, const SynthConfig& cfg) {
  if (cfg.num_targets == 0 || cfg.interval_us < cfg.num_targets) throw ArgumentError("invalid frame interval");
  if (cfg.substeps < 2) throw ArgumentError("need at least 2 substeps");
  const Scene scene(params);
  const std::size_t h = cfg.height, w = cfg.width;
  const std::uint64_t dt = cfg.interval_us / cfg.num_targets;

  SyntheticSample s;
  s.scene = params;
  s.threshold = cfg.threshold;
  s.t_k = dt;
  s.t_k1 = dt + cfg.interval_us;

  auto quantize = [](GrayImage img) {
    for (auto& v : img.pixels) v = static_cast<double>(std::clamp(std::lround(v), 0L, 255L));
    return img;
  };
  s.image0 = quantize(scene.render(h, w, 0.0));
  s.image1 = quantize(scene.render(h, w, 1.0));

  s.flow_gt = FlowField(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto p = scene.position(static_cast<double>(x), static_cast<double>(y), 1.0);
      const double u = p[0] - static_cast<double>(x), v = p[1] - static_cast<double>(y);
      s.flow_gt.set(y, x, u, v);
      s.flow_gt.valid[y * w + x] =
          p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= static_cast<double>(w - 1) && p[1] <= static_cast<double>(h - 1);
    }
  }

  // Substeps cover [T_k - dt, T_k1] at `substeps` per frame interval.
  const std::uint64_t t_start = 0, t_end = s.t_k1;
  const std::uint64_t span = t_end - t_start;
  const std::size_t count = static_cast<std::size_t>((cfg.substeps * span + cfg.interval_us - 1) / cfg.interval_us);
  std::vector<GrayImage> frames;
  std::vector<double> times;
  for (std::size_t j = 0; j <= count; ++j) {
    const double t = static_cast<double>(t_start) + static_cast<double>(span) * static_cast<double>(j) / static_cast<double>(count);
    times.push_back(t);
    frames.push_back(scene.render(h, w, (t - static_cast<double>(s.t_k)) / static_cast<double>(cfg.interval_us)));
  }
  EventWindow clean = simulate_events(frames, times, cfg.threshold, t_start, t_end);

  if (cfg.noise_rate > 0.0) {
    std::vector<Event> all = clean.events();
    std::mt19937_64 rng(noise_seed);
    const auto extra = static_cast<std::size_t>(std::llround(cfg.noise_rate * static_cast<double>(h * w)));
    std::uniform_int_distribution<std::uint64_t> tdist(t_start, t_end - 1);
    std::uniform_int_distribution<std::size_t> xdist(0, w - 1), ydist(0, h - 1);
    std::bernoulli_distribution pol(0.5);
    for (std::size_t i = 0; i < extra; ++i) {
      const std::uint64_t t = tdist(rng);
      const auto x = static_cast<std::uint16_t>(xdist(rng));
      const auto y = static_cast<std::uint16_t>(ydist(rng));
      all.push_back({t, x, y, static_cast<std::int8_t>(pol(rng) ? 1 : -1)});
    }
    std::sort(all.begin(), all.end(), [](const Event& a, const Event& b) {
      return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
    });
    s.events = EventWindow(clean.sensor(), t_start, t_end, std::move(all));
  } else {
    s.events = std::move(clean);
  }
  return s;
}

SyntheticSample gen_scene(std::uint64_t seed, const SynthConfig& cfg) {
  return render_sample(draw_scene(seed, cfg), splitmix64(seed + 1), cfg);
}

std::vector<SyntheticSample> gen_samples(std::uint64_t seed, std::size_t count, const SynthConfig& cfg) {
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(gen_scene(sample_seed(seed, i), cfg));
    out.back().name = "sample_" + std::to_string(100000 + i).substr(1);
  }
  return out;
}

}  // namespace evflow
