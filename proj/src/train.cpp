// SPDX-License-Identifier: Apache-2.0
#include "evflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "evflow/error.hpp"
#include "evflow/ops.hpp"
#include "evflow/refinement.hpp"

namespace evflow {

namespace fs = std::filesystem;

std::vector<PreparedSample> prepare_samples(std::vector<FlowSample> samples, const ModelConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    NetworkInputs in = prepare_inputs(s.events, s.image0, s.image1, s.t_k, s.t_k1, cfg);
    out.push_back({std::move(s), std::move(in)});
  }
  return out;
}

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& e : params.entries())
    for (double g : e.value.grad()) sq += g * g;
  return std::sqrt(sq);
}

Optimizer::Optimizer(const TrainConfig& cfg, ParamStore& params) : cfg_(cfg), params_(params) {
  for (const auto& e : params_.entries()) {
    m_.emplace_back(e.value.numel(), 0.0);
    if (cfg_.optimizer == OptimizerKind::Adam) v_.emplace_back(e.value.numel(), 0.0);
  }
}

double Optimizer::step() {
  const double norm = global_grad_norm(params_);
  const double scale = cfg_.clip > 0.0 && norm > cfg_.clip ? cfg_.clip / norm : 1.0;
  ++t_;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor p = entries[k].value;
    const auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_data();
    auto& m = m_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = scale * g[i];
      if (cfg_.optimizer == OptimizerKind::Sgd) {
        m[i] = cfg_.momentum * m[i] + gi;
        w[i] -= cfg_.lr * m[i];
      } else {
        auto& v = v_[k];
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        w[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
      }
    }
  }
  return norm;
}

double mean_loss(const FlowNet& net, const std::vector<PreparedSample>& samples) {
  if (samples.empty()) throw ArgumentError("mean_loss: no samples");
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : samples) {
    total += sequence_loss(net.forward(s.inputs, net.config().iters), s.sample.flow_gt, net.config().gamma).item();
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(FlowNet& net, const std::vector<PreparedSample>& data, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  if (data.empty()) throw ArgumentError("train: empty dataset");
  if (cfg.batch == 0) throw ArgumentError("train: batch must be positive");
  const ModelConfig& mc = net.config();
  const std::vector<PreparedSample> probe(data.begin(),
                                          data.begin() + static_cast<std::ptrdiff_t>(std::min(opts.probe_count, data.size())));
  TrainResult result;
  if (!probe.empty()) result.probe_initial = mean_loss(net, probe);

  std::ofstream loss_csv;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    loss_csv.open(opts.out_dir / "loss.csv");
    loss_csv << "step,loss\n";
  }

  Optimizer opt(cfg, net.params());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    net.params().zero_grad();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const PreparedSample& s = data[order[cursor++]];
      const Tensor loss = sequence_loss(net.forward(s.inputs, mc.iters), s.sample.flow_gt, mc.gamma);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " on sample '" + s.sample.name +
                           "' (grad norm before step " + std::to_string(global_grad_norm(net.params())) + ")");
      }
      ops::scale(loss, 1.0 / static_cast<double>(cfg.batch)).backward();
      batch_loss += value;
    }
    batch_loss /= static_cast<double>(cfg.batch);
    const double norm = opt.step();
    result.step_losses.push_back(batch_loss);
    if (loss_csv.is_open()) loss_csv << step << ',' << batch_loss << '\n';
    if (opts.log && cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      *opts.log << "step " << step << " loss " << batch_loss << " grad_norm " << norm << std::endl;
    }
    if (!opts.out_dir.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      net.params().save(opts.out_dir / ("ckpt_" + std::to_string(step + 1)));
    }
  }
  net.params().zero_grad();
  if (!probe.empty()) result.probe_final = mean_loss(net, probe);
  return result;
}

void save_checkpoint(const fs::path& dir, const FlowNet& net, const RunConfig& run) {
  net.params().save(dir);
  RunConfig copy = run;
  copy.model = net.config();
  std::ofstream os(dir / "config.txt");
  if (!os) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
  os << copy.to_text();
}

FlowNet load_checkpoint(const fs::path& dir, RunConfig* run) {
  const RunConfig cfg = RunConfig::load((dir / "config.txt").string());
  FlowNet net(cfg.model, cfg.train.seed);
  net.params().load(dir);
  if (run) *run = cfg;
  return net;
}

namespace {

Tensor round_to_float(const Tensor& t) {
  std::vector<double> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
  return Tensor(t.shape(), std::move(v));
}

}  // namespace

Tensor predict(const FlowNet& net, const NetworkInputs& in, std::size_t iters) {
  NoGradGuard no_grad;
  return round_to_float(net.forward(in, iters).back());
}

EvalResult evaluate(const FlowNet& net, const std::vector<PreparedSample>& samples, std::size_t iters,
                    OutlierRule rule) {
  if (samples.empty()) throw ArgumentError("evaluate: no samples");
  NoGradGuard no_grad;
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].sample.name < samples[b].sample.name; });
  EvalResult r;
  r.epe_per_iter.assign(iters, 0.0);
  for (std::size_t i : idx) {
    const auto& s = samples[i];
    const FlowField& gt = s.sample.flow_gt;
    const auto preds = net.forward(s.inputs, iters);
    for (std::size_t it = 0; it < iters; ++it) r.epe_per_iter[it] += epe(preds[it], gt.values, gt.valid);
    const Tensor final_pred = round_to_float(preds.back());
    MetricReport rep = flow_report(s.sample.name, final_pred, gt.values, gt.valid, rule);
    const GrayImage warped = warp_backward(s.sample.image1, final_pred);
    rep.ssim = ssim(warped, s.sample.image0);
    rep.psnr = psnr(warped, s.sample.image0);
    r.reports.push_back(rep);
    r.zero_flow_epe += epe(Tensor(gt.values.shape()), gt.values, gt.valid);
  }
  const double n = static_cast<double>(samples.size());
  for (auto& v : r.epe_per_iter) v /= n;
  r.zero_flow_epe /= n;
  r.mean = mean_report(r.reports);
  return r;
}

}  // namespace evflow
