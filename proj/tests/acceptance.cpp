// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: oracle equivalence, gradient integrity, invariants and the
// desk-scale training experiments. One PASS/FAIL line per criterion.
// EVFLOW_ACCEPTANCE=1,2,3 restricts the run to the listed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "evflow/correlation.hpp"
#include "evflow/error.hpp"
#include "evflow/ice.hpp"
#include "evflow/metrics.hpp"
#include "evflow/model.hpp"
#include "evflow/ops.hpp"
#include "evflow/refinement.hpp"
#include "evflow/synth.hpp"
#include "evflow/train.hpp"
#include "evflow/verify.hpp"
#include "oracles.hpp"

using namespace evflow;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr std::size_t kInstances = 100;

// Criterion 4 thresholds.
constexpr double kLossRatio = 0.2;
constexpr double kZeroFlowRatio = 0.5;
// Criterion 6.
constexpr double kSsimShare = 0.8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<Event> random_events(std::size_t n, std::size_t h, std::size_t w, std::uint64_t t1, std::mt19937_64& rng) {
  std::vector<Event> ev(n);
  for (auto& e : ev) {
    e.t = std::uniform_int_distribution<std::uint64_t>(0, t1 - 1)(rng);
    e.x = static_cast<std::uint16_t>(pick(rng, 0, w - 1));
    e.y = static_cast<std::uint16_t>(pick(rng, 0, h - 1));
    e.p = rng() & 1 ? 1 : -1;
  }
  return ev;
}

GrayImage random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 255.0);
  GrayImage img(h, w);
  for (auto& p : img.pixels) p = d(rng);
  return img;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion_oracles() {
  std::mt19937_64 rng(2024);
  std::map<std::string, double> worst;
  auto record = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };

  for (std::size_t n = 0; n < kInstances; ++n) {
    const std::size_t h = pick(rng, 2, 16), w = pick(rng, 2, 16);

    {
      const std::size_t bins = pick(rng, 1, 6);
      const auto ev = random_events(pick(rng, 0, 300), h, w, 10000, rng);
      const EventWindow win(SensorSize{h, w}, 0, 10000, ev);
      record("voxelize", oracle::max_abs_diff(voxelize(win, bins).values.data(), oracle::voxelize(ev, bins, h, w)));
    }

    const std::size_t fh = pick(rng, 1, 6), fw = pick(rng, 1, 6), d = pick(rng, 1, 8);
    const Tensor f1 = oracle::random_tensor({d, fh, fw}, rng), f2 = oracle::random_tensor({d, fh, fw}, rng);
    const CorrelationVolume g = build_guide_corr(f1, f2);
    record("build_guide_corr", oracle::max_abs_diff(g.matrix.data(), oracle::correlation(f1, f2)));

    const std::size_t nt = pick(rng, 1, 5);
    std::vector<Tensor> targets;
    for (std::size_t i = 0; i < nt; ++i) targets.push_back(oracle::random_tensor({d, fh, fw}, rng));
    const auto temporal = build_temporal_corr(f1, targets);
    double terr = 0.0;
    for (std::size_t i = 0; i < nt; ++i)
      terr = std::max(terr, oracle::max_abs_diff(temporal[i].matrix.data(), oracle::correlation(f1, targets[i])));
    record("build_temporal_corr", terr);

    const int r = static_cast<int>(pick(rng, 0, 4));
    const Tensor flow = oracle::random_tensor({2, fh, fw}, rng, -5.0, 5.0);
    const std::vector<double> gm(g.matrix.data().begin(), g.matrix.data().end());
    record("lookup", oracle::max_abs_diff(lookup(g, flow, r).data(), oracle::lookup(gm, fh, fw, flow, r, 1.0)));

    const std::size_t i = pick(rng, 1, nt);
    const std::vector<double> tm(temporal[i - 1].matrix.data().begin(), temporal[i - 1].matrix.data().end());
    record("linear_lookup",
           oracle::max_abs_diff(linear_lookup(temporal, flow, i, nt, r).data(),
                                oracle::lookup(tm, fh, fw, flow, r, static_cast<double>(i) / static_cast<double>(nt))));

    {
      const std::size_t c = pick(rng, 1, 3);
      const Tensor src = oracle::random_tensor({c, h, w}, rng);
      const std::size_t ho = pick(rng, 1, 16), wo = pick(rng, 1, 16);
      Tensor coords = oracle::random_tensor({2, ho, wo}, rng, -1.5, 0.0);
      auto cm = coords.mutable_data();
      for (std::size_t p = 0; p < ho * wo; ++p) {
        cm[p] = std::uniform_real_distribution<double>(-1.5, static_cast<double>(h) + 0.5)(rng);
        cm[ho * wo + p] = std::uniform_real_distribution<double>(-1.5, static_cast<double>(w) + 0.5)(rng);
      }
      record("bilinear_sample", oracle::max_abs_diff(ops::bilinear_sample(src, coords).data(),
                                                     oracle::bilinear_sample(src, coords)));
    }

    {
      const std::size_t cin = pick(rng, 1, 4), cout = pick(rng, 1, 4), k = 2 * pick(rng, 0, 1) + 1;
      const std::size_t stride = pick(rng, 1, 2), pad = k / 2;
      const Tensor x = oracle::random_tensor({cin, h, w}, rng), wt = oracle::random_tensor({cout, cin, k, k}, rng),
                   b = oracle::random_tensor({cout}, rng);
      std::size_t ho = 0, wo = 0;
      const auto expect = oracle::conv2d({x.data().begin(), x.data().end()}, cin, h, w,
                                         {wt.data().begin(), wt.data().end()}, cout, k,
                                         {b.data().begin(), b.data().end()}, stride, pad, ho, wo);
      record("conv2d", oracle::max_abs_diff(ops::conv2d(x, wt, b, stride, pad).data(), expect));
    }

    {
      const std::size_t m = pick(rng, 1, 16), k = pick(rng, 1, 16), p = pick(rng, 1, 16);
      const Tensor a = oracle::random_tensor({m, k}, rng), b = oracle::random_tensor({k, p}, rng);
      record("matmul", oracle::max_abs_diff(ops::matmul(a, b).data(),
                                            oracle::matmul({a.data().begin(), a.data().end()},
                                                           {b.data().begin(), b.data().end()}, m, k, p)));
      const Tensor x = oracle::random_tensor({m, p}, rng, -10.0, 10.0);
      record("softmax_rows", oracle::max_abs_diff(ops::softmax_rows(x).data(),
                                                  oracle::softmax_rows({x.data().begin(), x.data().end()}, m, p)));
    }

    {
      FlowField gt(h, w);
      gt.values = oracle::random_tensor({2, h, w}, rng, -5.0, 5.0);
      for (auto& v : gt.valid) v = (rng() % 4) != 0;
      gt.valid[pick(rng, 0, h * w - 1)] = 1;
      std::vector<Tensor> preds;
      const std::size_t iters = pick(rng, 1, 6);
      for (std::size_t j = 0; j < iters; ++j) preds.push_back(oracle::random_tensor({2, h, w}, rng, -5.0, 5.0));
      const double gamma = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      record("sequence_loss", std::abs(sequence_loss(preds, gt, gamma).item() -
                                       oracle::sequence_loss(preds, gt.values, gt.valid, gamma)));

      const oracle::FlowErrors e = oracle::flow_errors(preds[0], gt.values, gt.valid);
      record("epe", std::abs(epe(preds[0], gt.values, gt.valid) - e.epe));
      record("npe", std::max({std::abs(npe(preds[0], gt.values, gt.valid, 1.0) - e.npe1),
                              std::abs(npe(preds[0], gt.values, gt.valid, 2.0) - e.npe2),
                              std::abs(npe(preds[0], gt.values, gt.valid, 3.0) - e.npe3)}));
      record("ae", std::abs(ae(preds[0], gt.values, gt.valid) - e.ae));
    }

    {
      const std::size_t sh = pick(rng, 11, 16), sw = pick(rng, 11, 16);
      const GrayImage a = random_image(sh, sw, rng), b = random_image(sh, sw, rng);
      record("ssim", std::abs(ssim(a, b) - oracle::ssim(a, b)));
      record("psnr", std::abs(psnr(a, b) - oracle::psnr(a, b)));
    }
  }

  Outcome o{true, {}};
  std::ostringstream detail;
  for (const auto& [name, err] : worst) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "    %-20s max |diff| %.3e\n", name.c_str(), err);
    detail << buf;
    o.pass = o.pass && err <= kOracleTol;
  }
  o.detail = detail.str();
  return o;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_gradients() {
  std::ostringstream detail;
  bool ok = report_checks(detail, gradcheck_ops(7));
  ok = report_checks(detail, gradcheck_network(7, ModelConfig{})) && ok;

  // Nonzero gradient for every parameter group on a random batch.
  FlowNet net(ModelConfig{}, 11);
  Tensor total;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const SyntheticSample sample = tiny_sample(100 + s, 32);
    const NetworkInputs in = prepare_inputs(sample.events, sample.image0, sample.image1, sample.t_k, sample.t_k1,
                                            net.config());
    const Tensor l = sequence_loss(net.forward(in, net.config().iters), sample.flow_gt, net.config().gamma);
    total = total.defined() ? ops::add(total, l) : l;
  }
  total.backward();
  for (const auto& g : net.params().groups()) {
    const double norm = net.params().group_grad_norm(g);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-4s group %-36s grad norm %.3e\n", norm > 0.0 ? "ok" : "FAIL", g.c_str(), norm);
    detail << buf;
    ok = ok && norm > 0.0;
  }
  std::string text = detail.str(), indented;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) indented += "    " + line + "\n";
  return {ok, indented};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_invariants() {
  std::mt19937_64 rng(77);
  std::map<std::string, bool> results;
  auto check = [&](const std::string& name, bool ok) {
    auto [it, fresh] = results.emplace(name, ok);
    if (!fresh) it->second = it->second && ok;
  };

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = pick(rng, 2, 12), w = pick(rng, 2, 12);
    const auto ev = random_events(pick(rng, 1, 400), h, w, 100000, rng);
    const EventWindow win(SensorSize{h, w}, 0, 100000, ev);

    // Voxel mass equals the polarity sum.
    const VoxelGrid v = voxelize(win, pick(rng, 1, 8));
    double mass = 0.0, polarity = 0.0;
    for (double x : v.values.data()) mass += x;
    for (const auto& e : ev) polarity += e.p;
    check("voxel mass conservation", std::abs(mass - polarity) < 1e-9);

    // Reference + targets partition [T_k - dt, T_k1).
    const std::size_t n = pick(rng, 1, 6);
    const std::uint64_t t_k = 50000, t_k1 = 100000;
    {
      const Segmentation seg = segment_reference_targets(win, t_k, t_k1, n);
      std::size_t covered = seg.reference.size();
      bool contiguous = seg.reference.t_end() == seg.targets.front().t_start() && seg.targets.back().t_end() == t_k1;
      for (std::size_t i = 0; i < n; ++i) {
        covered += seg.targets[i].size();
        if (i > 0) contiguous = contiguous && seg.targets[i].t_start() == seg.targets[i - 1].t_end();
      }
      check("segment partition coverage",
            contiguous && covered == slice_window(win, seg.reference.t_start(), t_k1).size());
    }

    // Softmax rows sum to one.
    const std::size_t m = pick(rng, 1, 12), k = pick(rng, 1, 12);
    const Tensor sm = ops::softmax_rows(oracle::random_tensor({m, k}, rng, -30.0, 30.0));
    bool rows = true;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += sm.at(i, j);
      rows = rows && std::abs(s - 1.0) < 1e-9;
    }
    check("softmax row sums", rows);

    // Zero feed-forward output leaves the motion feature untouched.
    {
      ParamStore store;
      store.seed(trial);
      GuidedAggregation agg(store, "a", 4);
      for (auto& x : agg.ffn_b.weight.mutable_data()) x = 0.0;
      MotionFeatureSet set;
      set.ice = oracle::random_tensor({4, 2, 3}, rng);
      set.event = {oracle::random_tensor({4, 2, 3}, rng)};
      const Projections p = agg.project_qkv(set);
      const Tensor am = agg.aggregate(set.event[0], p.query_event[0], p.key, p.value);
      check("residual-identity attention", oracle::max_abs_diff(am.data(), set.event[0].data()) == 0.0);
    }

    // Invalid pixels never influence the loss.
    {
      FlowField gt(h, w);
      gt.values = oracle::random_tensor({2, h, w}, rng);
      for (auto& x : gt.valid) x = rng() & 1;
      gt.valid[0] = 1;
      const std::vector<Tensor> preds{oracle::random_tensor({2, h, w}, rng), oracle::random_tensor({2, h, w}, rng)};
      const double before = sequence_loss(preds, gt, 0.85).item();
      auto values = gt.values.mutable_data();
      for (std::size_t i = 0; i < h * w; ++i)
        if (!gt.valid[i]) {
          values[i] += 1e3;
          values[h * w + i] -= 1e3;
        }
      check("loss masking", sequence_loss(preds, gt, 0.85).item() == before);
    }

    // ICE values stay in [-1, 1].
    {
      const IceTensor ice = build_ice(win, random_image(h, w, rng), pick(rng, 1, 4), 0.1);
      bool bounded = true;
      for (double x : ice.values.data()) bounded = bounded && x >= -1.0 && x <= 1.0;
      check("ICE range bounds", bounded);
    }
  }

  Outcome o{true, {}};
  for (const auto& [name, ok] : results) {
    o.detail += std::string("    ") + (ok ? "ok   " : "FAIL ") + name + "\n";
    o.pass = o.pass && ok;
  }
  return o;
}

// ------------------------------------------------------- criteria 4, 6 and 7

std::vector<PreparedSample> make_set(std::uint64_t seed, std::size_t count, const SynthConfig& sc,
                                     const ModelConfig& mc) {
  auto raw = gen_samples(seed, count, sc);
  return prepare_samples(std::vector<FlowSample>(raw.begin(), raw.end()), mc);
}

struct LearningRun {
  TrainResult train;
  EvalResult eval;
  std::vector<double> identity_ssim;
  double seconds = 0.0;
};

LearningRun run_learning() {
  const auto t0 = Clock::now();
  SynthConfig sc;  // 32 x 32 translations up to 5 px
  const ModelConfig mc;
  const auto train_set = make_set(11, 500, sc, mc);
  const auto held_out = make_set(12, 100, sc, mc);
  FlowNet net(mc, 1);
  TrainConfig tc;  // 2000 steps
  TrainOptions opts;
  opts.log = &std::cout;
  tc.log_every = 250;
  LearningRun r;
  r.train = train(net, train_set, tc, opts);
  r.eval = evaluate(net, held_out, mc.iters);
  for (const auto& s : held_out) r.identity_ssim.push_back(ssim(s.sample.image1, s.sample.image0));
  r.seconds = seconds_since(t0);
  return r;
}

Outcome criterion_learning(const LearningRun& r) {
  const double ratio = r.train.probe_final / r.train.probe_initial;
  const double epe_ratio = r.eval.mean.epe / r.eval.zero_flow_epe;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "    probe loss %.4f -> %.4f (ratio %.3f, need < %.2f)\n"
                "    held-out EPE %.4f vs zero-flow %.4f (ratio %.3f, need <= %.2f)\n"
                "    final step loss %.4f, %zu steps, %.0f s\n",
                r.train.probe_initial, r.train.probe_final, ratio, kLossRatio, r.eval.mean.epe, r.eval.zero_flow_epe,
                epe_ratio, kZeroFlowRatio, r.train.step_losses.back(), r.train.step_losses.size(), r.seconds);
  return {ratio < kLossRatio && epe_ratio <= kZeroFlowRatio, buf};
}

Outcome criterion_warp(const LearningRun& r) {
  std::size_t better = 0;
  double mean_pred = 0.0, mean_id = 0.0;
  for (std::size_t i = 0; i < r.eval.reports.size(); ++i) {
    better += r.eval.reports[i].ssim > r.identity_ssim[i];
    mean_pred += r.eval.reports[i].ssim;
    mean_id += r.identity_ssim[i];
  }
  const double n = static_cast<double>(r.eval.reports.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "    warped SSIM better on %zu/%zu (need >= %.0f%%); mean SSIM %.4f vs identity %.4f\n",
                better, r.eval.reports.size(), 100.0 * kSsimShare, mean_pred / n, mean_id / n);
  return {static_cast<double>(better) >= kSsimShare * n, buf};
}

Outcome criterion_iterations(const LearningRun& r) {
  std::string detail = "    EPE per iteration:";
  char buf[32];
  for (double v : r.eval.epe_per_iter) {
    std::snprintf(buf, sizeof buf, " %.4f", v);
    detail += buf;
  }
  detail += "\n";
  const auto& e = r.eval.epe_per_iter;
  return {e.size() == 6 && e[5] <= e[0], detail};
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion_ablation() {
  SynthConfig sc;
  sc.contrast = 0.5;
  sc.noise_rate = 1.0;
  struct Variant {
    std::string name;
    FusionMode fusion;
    ContextMode context;
  };
  const std::vector<Variant> variants{{"guided+st", FusionMode::Guided, ContextMode::SpatioTemporal},
                                      {"concat+st", FusionMode::Concat, ContextMode::SpatioTemporal},
                                      {"guided+frame", FusionMode::Guided, ContextMode::Frame},
                                      {"guided+event", FusionMode::Guided, ContextMode::Event}};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  // Inputs do not depend on fusion or context, so one prepared set serves all.
  const ModelConfig base;
  const auto train_set = make_set(21, 300, sc, base);
  const auto held_out = make_set(22, 100, sc, base);

  std::map<std::string, std::vector<double>> epe;
  for (const auto& v : variants) {
    for (auto seed : seeds) {
      const auto t0 = Clock::now();
      ModelConfig mc;
      mc.fusion = v.fusion;
      mc.context = v.context;
      FlowNet net(mc, seed);
      TrainConfig tc;
      tc.seed = seed;
      tc.steps = 1000;
      TrainOptions opts;
      opts.probe_count = 0;
      train(net, train_set, tc, opts);
      epe[v.name].push_back(evaluate(net, held_out, mc.iters).mean.epe);
      std::printf("  ablation %-13s seed %llu  EPE %.4f  (%.0f s)\n", v.name.c_str(),
                  static_cast<unsigned long long>(seed), epe[v.name].back(), seconds_since(t0));
      std::fflush(stdout);
    }
  }

  auto median = [](std::vector<double> x) {
    std::sort(x.begin(), x.end());
    return x[x.size() / 2];
  };
  std::ostringstream detail;
  char buf[160];
  std::snprintf(buf, sizeof buf, "    %-13s %9s %9s %9s %9s\n", "variant", "seed 1", "seed 2", "seed 3", "median");
  detail << buf;
  std::map<std::string, double> med;
  for (const auto& v : variants) {
    const auto& e = epe[v.name];
    med[v.name] = median(e);
    std::snprintf(buf, sizeof buf, "    %-13s %9.4f %9.4f %9.4f %9.4f\n", v.name.c_str(), e[0], e[1], e[2], med[v.name]);
    detail << buf;
  }
  std::size_t seed_violations = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double g = epe["guided+st"][i];
    seed_violations += !(g <= epe["concat+st"][i] && g <= epe["guided+frame"][i] && g <= epe["guided+event"][i]);
  }
  const bool fusion_ok = med["guided+st"] <= med["concat+st"];
  const bool context_ok = med["guided+st"] <= med["guided+frame"] && med["guided+st"] <= med["guided+event"];
  std::snprintf(buf, sizeof buf, "    median ordering: guided<=concat %s, st<=frame,event %s; seeds violating: %zu/3\n",
                fusion_ok ? "yes" : "no", context_ok ? "yes" : "no", seed_violations);
  detail << buf;
  return {fusion_ok && context_ok, detail.str()};
}

}  // namespace

int main() {
  std::set<int> wanted{1, 2, 3, 4, 5, 6, 7};
  if (const char* only = std::getenv("EVFLOW_ACCEPTANCE")) {
    wanted.clear();
    std::istringstream in(only);
    for (std::string tok; std::getline(in, tok, ',');)
      if (!tok.empty()) wanted.insert(std::stoi(tok));
  }

  std::vector<std::pair<int, Outcome>> results;
  auto run = [&](int id, const char* title, const std::function<Outcome()>& fn) {
    if (!wanted.count(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("    threw: ") + e.what() + "\n"};
    }
    std::printf("criterion %d (%s): %s  [%.1f s]\n%s", id, title, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, o);
  };

  run(1, "oracle equivalence", criterion_oracles);
  run(2, "gradient integrity", criterion_gradients);
  run(3, "invariant suites", criterion_invariants);

  if (wanted.count(4) || wanted.count(6) || wanted.count(7)) {
    std::printf("training the desk-scale model (500 samples, 2000 steps)...\n");
    std::fflush(stdout);
    LearningRun lr;
    std::string failure;
    try {
      lr = run_learning();
    } catch (const std::exception& e) {
      failure = e.what();
    }
    auto guarded = [&](const std::function<Outcome()>& fn) {
      return [&, fn]() -> Outcome {
        if (!failure.empty()) return {false, "    training failed: " + failure + "\n"};
        return fn();
      };
    };
    run(4, "desk-scale learning", guarded([&] { return criterion_learning(lr); }));
    run(6, "downstream warp", guarded([&] { return criterion_warp(lr); }));
    run(7, "iterative refinement", guarded([&] { return criterion_iterations(lr); }));
  }
  run(5, "ablation direction", criterion_ablation);

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::printf("\nsummary\n");
  bool all = true;
  for (const auto& [id, o] : results) {
    std::printf("  criterion %d: %s\n", id, o.pass ? "PASS" : "FAIL");
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
