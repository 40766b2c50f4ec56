// SPDX-License-Identifier: Apache-2.0
//
// evflow command-line driver. Exit codes: 0 ok, 1 usage, 2 verification
// failure, 3 runtime error.
#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "evflow/dataset.hpp"
#include "evflow/error.hpp"
#include "evflow/metrics.hpp"
#include "evflow/train.hpp"
#include "evflow/verify.hpp"
#include "evflow/viz.hpp"

namespace fs = std::filesystem;
using namespace evflow;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

RunConfig build_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

void write_reports(const fs::path& prefix, std::vector<MetricReport> rows, const MetricReport& mean) {
  rows.push_back(mean);
  write_report_table(std::cout, rows);
  if (prefix.empty()) return;
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  std::ofstream txt(prefix.string() + ".txt"), csv(prefix.string() + ".csv");
  write_report_table(txt, rows);
  write_report_csv(csv, rows);
}

int cmd_synth(const Common& c, std::uint64_t seed, std::size_t count, const std::string& size,
              const std::string& motion, double max_disp, const std::string& format, const fs::path& out) {
  RunConfig cfg = build_config(c);
  if (!size.empty()) {
    const auto x = size.find('x');
    cfg.set("height", size.substr(0, x));
    cfg.set("width", x == std::string::npos ? size : size.substr(x + 1));
  }
  if (!motion.empty()) cfg.set("motion", motion);
  if (max_disp >= 0.0) cfg.synth.max_disp = max_disp;
  gen_dataset(out, seed, count, cfg.synth, format == "csv" ? EventFormat::Csv : EventFormat::Binary);
  std::cout << "wrote " << count << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::map<std::string, std::string>& flags, const fs::path& data,
              const fs::path& out) {
  RunConfig cfg = build_config(c);
  for (const auto& [k, v] : flags) cfg.set(k, v);
  cfg.model.validate();
  auto samples = prepare_samples(load_dataset(data), cfg.model);
  FlowNet net(cfg.model, cfg.train.seed);
  TrainOptions opts;
  opts.out_dir = out;
  opts.log = &std::cout;
  const TrainResult r = train(net, samples, cfg.train, opts);
  save_checkpoint(out / "final", net, cfg);
  std::cout << "probe loss " << r.probe_initial << " -> " << r.probe_final << "\n";

  // Validation from the stored checkpoint so that infer + eval reproduce it.
  const FlowNet reloaded = load_checkpoint(out / "final");
  const EvalResult ev = evaluate(reloaded, samples, reloaded.config().iters);
  write_reports(out / "validation", ev.reports, ev.mean);
  return 0;
}

std::vector<PreparedSample> with_gt(const fs::path& data, const ModelConfig& mc) {
  return prepare_samples(load_dataset(data), mc);
}

int cmd_eval(const std::string& checkpoint, const fs::path& pred_dir, const fs::path& data, const fs::path& report,
             const std::string& outlier) {
  const OutlierRule rule = outlier == "and" ? OutlierRule::And : OutlierRule::Or;
  if (!checkpoint.empty()) {
    const FlowNet net = load_checkpoint(checkpoint);
    const EvalResult ev = evaluate(net, with_gt(data, net.config()), net.config().iters, rule);
    write_reports(report, ev.reports, ev.mean);
    std::cout << "per-iteration EPE:";
    for (double v : ev.epe_per_iter) std::cout << ' ' << v;
    std::cout << "\nzero-flow EPE: " << ev.zero_flow_epe << "\n";
    return 0;
  }
  auto names = read_manifest(data);
  std::sort(names.begin(), names.end());
  std::vector<MetricReport> rows;
  for (const auto& name : names) {
    const FlowSample s = load_sample(data / name);
    fs::path pf = pred_dir / name / "flow.flo";
    if (!fs::exists(pf)) pf = pred_dir / (name + ".flo");
    const FlowField pred = read_flo(pf);
    MetricReport r = flow_report(name, pred.values, s.flow_gt.values, s.flow_gt.valid, rule);
    const GrayImage warped = warp_backward(s.image1, pred.values);
    r.ssim = ssim(warped, s.image0);
    r.psnr = psnr(warped, s.image0);
    rows.push_back(r);
  }
  write_reports(report, rows, mean_report(rows));
  return 0;
}

int cmd_infer(const std::string& checkpoint, const fs::path& events, const fs::path& image0, const fs::path& image1,
              const fs::path& meta_path, std::uint64_t t_k, std::uint64_t t_k1, const fs::path& out_flow) {
  const FlowNet net = load_checkpoint(checkpoint);
  const GrayImage i0 = read_pgm(image0), i1 = read_pgm(image1);
  const SensorSize sensor{i0.height, i0.width};
  std::optional<std::pair<std::uint64_t, std::uint64_t>> bounds;
  if (!meta_path.empty()) {
    const auto meta = read_meta(meta_path);
    t_k = std::stoull(meta.at("t_k"));
    t_k1 = std::stoull(meta.at("t_k1"));
    bounds = std::make_pair(std::stoull(meta.at("t_start")), std::stoull(meta.at("t_end")));
  }
  if (t_k1 <= t_k) throw ArgumentError("infer needs t_k < t_k1 (pass --meta or --t-k/--t-k1)");
  const EventFormat fmt = events.extension() == ".csv" ? EventFormat::Csv : EventFormat::Binary;
  const EventWindow ev = load_events(events, fmt, sensor, bounds);
  const NetworkInputs in = prepare_inputs(ev, i0, i1, t_k, t_k1, net.config());
  const FlowField flow = FlowField::from_tensor(predict(net, in, net.config().iters));
  if (out_flow.has_parent_path()) fs::create_directories(out_flow.parent_path());
  write_flo(out_flow, flow);
  std::cout << "wrote " << out_flow << "\n";
  return 0;
}

int cmd_viz(const fs::path& flow_path, const fs::path& out) {
  const FlowField flow = read_flo(flow_path);
  write_ppm(out, flow.height, flow.width, flow_to_rgb(flow));
  return 0;
}

int cmd_gradcheck(const std::string& scale, std::uint64_t seed) {
  if (scale != "tiny") throw ArgumentError("only --scale tiny is supported");
  bool ok = report_checks(std::cout, gradcheck_ops(seed));
  ok = report_checks(std::cout, gradcheck_network(seed, ModelConfig{})) && ok;
  std::cout << (ok ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("EVFLOW_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Event + frame optical flow toolkit"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 1;
  std::size_t count = 0;
  std::string size, motion, format = "bin", checkpoint, outlier = "or", scale = "tiny";
  double max_disp = -1.0;
  fs::path out, data, report, pred, events, image0, image1, meta, out_flow, flow, out_image;
  std::uint64_t t_k = 0, t_k1 = 0;
  std::string fusion, context, guidance, steps, train_seed;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, common);
  synth->add_option("--seed", seed);
  synth->add_option("--count", count)->required();
  synth->add_option("--size", size, "HxW or a single side length");
  synth->add_option("--motion", motion, "translation|rotation|affine");
  synth->add_option("--max-disp", max_disp);
  synth->add_option("--format", format)->check(CLI::IsMember({"bin", "csv"}));
  synth->add_option("--out", out)->required();

  auto* trainc = app.add_subcommand("train", "train a model on a dataset");
  add_common(trainc, common);
  trainc->add_option("--data", data)->required();
  trainc->add_option("--out", out)->required();
  trainc->add_option("--fusion", fusion)->check(CLI::IsMember({"guided", "concat"}));
  trainc->add_option("--context", context)->check(CLI::IsMember({"st", "frame", "event"}));
  trainc->add_option("--guidance", guidance)->check(CLI::IsMember({"ice", "frame"}));
  trainc->add_option("--steps", steps);
  trainc->add_option("--seed", train_seed);

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  auto* ck = eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--pred", pred, "dataset-shaped directory of predicted flow.flo files")->excludes(ck);
  eval->add_option("--data", data)->required();
  eval->add_option("--report", report, "output prefix for .txt and .csv");
  eval->add_option("--outlier", outlier)->check(CLI::IsMember({"or", "and"}));

  auto* infer = app.add_subcommand("infer", "predict flow for one sample");
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--events", events)->required();
  infer->add_option("--image0", image0)->required();
  infer->add_option("--image1", image1)->required();
  infer->add_option("--meta", meta, "sample meta.txt providing t_k, t_k1 and the event span");
  infer->add_option("--t-k", t_k);
  infer->add_option("--t-k1", t_k1);
  infer->add_option("--out-flow", out_flow)->required();

  auto* viz = app.add_subcommand("viz", "render a flow file as a color-wheel PPM");
  viz->add_option("--flow", flow)->required();
  viz->add_option("--out-image", out_image)->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad->add_option("--scale", scale);
  grad->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common, seed, count, size, motion, max_disp, format, out);
    if (*trainc) {
      std::map<std::string, std::string> flags;
      if (!fusion.empty()) flags["fusion"] = fusion;
      if (!context.empty()) flags["context"] = context;
      if (!guidance.empty()) flags["guidance"] = guidance;
      if (!steps.empty()) flags["steps"] = steps;
      if (!train_seed.empty()) flags["seed"] = train_seed;
      return cmd_train(common, flags, data, out);
    }
    if (*eval) {
      if (checkpoint.empty() && pred.empty()) {
        std::cerr << "eval needs --checkpoint or --pred\n";
        return kExitUsage;
      }
      return cmd_eval(checkpoint, pred, data, report, outlier);
    }
    if (*infer) return cmd_infer(checkpoint, events, image0, image1, meta, t_k, t_k1, out_flow);
    if (*viz) return cmd_viz(flow, out_image);
    if (*grad) return cmd_gradcheck(scale, seed);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
