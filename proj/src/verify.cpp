// SPDX-License-Identifier: Apache-2.0
#include "evflow/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "evflow/correlation.hpp"
#include "evflow/gradcheck.hpp"
#include "evflow/model.hpp"
#include "evflow/ops.hpp"
#include "evflow/refinement.hpp"

namespace evflow {

namespace {

constexpr double kOpTolerance = 1e-5;
constexpr double kNetTolerance = 1e-4;

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Values bounded away from zero so relu/abs kinks stay out of reach of h.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = sign(rng) ? d(rng) : -d(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Flow whose sample positions stay off the integer lattice.
Tensor off_lattice_flow(std::size_t h, std::size_t w, std::mt19937_64& rng, double reach) {
  std::uniform_real_distribution<double> whole(-reach, reach);
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  std::vector<double> v(2 * h * w);
  for (auto& x : v) x = std::floor(whole(rng)) + frac(rng);
  return Tensor(Shape{2, h, w}, std::move(v));
}

CheckOutcome check(const std::string& name, const std::function<Tensor()>& f, std::vector<GradCheckTarget> targets,
                   double tolerance = kOpTolerance) {
  return {name, finite_diff_check(f, targets).max_rel_error, tolerance};
}

}  // namespace

std::vector<CheckOutcome> gradcheck_ops(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckOutcome> out;
  {
    Tensor a = uniform({3, 4, 5}, rng), b = uniform({3, 4, 5}, rng);
    out.push_back(check("add", [=] { return project_to_scalar(ops::add(a, b), 1); }, {{a, {}}, {b, {}}}));
    out.push_back(check("mul", [=] { return project_to_scalar(ops::mul(a, b), 2); }, {{a, {}}, {b, {}}}));
    out.push_back(check("tanh", [=] { return project_to_scalar(ops::tanh(a), 3); }, {{a, {}}}));
    out.push_back(check("sigmoid", [=] { return project_to_scalar(ops::sigmoid(a), 4); }, {{a, {}}}));
    out.push_back(check("concat_channels", [=] { return project_to_scalar(ops::concat_channels({a, b}), 5); },
                        {{a, {}}, {b, {}}}));
  }
  {
    Tensor a = away_from_zero({2, 6, 6}, rng), b = away_from_zero({2, 6, 6}, rng);
    out.push_back(check("relu", [=] { return project_to_scalar(ops::relu(a), 6); }, {{a, {}}}));
    // |a - b| stays smooth when a and b have opposite signs.
    Tensor bneg = Tensor(b.shape(), [&] {
      std::vector<double> v(b.data().begin(), b.data().end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] > 0 ? -std::abs(v[i]) : std::abs(v[i]);
      return v;
    }());
    out.push_back(check("l1", [=] { return ops::l1(a, bneg); }, {{a, {}}, {bneg, {}}}));
    Tensor fa = away_from_zero({2, 4, 4}, rng), fb = away_from_zero({2, 4, 4}, rng);
    std::vector<double> fbv(fb.data().begin(), fb.data().end());
    for (std::size_t i = 0; i < fbv.size(); ++i) fbv[i] = fa[i] > 0 ? -std::abs(fbv[i]) : std::abs(fbv[i]);
    Tensor fbs(fb.shape(), fbv);
    std::vector<std::uint8_t> mask(16, 1);
    mask[3] = mask[7] = 0;
    out.push_back(check("masked_l1_mean", [=] { return ops::masked_l1_mean(fa, fbs, mask); }, {{fa, {}}, {fbs, {}}}));
  }
  {
    Tensor a = uniform({4, 5}, rng), b = uniform({5, 3}, rng);
    out.push_back(check("matmul", [=] { return project_to_scalar(ops::matmul(a, b), 7); }, {{a, {}}, {b, {}}}));
    out.push_back(check("transpose", [=] { return project_to_scalar(ops::transpose(a), 8); }, {{a, {}}}));
    Tensor s = uniform({4, 6}, rng, -3.0, 3.0);
    out.push_back(check("softmax_rows", [=] { return project_to_scalar(ops::softmax_rows(s), 9); }, {{s, {}}}));
  }
  {
    Tensor x = uniform({3, 7, 6}, rng), w = uniform({4, 3, 3, 3}, rng), b = uniform({4}, rng);
    out.push_back(check("conv2d", [=] { return project_to_scalar(ops::conv2d(x, w, b, 1, 1), 10); },
                        {{x, {}}, {w, {}}, {b, {}}}));
    out.push_back(check("conv2d_stride2", [=] { return project_to_scalar(ops::conv2d(x, w, b, 2, 1), 11); },
                        {{x, {}}, {w, {}}, {b, {}}}));
    Tensor w1 = uniform({5, 3, 1, 1}, rng);
    out.push_back(
        check("conv2d_1x1", [=] { return project_to_scalar(ops::conv2d(x, w1, Tensor(), 1, 0), 12); }, {{x, {}}, {w1, {}}}));
  }
  {
    Tensor src = uniform({2, 6, 7}, rng);
    std::uniform_real_distribution<double> cy(0.0, 5.0), cx(0.0, 6.0), frac(0.2, 0.8);
    std::vector<double> c(2 * 4 * 5);
    for (std::size_t i = 0; i < 20; ++i) {
      c[i] = std::floor(cy(rng)) + frac(rng);
      c[20 + i] = std::floor(cx(rng)) + frac(rng);
    }
    Tensor coords(Shape{2, 4, 5}, c);
    out.push_back(check("bilinear_sample", [=] { return project_to_scalar(ops::bilinear_sample(src, coords), 13); },
                        {{src, {}}, {coords, {}}}));
  }
  {
    Tensor f1 = uniform({5, 3, 4}, rng), f2 = uniform({5, 3, 4}, rng);
    Tensor flow = off_lattice_flow(3, 4, rng, 2.0);
    out.push_back(check("guide_corr_lookup",
                        [=] { return project_to_scalar(lookup(build_guide_corr(f1, f2), flow, 2), 14); },
                        {{f1, {}}, {f2, {}}, {flow, {}}}));
    Tensor t1 = uniform({5, 3, 4}, rng), t2 = uniform({5, 3, 4}, rng);
    out.push_back(check("linear_lookup",
                        [=] {
                          const auto tc = build_temporal_corr(f1, {t1, t2});
                          return project_to_scalar(ops::add(linear_lookup(tc, flow, 1, 2, 2),
                                                            linear_lookup(tc, flow, 2, 2, 2)),
                                                   15);
                        },
                        {{f1, {}}, {t1, {}}, {t2, {}}}));
  }
  {
    Tensor flow = uniform({2, 3, 4}, rng);
    out.push_back(check("upsample_flow", [=] { return project_to_scalar(upsample_flow(flow, 4), 16); }, {{flow, {}}}));
  }
  {
    ParamStore store;
    store.seed(seed);
    ConvGru gru(store, "gru", 4, 3);
    Tensor h = uniform({4, 3, 3}, rng), x = uniform({3, 3, 3}, rng);
    out.push_back(check("gru_step", [=] { return project_to_scalar(gru(h, x), 17); },
                        {{h, {}}, {x, {}}, {gru.conv_z.weight, {}}, {gru.conv_q.bias, {}}}));
    GuidedAggregation agg(store, "attn", 4);
    MotionFeatureSet set{uniform({4, 2, 3}, rng), {uniform({4, 2, 3}, rng)}};
    out.push_back(check("guided_aggregation",
                        [=] {
                          const Projections p = agg.project_qkv(set);
                          return project_to_scalar(agg.aggregate(set.event[0], p.query_event[0], p.key, p.value), 18);
                        },
                        {{set.ice, {}}, {set.event[0], {}}, {agg.w_query, {}}, {agg.w_key, {}}, {agg.w_value, {}}}));
  }
  return out;
}

SyntheticSample tiny_sample(std::uint64_t seed, std::size_t size) {
  SynthConfig cfg;
  cfg.height = cfg.width = size;
  cfg.max_disp = 3.0;
  return gen_scene(seed, cfg);
}

std::vector<CheckOutcome> gradcheck_network(std::uint64_t seed, const ModelConfig& cfg) {
  const SyntheticSample s = tiny_sample(seed);
  FlowNet net(cfg, seed);
  const NetworkInputs in = prepare_inputs(s.events, s.image0, s.image1, s.t_k, s.t_k1, net.config());
  const auto loss = [&] { return sequence_loss(net.forward(in, 1), s.flow_gt, net.config().gamma); };
  std::vector<CheckOutcome> out;
  for (const auto& group : net.params().groups()) {
    for (const auto& e : net.params().entries()) {
      if (e.name.rfind(group + ".", 0) != 0) continue;
      std::vector<std::size_t> idx;
      // Random coordinates; a leading block can sit entirely on a dead input.
      std::mt19937_64 pick(seed ^ std::hash<std::string>{}(e.name));
      const std::size_t n = e.value.numel();
      for (std::size_t i = 0; i < std::min<std::size_t>(16, n); ++i) idx.push_back(pick() % n);
      out.push_back(check("network/" + e.name, loss, {{e.value, idx}}, kNetTolerance));
      break;
    }
  }
  return out;
}

bool report_checks(std::ostream& os, const std::vector<CheckOutcome>& checks) {
  bool ok = true;
  char line[256];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-4s %-40s max_rel_err %.3e (tol %.0e)\n", c.pass() ? "ok" : "FAIL",
                  c.name.c_str(), c.error, c.tolerance);
    os << line;
    ok = ok && c.pass();
  }
  return ok;
}

}  // namespace evflow
