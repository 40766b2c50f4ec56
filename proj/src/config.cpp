// SPDX-License-Identifier: Apache-2.0
#include "evflow/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "evflow/error.hpp"

namespace evflow {

std::string to_string(FusionMode m) { return m == FusionMode::Guided ? "guided" : "concat"; }

std::string to_string(ContextMode m) {
  switch (m) {
    case ContextMode::SpatioTemporal: return "st";
    case ContextMode::Frame: return "frame";
    case ContextMode::Event: return "event";
  }
  return "st";
}

std::string to_string(GuidanceMode m) { return m == GuidanceMode::Ice ? "ice" : "frame"; }
std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

std::string to_string(MotionModel m) {
  switch (m) {
    case MotionModel::Translation: return "translation";
    case MotionModel::Rotation: return "rotation";
    case MotionModel::Affine: return "affine";
  }
  return "translation";
}

void ModelConfig::validate() const {
  if (stride == 0 || feat_dim == 0 || ctx_dim == 0 || motion_dim == 0 || hidden_dim == 0)
    throw ArgumentError("model dimensions must be positive");
  if (stride & (stride - 1)) throw ArgumentError("stride must be a power of two");
  if (num_targets == 0) throw ArgumentError("num_targets must be >= 1");
  if (bins == 0 || seg_bins == 0) throw ArgumentError("bins must be >= 1");
  if (radius < 0) throw ArgumentError("radius must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0, 1]");
  if (iters == 0) throw ArgumentError("iters must be >= 1");
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ArgumentError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ArgumentError("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T, class Getter>
Field number_field(Getter member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            RunConfig copy = c;
            if constexpr (std::is_floating_point_v<T>) {
              return fmt_double(member(copy));
            } else {
              return std::to_string(member(copy));
            }
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["feat_dim"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.feat_dim; });
    t["ctx_dim"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.ctx_dim; });
    t["motion_dim"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.motion_dim; });
    t["hidden_dim"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.hidden_dim; });
    t["stride"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.stride; });
    t["num_targets"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.num_targets; });
    t["bins"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.bins; });
    t["seg_bins"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.seg_bins; });
    t["radius"] = number_field<int>([](RunConfig& c) -> auto& { return c.model.radius; });
    t["gamma"] = number_field<double>([](RunConfig& c) -> auto& { return c.model.gamma; });
    t["iters"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.model.iters; });
    t["eps"] = number_field<double>([](RunConfig& c) -> auto& { return c.model.eps; });
    t["fusion"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                     if (v == "guided") c.model.fusion = FusionMode::Guided;
                     else if (v == "concat") c.model.fusion = FusionMode::Concat;
                     else throw ArgumentError("bad value for " + k + ": '" + v + "'");
                   },
                   [](const RunConfig& c) { return to_string(c.model.fusion); }};
    t["context"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                      if (v == "st") c.model.context = ContextMode::SpatioTemporal;
                      else if (v == "frame") c.model.context = ContextMode::Frame;
                      else if (v == "event") c.model.context = ContextMode::Event;
                      else throw ArgumentError("bad value for " + k + ": '" + v + "'");
                    },
                    [](const RunConfig& c) { return to_string(c.model.context); }};
    t["guidance"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                       if (v == "ice") c.model.guidance = GuidanceMode::Ice;
                       else if (v == "frame") c.model.guidance = GuidanceMode::Frame;
                       else throw ArgumentError("bad value for " + k + ": '" + v + "'");
                     },
                     [](const RunConfig& c) { return to_string(c.model.guidance); }};
    t["aggregate_ice"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.model.aggregate_ice = parse_bool(k, v);
                          },
                          [](const RunConfig& c) { return std::string(c.model.aggregate_ice ? "true" : "false"); }};

    t["seed"] = number_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.seed; });
    t["steps"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.train.steps; });
    t["batch"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.train.batch; });
    t["optimizer"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        if (v == "sgd") c.train.optimizer = OptimizerKind::Sgd;
                        else if (v == "adam") c.train.optimizer = OptimizerKind::Adam;
                        else throw ArgumentError("bad value for " + k + ": '" + v + "'");
                      },
                      [](const RunConfig& c) { return to_string(c.train.optimizer); }};
    t["lr"] = number_field<double>([](RunConfig& c) -> auto& { return c.train.lr; });
    t["momentum"] = number_field<double>([](RunConfig& c) -> auto& { return c.train.momentum; });
    t["clip"] = number_field<double>([](RunConfig& c) -> auto& { return c.train.clip; });
    t["checkpoint_every"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.train.checkpoint_every; });
    t["log_every"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.train.log_every; });

    t["height"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.synth.height; });
    t["width"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.synth.width; });
    t["motion"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                     if (v == "translation") c.synth.motion = MotionModel::Translation;
                     else if (v == "rotation") c.synth.motion = MotionModel::Rotation;
                     else if (v == "affine") c.synth.motion = MotionModel::Affine;
                     else throw ArgumentError("bad value for " + k + ": '" + v + "'");
                   },
                   [](const RunConfig& c) { return to_string(c.synth.motion); }};
    t["max_disp"] = number_field<double>([](RunConfig& c) -> auto& { return c.synth.max_disp; });
    t["threshold"] = number_field<double>([](RunConfig& c) -> auto& { return c.synth.threshold; });
    t["substeps"] = number_field<std::size_t>([](RunConfig& c) -> auto& { return c.synth.substeps; });
    t["contrast"] = number_field<double>([](RunConfig& c) -> auto& { return c.synth.contrast; });
    t["noise_rate"] = number_field<double>([](RunConfig& c) -> auto& { return c.synth.noise_rate; });
    t["interval_us"] = number_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.synth.interval_us; });
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& t = fields();
  auto it = t.find(key);
  if (it == t.end()) throw ArgumentError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
  // The synthetic generator and the model must agree on the target count.
  if (key == "num_targets") synth.num_targets = model.num_targets;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.model.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << '=' << field.get(*this) << '\n';
  return os.str();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

}  // namespace evflow
