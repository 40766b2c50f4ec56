// SPDX-License-Identifier: Apache-2.0
#include "evflow/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "evflow/error.hpp"

namespace evflow {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::string& meta_value(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("meta.txt lacks key '" + key + "'", 0);
  return it->second;
}

std::uint64_t meta_u64(const std::map<std::string, std::string>& meta, const std::string& key) {
  const std::string& s = meta_value(meta, key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("meta.txt: bad integer for '" + key + "': " + s, 0);
  }
}

}  // namespace

void write_sample(const fs::path& dir, const SyntheticSample& s, EventFormat format) {
  fs::create_directories(dir);
  write_pgm(dir / "image0.pgm", s.image0);
  write_pgm(dir / "image1.pgm", s.image1);
  save_events(dir / (format == EventFormat::Binary ? "events.bin" : "events.csv"), format, s.events);
  write_flo(dir / "flow.flo", s.flow_gt);
  write_mask(dir / "valid.pgm", s.flow_gt);

  const SceneParams& p = s.scene;
  std::ofstream os(dir / "meta.txt", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / "meta.txt").string());
  os << "height=" << s.image0.height << "\n"
     << "width=" << s.image0.width << "\n"
     << "t_start=" << s.events.t_start() << "\n"
     << "t_end=" << s.events.t_end() << "\n"
     << "t_k=" << s.t_k << "\n"
     << "t_k1=" << s.t_k1 << "\n"
     << "threshold=" << num(s.threshold) << "\n"
     << "motion=" << to_string(p.motion) << "\n"
     << "u=" << num(p.u) << "\n"
     << "v=" << num(p.v) << "\n"
     << "angle=" << num(p.angle) << "\n"
     << "linear=" << num(p.linear[0]) << ' ' << num(p.linear[1]) << ' ' << num(p.linear[2]) << ' '
     << num(p.linear[3]) << "\n"
     << "tx=" << num(p.tx) << "\n"
     << "ty=" << num(p.ty) << "\n"
     << "center=" << num(p.cx) << ' ' << num(p.cy) << "\n"
     << "texture_seed=" << p.texture_seed << "\n"
     << "contrast=" << num(p.contrast) << "\n";
}

std::map<std::string, std::string> read_meta(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open " + path.string());
  std::map<std::string, std::string> meta;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string() + ": expected key=value", lineno);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

FlowSample load_sample(const fs::path& dir) {
  const auto meta = read_meta(dir / "meta.txt");
  FlowSample s;
  s.name = dir.filename().string();
  const SensorSize sensor{meta_u64(meta, "height"), meta_u64(meta, "width")};
  s.t_k = meta_u64(meta, "t_k");
  s.t_k1 = meta_u64(meta, "t_k1");
  const std::pair<std::uint64_t, std::uint64_t> bounds{meta_u64(meta, "t_start"), meta_u64(meta, "t_end")};
  if (fs::exists(dir / "events.bin")) {
    s.events = load_events(dir / "events.bin", EventFormat::Binary, sensor, bounds);
  } else {
    s.events = load_events(dir / "events.csv", EventFormat::Csv, sensor, bounds);
  }
  s.image0 = read_pgm(dir / "image0.pgm");
  s.image1 = read_pgm(dir / "image1.pgm");
  if (fs::exists(dir / "flow.flo")) s.flow_gt = read_flo(dir / "flow.flo", dir / "valid.pgm");
  return s;
}

void gen_dataset(const fs::path& out, std::uint64_t seed, std::size_t count, const SynthConfig& cfg,
                 EventFormat format) {
  fs::create_directories(out);
  std::ofstream manifest(out / "manifest.txt", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write " + (out / "manifest.txt").string());
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSample s = gen_scene(sample_seed(seed, i), cfg);
    s.name = "sample_" + std::to_string(100000 + i).substr(1);
    write_sample(out / s.name, s, format);
    manifest << s.name << "\n";
  }
}

std::vector<std::string> read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.txt");
  if (!is) throw ArgumentError("no manifest.txt in " + dir.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

std::vector<FlowSample> load_dataset(const fs::path& dir) {
  std::vector<FlowSample> samples;
  for (const auto& name : read_manifest(dir)) samples.push_back(load_sample(dir / name));
  return samples;
}

}  // namespace evflow
