// SPDX-License-Identifier: Apache-2.0
#include "evflow/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evflow/error.hpp"

namespace evflow {

Tensor ParamStore::add(const std::string& name, Shape shape, std::size_t fan_in, double gain) {
  if (contains(name)) throw ArgumentError("duplicate parameter " + name);
  Tensor t(std::move(shape));
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  if (gain != 0.0) {
    for (auto& v : t.mutable_data()) v = dist(rng_);
  }
  t.set_requires_grad(true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_zeros(const std::string& name, Shape shape) { return add(name, std::move(shape), 1, 0.0); }

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ArgumentError("no parameter named " + name);
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

std::vector<std::string> ParamStore::groups() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    std::string g = e.name.substr(0, e.name.find('.'));
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

double ParamStore::group_grad_norm(const std::string& group) const {
  double s = 0.0;
  for (const auto& e : entries_) {
    if (e.name.substr(0, e.name.find('.')) != group) continue;
    for (double g : e.value.grad()) s += g * g;
  }
  return std::sqrt(s);
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

namespace {

void write_le32(std::ostream& os, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

float read_le32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::string dims(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

void ParamStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream blob(dir / "weights.bin", std::ios::binary);
  if (!manifest || !blob) throw std::runtime_error("cannot write checkpoint to " + dir.string());
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    manifest << e.name << ' ' << dims(e.value.shape()) << ' ' << offset << '\n';
    for (double v : e.value.data()) write_le32(blob, static_cast<float>(v));
    offset += e.value.numel() * 4;
  }
}

void ParamStore::load(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  std::ifstream blob(dir / "weights.bin", std::ios::binary);
  if (!manifest || !blob) throw std::runtime_error("cannot read checkpoint from " + dir.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  std::string line;
  std::size_t index = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape;
    std::size_t offset = 0;
    if (!(ls >> name >> shape >> offset)) throw ParseError("malformed checkpoint manifest line", index);
    if (index >= entries_.size()) throw DimensionError("checkpoint has extra tensor " + name);
    Entry& e = entries_[index];
    if (e.name != name) throw DimensionError("checkpoint tensor " + name + " where model expects " + e.name);
    if (shape != dims(e.value.shape())) {
      throw DimensionError("checkpoint shape " + shape + " for " + name + ", model expects " + dims(e.value.shape()));
    }
    if (offset + e.value.numel() * 4 > bytes.size()) throw ParseError("checkpoint blob truncated", index);
    auto dst = e.value.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = read_le32(bytes.data() + offset + 4 * i);
    ++index;
  }
  if (index != entries_.size()) throw DimensionError("checkpoint is missing tensors");
}

}  // namespace evflow
