// SPDX-License-Identifier: Apache-2.0
//
// Named parameter registry and the on-disk checkpoint format.
//
// A checkpoint is a directory holding
//   manifest.txt  one line per tensor: <name> <d0>x<d1>x... <byte offset>
//   weights.bin   every tensor as little-endian float32, concatenated
// Loading validates names and shapes against the registered model.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  /// Registers a leaf with uniform fan-in scaled initialization,
  /// U(-gain*sqrt(6/fan_in), gain*sqrt(6/fan_in)). gain = 0 yields zeros.
  Tensor add(const std::string& name, Shape shape, std::size_t fan_in, double gain = 1.0);
  Tensor add_zeros(const std::string& name, Shape shape);

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t total_size() const;

  /// Parameter group = name prefix before the first '.'.
  std::vector<std::string> groups() const;
  double group_grad_norm(const std::string& group) const;

  void zero_grad();
  void seed(std::uint64_t seed) { rng_.seed(seed); }

  void save(const std::filesystem::path& dir) const;
  /// Overwrites values in place; names, order and shapes must match.
  void load(const std::filesystem::path& dir);

 private:
  std::vector<Entry> entries_;
  std::mt19937_64 rng_{0};
};

}  // namespace evflow
