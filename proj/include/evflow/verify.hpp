// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference gradient suite shared by the CLI and the test binaries.
#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/synth.hpp"

namespace evflow {

struct CheckOutcome {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return error < tolerance; }
};

/// Per-op checks at tolerance 1e-5.
std::vector<CheckOutcome> gradcheck_ops(std::uint64_t seed);

/// One-iteration network on a 16x16 synthetic sample; a 16-element slice of
/// the first tensor of every parameter group, tolerance 1e-4.
std::vector<CheckOutcome> gradcheck_network(std::uint64_t seed, const ModelConfig& cfg);

/// A small synthetic sample for end-to-end checks.
SyntheticSample tiny_sample(std::uint64_t seed, std::size_t size = 16);

/// Prints one line per check; returns true when all pass.
bool report_checks(std::ostream& os, const std::vector<CheckOutcome>& checks);

}  // namespace evflow
