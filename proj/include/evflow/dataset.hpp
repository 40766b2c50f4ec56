// SPDX-License-Identifier: Apache-2.0
//
// On-disk sample sets. A dataset directory holds `manifest.txt` (one sample
// name per line) and one subdirectory per sample with
//   image0.pgm, image1.pgm   frames at T_k and T_k1
//   events.bin | events.csv  event stream
//   flow.flo, valid.pgm      ground truth and its mask
//   meta.txt                 key=value: sensor size, times, threshold, motion
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/events.hpp"
#include "evflow/synth.hpp"

namespace evflow {

void write_sample(const std::filesystem::path& dir, const SyntheticSample& sample, EventFormat format);
FlowSample load_sample(const std::filesystem::path& dir);
std::map<std::string, std::string> read_meta(const std::filesystem::path& path);

/// Generates `count` samples into `out`. Same seed and config give
/// byte-identical directories.
void gen_dataset(const std::filesystem::path& out, std::uint64_t seed, std::size_t count, const SynthConfig& cfg,
                 EventFormat format = EventFormat::Binary);

std::vector<std::string> read_manifest(const std::filesystem::path& dir);
/// Loads every sample listed in the manifest, in manifest order.
std::vector<FlowSample> load_dataset(const std::filesystem::path& dir);

}  // namespace evflow
