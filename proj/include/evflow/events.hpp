// SPDX-License-Identifier: Apache-2.0
//
// Event streams: file I/O, temporal slicing, reference/target segmentation
// and voxel-grid rasterization.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorSize {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const SensorSize&, const SensorSize&) = default;
};

/// Events over the half-open span [t_start, t_end), sorted by time with
/// ties kept in insertion order.
class EventWindow {
 public:
  EventWindow() = default;
  /// Validates coordinates, polarity and time bounds, then stable-sorts by t.
  EventWindow(SensorSize sensor, std::uint64_t t_start, std::uint64_t t_end, std::vector<Event> events);

  const SensorSize& sensor() const { return sensor_; }
  std::uint64_t t_start() const { return t_start_; }
  std::uint64_t t_end() const { return t_end_; }
  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

 private:
  SensorSize sensor_;
  std::uint64_t t_start_ = 0;
  std::uint64_t t_end_ = 0;
  std::vector<Event> events_;
};

enum class EventFormat { Csv, Binary };

/// CSV: one `t_us,x,y,p` per line. Binary: packed little-endian records of
/// (u64 t, u16 x, u16 y, i8 p), 13 bytes each, no header.
/// Without explicit bounds the window spans [first t, last t + 1).
EventWindow load_events(const std::filesystem::path& path, EventFormat format, SensorSize sensor,
                        std::optional<std::pair<std::uint64_t, std::uint64_t>> bounds = std::nullopt);
void save_events(const std::filesystem::path& path, EventFormat format, const EventWindow& window);

/// Events with t in [t0, t1).
EventWindow slice_window(const EventWindow& ev, std::uint64_t t0, std::uint64_t t1);

struct Segmentation {
  EventWindow reference;             // [T_k - dt, T_k)
  std::vector<EventWindow> targets;  // target i spans [T_k + (i-1) dt, T_k + i dt)
};

/// Splits [t_k, t_k1) into n uniform targets plus the reference span just
/// before t_k. Boundaries are t_k + floor(i * (t_k1 - t_k) / n).
Segmentation segment_reference_targets(const EventWindow& ev, std::uint64_t t_k, std::uint64_t t_k1,
                                       std::size_t n);

struct VoxelGrid {
  std::size_t bins = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor values;  // bins x height x width
};

/// Bilinear temporal voxelization. Times are normalized with the window's
/// first and last event times; a single distinct timestamp maps to bin 0.
/// Accumulation follows the canonical (t, y, x, p) order.
VoxelGrid voxelize(const EventWindow& win, std::size_t bins);

}  // namespace evflow
