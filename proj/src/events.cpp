// SPDX-License-Identifier: Apache-2.0
#include "evflow/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

#include "evflow/error.hpp"

namespace evflow {

namespace {

void validate(const Event& e, const SensorSize& s, std::size_t index) {
  if (e.x >= s.width || e.y >= s.height) {
    throw RangeError("event " + std::to_string(index) + " at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                     ") outside " + std::to_string(s.width) + "x" + std::to_string(s.height) + " sensor");
  }
  if (e.p != 1 && e.p != -1) throw ParseError("polarity must be -1 or +1", index);
}

template <class T>
bool parse_field(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Event parse_csv_line(const std::string& line, std::size_t lineno) {
  std::string_view rest(line);
  std::string_view fields[4];
  for (int i = 0; i < 4; ++i) {
    const auto comma = rest.find(',');
    if ((i < 3) == (comma == std::string_view::npos)) throw ParseError("expected 4 comma-separated fields", lineno);
    fields[i] = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  std::uint64_t t = 0;
  unsigned x = 0, y = 0;
  int p = 0;
  if (!parse_field(fields[0], t) || !parse_field(fields[1], x) || !parse_field(fields[2], y) ||
      !parse_field(fields[3], p)) {
    throw ParseError("malformed event record", lineno);
  }
  if (x > 0xffff || y > 0xffff) throw RangeError("coordinate exceeds 16 bits at line " + std::to_string(lineno));
  if (p != 1 && p != -1) throw ParseError("polarity must be -1 or +1", lineno);
  return Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)};
}

constexpr std::size_t kRecordBytes = 13;

}  // namespace

EventWindow::EventWindow(SensorSize sensor, std::uint64_t t_start, std::uint64_t t_end, std::vector<Event> events)
    : sensor_(sensor), t_start_(t_start), t_end_(t_end), events_(std::move(events)) {
  if (t_end_ < t_start_) throw ArgumentError("window end precedes start");
  for (std::size_t i = 0; i < events_.size(); ++i) {
    validate(events_[i], sensor_, i);
    if (events_[i].t < t_start_ || events_[i].t >= t_end_) {
      throw RangeError("event " + std::to_string(i) + " time " + std::to_string(events_[i].t) + " outside window");
    }
  }
  std::stable_sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventWindow load_events(const std::filesystem::path& path, EventFormat format, SensorSize sensor,
                        std::optional<std::pair<std::uint64_t, std::uint64_t>> bounds) {
  std::vector<Event> events;
  if (format == EventFormat::Csv) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      Event e = parse_csv_line(line, lineno);
      validate(e, sensor, lineno);
      events.push_back(e);
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % kRecordBytes != 0) throw ParseError("truncated binary event record", bytes.size() / kRecordBytes);
    events.reserve(bytes.size() / kRecordBytes);
    for (std::size_t r = 0; r * kRecordBytes < bytes.size(); ++r) {
      const unsigned char* b = bytes.data() + r * kRecordBytes;
      Event e;
      e.t = 0;
      for (int i = 7; i >= 0; --i) e.t = (e.t << 8) | b[i];
      e.x = static_cast<std::uint16_t>(b[8] | (b[9] << 8));
      e.y = static_cast<std::uint16_t>(b[10] | (b[11] << 8));
      e.p = static_cast<std::int8_t>(b[12]);
      if (e.p != 1 && e.p != -1) throw ParseError("polarity must be -1 or +1", r);
      validate(e, sensor, r);
      events.push_back(e);
    }
  }
  std::uint64_t t0 = 0, t1 = 0;
  if (bounds) {
    std::tie(t0, t1) = *bounds;
  } else if (!events.empty()) {
    const auto [lo, hi] = std::minmax_element(events.begin(), events.end(),
                                              [](const Event& a, const Event& b) { return a.t < b.t; });
    t0 = lo->t;
    t1 = hi->t + 1;
  }
  return EventWindow(sensor, t0, t1, std::move(events));
}

void save_events(const std::filesystem::path& path, EventFormat format, const EventWindow& window) {
  if (format == EventFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& e : window.events()) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : window.events()) {
    unsigned char b[kRecordBytes];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((e.t >> (8 * i)) & 0xff);
    b[8] = static_cast<unsigned char>(e.x & 0xff);
    b[9] = static_cast<unsigned char>(e.x >> 8);
    b[10] = static_cast<unsigned char>(e.y & 0xff);
    b[11] = static_cast<unsigned char>(e.y >> 8);
    b[12] = static_cast<unsigned char>(e.p);
    out.write(reinterpret_cast<const char*>(b), kRecordBytes);
  }
}

EventWindow slice_window(const EventWindow& ev, std::uint64_t t0, std::uint64_t t1) {
  if (t0 >= t1) throw ArgumentError("slice_window requires t0 < t1");
  const auto& all = ev.events();
  auto lo = std::lower_bound(all.begin(), all.end(), t0, [](const Event& e, std::uint64_t t) { return e.t < t; });
  auto hi = std::lower_bound(lo, all.end(), t1, [](const Event& e, std::uint64_t t) { return e.t < t; });
  return EventWindow(ev.sensor(), t0, t1, std::vector<Event>(lo, hi));
}

Segmentation segment_reference_targets(const EventWindow& ev, std::uint64_t t_k, std::uint64_t t_k1, std::size_t n) {
  if (t_k >= t_k1) throw ArgumentError("segmentation requires T_k < T_k1");
  if (n == 0) throw ArgumentError("segmentation requires N >= 1");
  const std::uint64_t span = t_k1 - t_k;
  const std::uint64_t dt = span / n;
  if (dt == 0) throw ArgumentError("interval too short for N targets");
  if (t_k < dt || ev.t_start() > t_k - dt || ev.t_end() < t_k1) {
    throw CoverageError("event stream [" + std::to_string(ev.t_start()) + "," + std::to_string(ev.t_end()) +
                        ") does not cover [" + std::to_string(t_k >= dt ? t_k - dt : 0) + "," + std::to_string(t_k1) + ")");
  }
  Segmentation seg;
  seg.reference = slice_window(ev, t_k - dt, t_k);
  seg.targets.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::uint64_t a = t_k + (i - 1) * span / n;
    const std::uint64_t b = t_k + i * span / n;
    seg.targets.push_back(slice_window(ev, a, b));
  }
  return seg;
}

VoxelGrid voxelize(const EventWindow& win, std::size_t bins) {
  if (bins == 0) throw ArgumentError("voxelize requires B >= 1");
  VoxelGrid grid;
  grid.bins = bins;
  grid.height = win.sensor().height;
  grid.width = win.sensor().width;
  grid.values = Tensor(Shape{bins, grid.height, grid.width});
  if (win.empty()) return grid;

  std::vector<Event> ordered = win.events();
  std::sort(ordered.begin(), ordered.end(), [](const Event& a, const Event& b) {
    return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
  });
  const double t_first = static_cast<double>(ordered.front().t);
  const double t_last = static_cast<double>(ordered.back().t);
  const double span = t_last - t_first;
  const std::size_t plane = grid.height * grid.width;
  auto v = grid.values.mutable_data();
  for (const auto& e : ordered) {
    const double ts = span > 0.0 ? static_cast<double>(bins - 1) * (static_cast<double>(e.t) - t_first) / span : 0.0;
    const double lower = std::floor(ts);
    const std::size_t cell = static_cast<std::size_t>(e.y) * grid.width + e.x;
    const double frac = ts - lower;
    const auto b0 = static_cast<std::size_t>(lower);
    // k_b(b - t*) is nonzero only for the two bins bracketing t*.
    v[b0 * plane + cell] += e.p * (1.0 - frac);
    if (frac > 0.0 && b0 + 1 < bins) v[(b0 + 1) * plane + cell] += e.p * frac;
  }
  return grid;
}

}  // namespace evflow
