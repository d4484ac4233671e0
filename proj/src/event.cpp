#include "evadv/event.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "evadv/error.hpp"

namespace evadv {

namespace {

std::uint64_t location_key(const Event& e) {
  return (static_cast<std::uint64_t>(e.y) << 17) | (static_cast<std::uint64_t>(e.x) << 1) |
         (e.p > 0 ? 1u : 0u);
}

// Indices of `events` ordered by (location, t, index).
std::vector<std::size_t> group_order(std::span<const Event> events) {
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = location_key(events[a]);
    const auto kb = location_key(events[b]);
    if (ka != kb) return ka < kb;
    if (events[a].t != events[b].t) return events[a].t < events[b].t;
    return a < b;
  });
  return order;
}

constexpr double kGapTolerance = 1e-12;

// Places one same-location group; returns false when no placement fits.
bool place_group(std::span<Event> events, std::span<const TimeBound> bounds, std::vector<std::size_t> group,
                 double lambda) {
  const std::size_t n = group.size();
  std::vector<double> placed(n);

  // Pass 1: keep the order of the desired times, push forward then pull back
  // under the upper bounds.
  std::sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::clamp(events[a].t, bounds[a].lo, bounds[a].hi);
    const double db = std::clamp(events[b].t, bounds[b].lo, bounds[b].hi);
    if (da != db) return da < db;
    return a < b;
  });
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = group[k];
    const double desired = std::clamp(events[i].t, bounds[i].lo, bounds[i].hi);
    placed[k] = k == 0 ? desired : std::max(desired, placed[k - 1] + lambda);
  }
  bool ok = true;
  for (std::size_t k = n; k-- > 0;) {
    const auto i = group[k];
    double v = std::min(placed[k], bounds[i].hi);
    if (k + 1 < n) v = std::min(v, placed[k + 1] - lambda);
    placed[k] = v;
    if (v < bounds[i].lo) ok = false;
  }
  if (!ok) {
    // Pass 2: earliest-deadline schedule, feasible whenever any placement is.
    std::sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(bounds[a].hi, bounds[a].lo, a) < std::tie(bounds[b].hi, bounds[b].lo, b);
    });
    ok = true;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = group[k];
      placed[k] = k == 0 ? bounds[i].lo : std::max(bounds[i].lo, placed[k - 1] + lambda);
      if (placed[k] > bounds[i].hi) ok = false;
    }
    if (!ok) return false;
  }
  for (std::size_t k = 0; k < n; ++k) events[group[k]].t = placed[k];
  return true;
}

}  // namespace

bool canonical_less(const Event& a, const Event& b) {
  return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
}

void sort_canonical(EventStream& stream) {
  if (!std::is_sorted(stream.events.begin(), stream.events.end(), canonical_less)) {
    std::stable_sort(stream.events.begin(), stream.events.end(), canonical_less);
  }
}

EventStream decode_stream(std::span<const std::uint8_t> bytes, int width, int height) {
  if (bytes.size() % kRecordBytes != 0) {
    throw Error(ErrorCode::TruncatedRecord, "byte length " + std::to_string(bytes.size()) + " is not a multiple of 5");
  }
  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.time_state = TimeState::Raw;
  stream.events.reserve(bytes.size() / kRecordBytes);
  for (std::size_t off = 0; off < bytes.size(); off += kRecordBytes) {
    const auto* r = bytes.data() + off;
    Event e;
    e.x = r[0];
    e.y = r[1];
    e.p = (r[2] & 0x80) ? 1 : -1;
    e.t = static_cast<double>((static_cast<std::uint32_t>(r[2] & 0x7f) << 16) |
                              (static_cast<std::uint32_t>(r[3]) << 8) | r[4]);
    if (e.x >= width || e.y >= height) {
      throw Error(ErrorCode::CoordOutOfRange, "record " + std::to_string(off / kRecordBytes) + " at (" +
                                                  std::to_string(e.x) + ", " + std::to_string(e.y) + ")");
    }
    stream.events.push_back(e);
  }
  sort_canonical(stream);
  return stream;
}

std::vector<std::uint8_t> encode_stream(const EventStream& stream) {
  if (stream.time_state != TimeState::Raw) {
    throw Error(ErrorCode::InvalidConfig, "only raw streams can be encoded");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(stream.size() * kRecordBytes);
  for (const auto& e : stream.events) {
    if (e.x > 0xff || e.y > 0xff) throw Error(ErrorCode::CoordOutOfRange, "coordinate exceeds one byte");
    const double rounded = std::nearbyint(e.t);
    if (!(rounded >= 0.0) || rounded > kMaxRawTimestamp) {
      throw Error(ErrorCode::TimestampOverflow, "timestamp " + std::to_string(e.t) + " us");
    }
    const auto t = static_cast<std::uint32_t>(rounded);
    bytes.push_back(static_cast<std::uint8_t>(e.x));
    bytes.push_back(static_cast<std::uint8_t>(e.y));
    bytes.push_back(static_cast<std::uint8_t>((e.p > 0 ? 0x80 : 0x00) | ((t >> 16) & 0x7f)));
    bytes.push_back(static_cast<std::uint8_t>((t >> 8) & 0xff));
    bytes.push_back(static_cast<std::uint8_t>(t & 0xff));
  }
  return bytes;
}

EventStream normalize_times(const EventStream& stream) {
  if (stream.empty()) throw Error(ErrorCode::EmptyStream, "cannot normalize an empty stream");
  EventStream out = stream;
  if (stream.time_state == TimeState::Raw) {
    for (auto& e : out.events) e.t = std::max(e.t, 0.5);
  }
  double t_max = 0.0;
  for (const auto& e : out.events) t_max = std::max(t_max, e.t);
  if (!(t_max > 0.0)) throw Error(ErrorCode::EmptyStream, "stream holds only null events");
  for (auto& e : out.events) e.t /= t_max;
  out.time_state = TimeState::Normalized;
  sort_canonical(out);
  return out;
}

EventStream halve_frequency(const EventStream& stream) {
  if (stream.time_state != TimeState::Normalized) {
    throw Error(ErrorCode::InvalidConfig, "halve_frequency expects a normalized stream");
  }
  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.time_state = TimeState::Normalized;
  double t_max = 0.0;
  for (const auto& e : stream.events) {
    if (e.t <= 0.5) {
      out.events.push_back(e);
      t_max = std::max(t_max, e.t);
    }
  }
  if (!(t_max > 0.0)) throw Error(ErrorCode::EmptyStream, "no events in the first half");
  for (auto& e : out.events) e.t /= t_max;
  sort_canonical(out);
  return out;
}

void separate_within_bounds(std::span<Event> events, std::span<const TimeBound> bounds, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "minimum resolution must be positive");
  if (bounds.size() != events.size()) throw Error(ErrorCode::ShapeMismatch, "one bound per event required");
  const auto order = group_order(events);
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    const auto key = location_key(events[order[begin]]);
    while (end < order.size() && location_key(events[order[end]]) == key) ++end;

    bool needs_fix = false;
    for (std::size_t k = begin; k < end && !needs_fix; ++k) {
      const auto i = order[k];
      if (events[i].t < bounds[i].lo || events[i].t > bounds[i].hi) needs_fix = true;
      if (k > begin && events[i].t - events[order[k - 1]].t < lambda - kGapTolerance) needs_fix = true;
    }
    if (needs_fix) {
      std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      if (!place_group(events, bounds, std::move(group), lambda)) {
        const auto& e = events[order[begin]];
        throw Error(ErrorCode::ResolutionInfeasible, std::to_string(end - begin) + " events at (" +
                                                         std::to_string(e.x) + ", " + std::to_string(e.y) +
                                                         ") do not fit with spacing " + std::to_string(lambda));
      }
    }
    begin = end;
  }
}

EventStream enforce_min_resolution(const EventStream& stream, double lambda) {
  if (stream.time_state != TimeState::Normalized) {
    throw Error(ErrorCode::InvalidConfig, "enforce_min_resolution expects a normalized stream");
  }
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "minimum resolution must be positive");
  EventStream out = stream;
  std::vector<TimeBound> bounds(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = out.events[i].t;
    bounds[i] = {t > 0.0 ? std::min(t, lambda) : lambda, 1.0};
  }
  separate_within_bounds(out.events, bounds, lambda);
  sort_canonical(out);
  return out;
}

double min_same_location_gap(std::span<const Event> events) {
  const auto order = group_order(events);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& a = events[order[k - 1]];
    const auto& b = events[order[k]];
    if (location_key(a) == location_key(b)) gap = std::min(gap, b.t - a.t);
  }
  return gap;
}

std::size_t distinct_locations(std::span<const Event> events) {
  std::vector<std::uint64_t> keys;
  keys.reserve(events.size());
  for (const auto& e : events) keys.push_back(location_key(e));
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

}  // namespace evadv
