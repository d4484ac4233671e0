#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace evadv {

/// One brightness-change record. Raw streams carry microseconds in `t`,
/// normalized streams carry (0, 1], and t == 0 marks a null event.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;
  std::int8_t p = 1;  // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

enum class TimeState { Raw, Normalized };

/// Canonical (t, y, x, p) ordering used for sorting and tie-breaking.
bool canonical_less(const Event& a, const Event& b);

struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  TimeState time_state = TimeState::Raw;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Default minimum time resolution in normalized units.
inline constexpr double kDefaultMinResolution = 1e-5;

/// Largest raw timestamp representable in a 5-byte record (23 bits).
inline constexpr std::uint32_t kMaxRawTimestamp = (1u << 23) - 1;

inline constexpr std::size_t kRecordBytes = 5;

void sort_canonical(EventStream& stream);

/// Decodes 5-byte ATIS records: x, y, then polarity in the top bit of byte 2
/// and a 23-bit big-endian microsecond timestamp in the remaining bits.
EventStream decode_stream(std::span<const std::uint8_t> bytes, int width, int height);

std::vector<std::uint8_t> encode_stream(const EventStream& stream);

/// Divides every timestamp by the stream maximum. Raw zero timestamps are
/// lifted to half a microsecond first so no real event lands on t = 0.
EventStream normalize_times(const EventStream& stream);

/// Keeps the first half of normalized time and rescales it back to (0, 1].
EventStream halve_frequency(const EventStream& stream);

/// Spreads events sharing (x, y, p) so that consecutive ones are at least
/// `lambda` apart, keeping every time inside (0, 1]. Stacks that would run
/// past 1 are packed downward from the boundary instead.
EventStream enforce_min_resolution(const EventStream& stream, double lambda);

/// Per-event admissible interval used by the bounded variant below.
struct TimeBound {
  double lo;
  double hi;
};

/// Bounded variant: event i must end up in bounds[i]. Groups that already
/// satisfy the spacing are left untouched. Operates on `events` in place and
/// does not reorder them. Throws ResolutionInfeasible when no placement fits.
void separate_within_bounds(std::span<Event> events, std::span<const TimeBound> bounds, double lambda);

/// Smallest spacing found between two events sharing (x, y, p); +inf if none.
double min_same_location_gap(std::span<const Event> events);

/// Number of distinct (x, y, p) triples present.
std::size_t distinct_locations(std::span<const Event> events);

}  // namespace evadv
