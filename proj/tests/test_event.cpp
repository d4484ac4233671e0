#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <tuple>

#include "evadv/event.hpp"
#include "support.hpp"

using namespace evadv;
using evtest::code_of;

namespace {

EventStream raw_stream(std::vector<Event> events, int w = 64, int h = 64) {
  EventStream s;
  s.events = std::move(events);
  s.width = w;
  s.height = h;
  s.time_state = TimeState::Raw;
  return s;
}

EventStream normalized(std::vector<Event> events, int w = 8, int h = 8) {
  EventStream s = raw_stream(std::move(events), w, h);
  s.time_state = TimeState::Normalized;
  return s;
}

std::vector<double> times(const EventStream& s) {
  std::vector<double> out;
  for (const auto& e : s.events) out.push_back(e.t);
  return out;
}

}  // namespace

TEST_CASE("decode single record") {
  const std::vector<std::uint8_t> bytes{0x12, 0x34, 0x80, 0x00, 0x64};
  const auto s = decode_stream(bytes, 64, 64);
  REQUIRE(s.size() == 1);
  CHECK(s.events[0].x == 18);
  CHECK(s.events[0].y == 52);
  CHECK(s.events[0].p == 1);
  CHECK(s.events[0].t == 100.0);
  CHECK(s.time_state == TimeState::Raw);
}

TEST_CASE("encode single event") {
  const auto bytes = encode_stream(raw_stream({Event{18, 52, 100.0, 1}}));
  CHECK(bytes == std::vector<std::uint8_t>{0x12, 0x34, 0x80, 0x00, 0x64});
}

TEST_CASE("negative polarity and the full timestamp range") {
  const auto bytes = encode_stream(raw_stream({Event{1, 2, static_cast<double>(kMaxRawTimestamp), -1}}));
  CHECK(bytes == std::vector<std::uint8_t>{0x01, 0x02, 0x7f, 0xff, 0xff});
  const auto back = decode_stream(bytes, 64, 64);
  CHECK(back.events[0].p == -1);
  CHECK(back.events[0].t == static_cast<double>(kMaxRawTimestamp));
}

TEST_CASE("empty inputs") {
  CHECK(decode_stream({}, 4, 4).empty());
  CHECK(encode_stream(raw_stream({})).empty());
}

TEST_CASE("decode errors") {
  const std::vector<std::uint8_t> four{1, 2, 3, 4};
  CHECK(code_of([&] { decode_stream(four, 64, 64); }) == ErrorCode::TruncatedRecord);
  const std::vector<std::uint8_t> far{0x40, 0x01, 0x80, 0x00, 0x01};
  CHECK(code_of([&] { decode_stream(far, 64, 64); }) == ErrorCode::CoordOutOfRange);
  const std::vector<std::uint8_t> low{0x01, 0x40, 0x80, 0x00, 0x01};
  CHECK(code_of([&] { decode_stream(low, 64, 64); }) == ErrorCode::CoordOutOfRange);
}

TEST_CASE("encode overflow") {
  const auto s = raw_stream({Event{0, 0, static_cast<double>(kMaxRawTimestamp) + 1.0, 1}});
  CHECK(code_of([&] { encode_stream(s); }) == ErrorCode::TimestampOverflow);
}

TEST_CASE("codec round trip on random records") {
  Rng rng(2024);
  const std::size_t n = 100000;
  std::vector<std::uint8_t> bytes(n * kRecordBytes);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(uniform_index(rng, 256));
  // byte-level: decode then encode reproduces the records up to canonical order
  const auto s = decode_stream(bytes, 256, 256);
  REQUIRE(s.size() == n);
  const auto again = encode_stream(s);
  std::multiset<std::vector<std::uint8_t>> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.insert({bytes.begin() + static_cast<std::ptrdiff_t>(i * 5), bytes.begin() + static_cast<std::ptrdiff_t>(i * 5 + 5)});
    b.insert({again.begin() + static_cast<std::ptrdiff_t>(i * 5), again.begin() + static_cast<std::ptrdiff_t>(i * 5 + 5)});
  }
  CHECK(a == b);
  // stream-level: a sorted stream survives encode then decode exactly
  CHECK(decode_stream(again, 256, 256) == s);
}

TEST_CASE("decoded streams are canonically sorted") {
  const std::vector<std::uint8_t> bytes{0x01, 0x01, 0x80, 0x00, 0x09, 0x00, 0x02, 0x00, 0x00, 0x03,
                                        0x00, 0x01, 0x80, 0x00, 0x03};
  const auto s = decode_stream(bytes, 4, 4);
  REQUIRE(s.size() == 3);
  CHECK(s.events[0] == Event{0, 1, 3.0, 1});
  CHECK(s.events[1] == Event{0, 2, 3.0, -1});
  CHECK(s.events[2].t == 9.0);
}

TEST_CASE("normalize examples") {
  auto s = normalize_times(raw_stream({{0, 0, 100, 1}, {1, 0, 200, 1}, {2, 0, 400, 1}}));
  CHECK(times(s) == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(s.time_state == TimeState::Normalized);
  CHECK(times(normalize_times(raw_stream({{3, 3, 77, -1}}))) == std::vector<double>{1.0});
  CHECK(code_of([] { normalize_times(raw_stream({})); }) == ErrorCode::EmptyStream);
}

TEST_CASE("normalize property and idempotence") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Event> ev;
    const auto n = 1 + uniform_index(rng, 200);
    for (std::size_t i = 0; i < n; ++i) {
      ev.push_back({static_cast<std::uint16_t>(uniform_index(rng, 64)), static_cast<std::uint16_t>(uniform_index(rng, 64)),
                    static_cast<double>(uniform_index(rng, 5000)), 1});
    }
    auto raw = raw_stream(ev);
    sort_canonical(raw);
    const auto s = normalize_times(raw);
    double lo = 2.0, hi = 0.0;
    for (const auto& e : s.events) {
      lo = std::min(lo, e.t);
      hi = std::max(hi, e.t);
    }
    CHECK(hi == 1.0);
    CHECK(lo > 0.0);
    CHECK(normalize_times(s) == s);
  }
}

TEST_CASE("halve frequency") {
  const auto s = halve_frequency(normalized({{0, 0, 0.2, 1}, {0, 1, 0.4, 1}, {0, 2, 0.8, 1}}));
  REQUIRE(s.size() == 2);
  CHECK(s.events[0].t == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.events[1].t == 1.0);

  const auto all = halve_frequency(normalized({{0, 0, 0.1, 1}, {0, 1, 0.25, -1}}));
  CHECK(all.size() == 2);
  CHECK(all.events[1].t == 1.0);

  CHECK(code_of([] { halve_frequency(normalized({{0, 0, 0.7, 1}})); }) == ErrorCode::EmptyStream);

  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto r = evtest::random_stream(rng, 8, 8, 100);
    sort_canonical(r);
    const auto kept = std::count_if(r.events.begin(), r.events.end(), [](const Event& e) { return e.t <= 0.5; });
    if (kept == 0) continue;
    CHECK(halve_frequency(r).size() == static_cast<std::size_t>(kept));
  }
}

TEST_CASE("min resolution examples") {
  const auto a = enforce_min_resolution(normalized({{3, 3, 0.5, 1}, {3, 3, 0.5, 1}}), 0.001);
  CHECK(times(a) == std::vector<double>{0.5, 0.501});

  const auto clean = normalized({{0, 0, 0.1, 1}, {0, 0, 0.3, 1}, {1, 0, 0.3, 1}});
  CHECK(enforce_min_resolution(clean, 0.001) == clean);

  const auto b = enforce_min_resolution(normalized({{1, 1, 1.0, 1}, {1, 1, 1.0, 1}, {1, 1, 1.0, 1}}), 0.01);
  REQUIRE(b.size() == 3);
  std::vector<double> t = times(b);
  std::sort(t.rbegin(), t.rend());
  CHECK(t[0] == 1.0);
  CHECK(t[1] == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(t[2] == doctest::Approx(0.98).epsilon(1e-12));

  std::vector<Event> crowd(11, Event{0, 0, 0.5, 1});
  CHECK(code_of([&] { enforce_min_resolution(normalized(crowd), 0.1); }) == ErrorCode::ResolutionInfeasible);
}

TEST_CASE("min resolution property") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto s = evtest::random_stream(rng, 3, 3, 300);
    // snap to a coarse lattice so collisions are common
    for (auto& e : s.events) e.t = std::max(1, static_cast<int>(std::ceil(e.t * 20))) / 20.0;
    const double lambda = trial % 2 ? 1e-3 : 1e-5;
    const auto out = enforce_min_resolution(s, lambda);
    CHECK(out.size() == s.size());
    CHECK(min_same_location_gap(out.events) >= lambda - 1e-12);
    for (const auto& e : out.events) {
      CHECK(e.t > 0.0);
      CHECK(e.t <= 1.0);
    }
    CHECK(std::is_sorted(out.events.begin(), out.events.end(), canonical_less));
    std::set<std::tuple<int, int, int, double>> seen;
    for (const auto& e : out.events) CHECK(seen.insert({e.x, e.y, e.p, e.t}).second);
  }
}

TEST_CASE("bounded separation keeps each event inside its interval") {
  std::vector<Event> ev{{0, 0, 0.5, 1}, {0, 0, 0.5, 1}, {0, 0, 0.5, 1}};
  std::vector<TimeBound> bounds{{0.45, 0.5}, {0.5, 0.5}, {0.5, 0.55}};
  separate_within_bounds(ev, bounds, 0.01);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(ev[i].t >= bounds[i].lo);
    CHECK(ev[i].t <= bounds[i].hi);
  }
  CHECK(min_same_location_gap(ev) >= 0.01 - 1e-12);

  std::vector<Event> tight{{0, 0, 0.5, 1}, {0, 0, 0.5, 1}};
  std::vector<TimeBound> none{{0.5, 0.5}, {0.5, 0.5}};
  CHECK(code_of([&] { separate_within_bounds(tight, none, 0.01); }) == ErrorCode::ResolutionInfeasible);
}

TEST_CASE("location helpers") {
  const std::vector<Event> ev{{0, 0, 0.1, 1}, {0, 0, 0.4, 1}, {0, 0, 0.2, -1}, {1, 0, 0.1, 1}};
  CHECK(distinct_locations(ev) == 3);
  CHECK(min_same_location_gap(ev) == doctest::Approx(0.3));
  CHECK(std::isinf(min_same_location_gap(std::vector<Event>{{0, 0, 0.1, 1}})));
}
