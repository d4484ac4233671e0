#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evadv/attack.hpp"
#include "support.hpp"

using namespace evadv;
using evtest::code_of;
using evtest::random_stream;
using evtest::rel_err;

namespace {

constexpr int kSide = 8;

Classifier victim(int bins, std::uint64_t seed, Projection proj = Projection::None) {
  return make_classifier(make_grid_spec(kSide, kSide, bins, KernelKind::Trilinear, proj), 4, seed);
}

Classifier silent(int bins) {
  auto clf = victim(bins, 1);
  const auto l = clf.model.layout();
  std::fill(clf.model.data.begin() + static_cast<std::ptrdiff_t>(l.fc_w), clf.model.data.end(), 0.0f);
  clf.model.touch();
  return clf;
}

EventStream spaced_stream(Rng& rng, std::size_t n) {
  auto s = random_stream(rng, kSide, kSide, n, 0.02, 0.98);
  return enforce_min_resolution(s, kDefaultMinResolution);
}

// Loss of the objective label in 64-bit, evaluated on the same weights.
double loss64(const Classifier& clf, const EventStream& s, int label) {
  const auto rep = represent(s, clf.spec);
  const auto m = cast_model<double>(clf.model);
  const auto c = forward<double>(m, rep.values);
  return cross_entropy<double>(c.logits, label);
}

bool away_from_kinks(const GridSpec& spec, double t, double margin) {
  for (int n = 0; n <= spec.bins + 1; ++n) {
    const double d = std::abs(t - bin_time(spec, n));
    if (d < margin || std::abs(d - spec.kernel.tau) < margin) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("effective step and radius") {
  AttackConfig cfg;
  CHECK(cfg.effective_step() == doctest::Approx(0.1));
  CHECK(cfg.effective_bound() == doctest::Approx(0.2));
  cfg.bins = 1;
  CHECK(cfg.effective_step() == 0.1);
  CHECK(cfg.effective_bound() == 0.2);
  cfg.bins = 10;
  CHECK(cfg.effective_step() == doctest::Approx(0.05));
  cfg.frequency = 0.5;
  CHECK(cfg.effective_step() == doctest::Approx(0.1));
  cfg.epsilon = 0.15;
  CHECK(cfg.effective_bound() == doctest::Approx(0.03));
}

TEST_CASE("config validation") {
  AttackConfig a;
  a.bins = 0;
  CHECK(code_of([&] { validate(a); }) == ErrorCode::InvalidConfig);
  a = AttackConfig{};
  a.frequency = 0.0;
  CHECK(code_of([&] { validate(a); }) == ErrorCode::InvalidConfig);
  a = AttackConfig{};
  a.epsilon = -0.1;
  CHECK(code_of([&] { validate(a); }) == ErrorCode::InvalidConfig);
  NullConfig n;
  n.per_location = 0;
  CHECK(code_of([&] { validate(n); }) == ErrorCode::InvalidConfig);
  n = NullConfig{};
  n.top_fraction = 0.0;
  CHECK(code_of([&] { validate(n); }) == ErrorCode::InvalidConfig);
  n = NullConfig{};
  n.lambda = 0.0;
  CHECK(code_of([&] { validate(n); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("projected step hand simulation") {
  const TimeBound ball{0.20, 0.40};
  double t = 0.30;
  const double expect[] = {0.35, 0.40, 0.40};
  for (double e : expect) {
    t = pgd_step(t, 1.0, 0.05, ball, 1.0);
    CHECK(t == doctest::Approx(e).epsilon(1e-15));
  }
  CHECK(pgd_step(0.3, 0.0, 0.05, ball, 1.0) == 0.3);
  CHECK(pgd_step(0.3, 2.0, 0.05, ball, -1.0) == doctest::Approx(0.25));
}

TEST_CASE("time gradients") {
  Rng rng(1);
  const auto s = spaced_stream(rng, 60);
  for (double g : grad_wrt_times(silent(3), s, Objective{})) CHECK(g == 0.0);

  // single-event streams and a mixed stream against a 64-bit loss oracle
  const auto clf = victim(3, 2);
  int probes = 0;
  for (int trial = 0; trial < 60; ++trial) {
    EventStream one = trial < 30 ? random_stream(rng, kSide, kSide, 1) : spaced_stream(rng, 20);
    const int label = trial % 4;
    const auto grads = grad_wrt_times(clf, one, Objective{ObjectiveMode::Untargeted, label});
    REQUIRE(grads.size() == one.size());
    const std::size_t i = uniform_index(rng, one.size());
    const double t0 = one.events[i].t;
    if (!away_from_kinks(clf.spec, t0, 1e-3) || t0 > 1.0 - 1e-5) continue;
    auto f = [&](double t) {
      EventStream q = one;
      q.events[i].t = t;
      return loss64(clf, q, label);
    };
    const double fd = evtest::central_diff(f, t0, 1e-6);
    CHECK(rel_err(grads[i], fd, 1e-4) <= 1e-3);
    ++probes;
  }
  CHECK(probes > 30);

  // an event whose kernel windows all miss the bins has no gradient
  Classifier narrow = victim(2, 3);
  narrow.spec.kernel = make_trilinear(0.1);
  EventStream lone;
  lone.width = lone.height = kSide;
  lone.time_state = TimeState::Normalized;
  lone.events.push_back(Event{1, 1, 0.25, 1});
  CHECK(grad_wrt_times(narrow, lone, Objective{})[0] == 0.0);
}

TEST_CASE("shift attack respects the projection contract") {
  Rng rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const int bins = 1 + trial % 5;
    const auto clf = victim(bins, 10 + trial);
    const auto s = spaced_stream(rng, 150);
    AttackConfig cfg;
    cfg.bins = bins;
    if (trial % 3 == 0) cfg.epsilon = 0.3;
    const Objective obj{trial % 2 ? ObjectiveMode::Targeted : ObjectiveMode::Untargeted, trial % 4};
    const auto r = shift_attack(clf, s, cfg, obj);
    REQUIRE(r.originals.size() == s.size());
    CHECK(r.added.empty());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(r.originals[i].t - s.events[i].t) <= cfg.effective_bound() + 1e-9);
      CHECK(r.originals[i].x == s.events[i].x);
      CHECK(r.originals[i].y == s.events[i].y);
      CHECK(r.originals[i].p == s.events[i].p);
      CHECK(r.originals[i].t > 0.0);
      CHECK(r.originals[i].t <= 1.0);
    }
    CHECK(r.stream.size() == s.size());
    CHECK(min_same_location_gap(r.stream.events) >= cfg.lambda - 1e-12);
    CHECK(std::is_sorted(r.stream.events.begin(), r.stream.events.end(), canonical_less));
  }
}

TEST_CASE("zero gradients or zero iterations leave the stream alone") {
  Rng rng(4);
  auto s = spaced_stream(rng, 80);
  sort_canonical(s);
  AttackConfig cfg;
  cfg.bins = 3;
  CHECK(shift_attack(silent(3), s, cfg, Objective{}).stream == s);
  cfg.iterations = 0;
  CHECK(shift_attack(victim(3, 5), s, cfg, Objective{}).stream == s);
}

TEST_CASE("one untargeted step never decreases the linearized loss") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto clf = victim(2 + trial % 3, 20 + trial);
    const auto s = spaced_stream(rng, 100);
    AttackConfig cfg;
    cfg.bins = clf.spec.bins;
    cfg.iterations = 1;
    const Objective obj{ObjectiveMode::Untargeted, trial % 4};
    const auto g = grad_wrt_times(clf, s, obj);
    const auto r = shift_attack(clf, s, cfg, obj);
    double inner = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double dt = r.originals[i].t - s.events[i].t;
      CHECK(g[i] * dt >= 0.0);
      inner += g[i] * dt;
    }
    CHECK(inner >= 0.0);
  }
}

TEST_CASE("null event counts") {
  EventStream empty;
  empty.width = empty.height = 2;
  empty.time_state = TimeState::Normalized;
  CHECK(make_null_events(empty, 1).size() == 8);

  EventStream full = empty;
  for (std::uint16_t x = 0; x < 2; ++x) {
    for (std::uint16_t y = 0; y < 2; ++y) {
      full.events.push_back({x, y, 0.5, 1});
      full.events.push_back({x, y, 0.6, -1});
    }
  }
  CHECK(make_null_events(full, 5).empty());

  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_stream(rng, kSide, kSide, uniform_index(rng, 200));
    const int m = 1 + trial % 5;
    const auto nulls = make_null_events(s, m);
    CHECK(nulls.size() == m * (2u * kSide * kSide - distinct_locations(s.events)));
    for (const auto& e : nulls) {
      CHECK(e.t == 0.0);
      for (const auto& o : s.events) CHECK(!(o.x == e.x && o.y == e.y && o.p == e.p));
    }
  }
}

TEST_CASE("generation keeps exactly the top fraction") {
  // 128 locations, 28 occupied, one null each: 100 candidates, keep 1.
  EventStream s;
  s.width = s.height = kSide;
  s.time_state = TimeState::Normalized;
  for (int i = 0; i < 28; ++i) {
    s.events.push_back(Event{static_cast<std::uint16_t>(i % kSide), static_cast<std::uint16_t>(i / kSide),
                             0.1 + 0.03 * i, 1});
  }
  NullConfig cfg;
  cfg.per_location = 1;
  cfg.top_fraction = 0.01;
  REQUIRE(make_null_events(s, 1).size() == 100);
  const auto r = generate_attack(victim(3, 7), s, cfg, Objective{}, 11);
  CHECK(r.added.size() == 1);
  CHECK(r.stream.size() == 29);
}

TEST_CASE("generation freezes originals and stays in its radius") {
  Rng rng(8);
  for (int trial = 0; trial < 8; ++trial) {
    const auto clf = victim(1 + trial % 5, 30 + trial);
    const auto s = spaced_stream(rng, 120);
    NullConfig cfg;
    cfg.top_fraction = 0.05;
    const Objective obj{trial % 2 ? ObjectiveMode::Targeted : ObjectiveMode::Untargeted, 1};
    const auto r = generate_attack(clf, s, cfg, obj, 100 + trial);
    CHECK(r.originals == s.events);
    REQUIRE(r.added.size() == r.added_init.size());
    CHECK(!r.added.empty());
    for (std::size_t k = 0; k < r.added.size(); ++k) {
      CHECK(std::abs(r.added[k].t - r.added_init[k]) <= cfg.epsilon + 1e-9);
      CHECK(r.added[k].t > 0.0);
      CHECK(r.added[k].t <= 1.0);
    }
    CHECK(min_same_location_gap(r.stream.events) >= cfg.lambda - 1e-12);
    const auto again = generate_attack(clf, s, cfg, obj, 100 + trial);
    CHECK(again.stream == r.stream);
  }
}

TEST_CASE("generation needs an empty location") {
  EventStream full;
  full.width = full.height = 4;
  full.time_state = TimeState::Normalized;
  for (std::uint16_t x = 0; x < 4; ++x) {
    for (std::uint16_t y = 0; y < 4; ++y) {
      full.events.push_back({x, y, 0.25 + 0.01 * x, 1});
      full.events.push_back({x, y, 0.5 + 0.01 * y, -1});
    }
  }
  const auto clf = make_classifier(make_grid_spec(4, 4, 2), 4, 1);
  CHECK(code_of([&] { generate_attack(clf, full, NullConfig{}, Objective{}, 0); }) == ErrorCode::NoCandidates);

  AttackConfig cfg;
  cfg.bins = 2;
  const auto shift = shift_attack(clf, full, cfg, Objective{});
  const auto comb = combined_attack(clf, full, cfg, NullConfig{}, Objective{}, 0);
  CHECK(comb.stream == shift.stream);
  CHECK(comb.added.empty());
}

TEST_CASE("combined attack with an idle shift stage equals generation") {
  Rng rng(9);
  const auto clf = victim(3, 40);
  const auto s = spaced_stream(rng, 100);
  AttackConfig cfg;
  cfg.bins = 3;
  cfg.iterations = 0;
  NullConfig ncfg;
  ncfg.top_fraction = 0.03;
  const auto gen = generate_attack(clf, s, ncfg, Objective{}, 5);
  const auto comb = combined_attack(clf, s, cfg, ncfg, Objective{}, 5);
  CHECK(comb.stream == gen.stream);
}

TEST_CASE("combined attack bounds") {
  Rng rng(10);
  for (int trial = 0; trial < 6; ++trial) {
    const auto clf = victim(2 + trial % 4, 50 + trial, trial % 2 ? Projection::PolarityAvg : Projection::TemporalAvg);
    const auto s = spaced_stream(rng, 150);
    AttackConfig cfg;
    cfg.bins = clf.spec.bins;
    NullConfig ncfg;
    ncfg.top_fraction = 0.04;
    const auto r = combined_attack(clf, s, cfg, ncfg, Objective{}, 70 + trial);
    CHECK(r.stream.size() == s.size() + r.added.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(r.originals[i].t - s.events[i].t) <= cfg.effective_bound() + 1e-9);
    }
    for (std::size_t k = 0; k < r.added.size(); ++k) {
      CHECK(std::abs(r.added[k].t - r.added_init[k]) <= ncfg.epsilon + 1e-9);
    }
    CHECK(r.max_shift <= cfg.effective_bound() + 1e-9);
  }
}

TEST_CASE("verify_attack catches violations") {
  Rng rng(11);
  const auto clf = victim(3, 60);
  const auto s = spaced_stream(rng, 60);
  AttackConfig cfg;
  cfg.bins = 3;
  auto r = shift_attack(clf, s, cfg, Objective{});
  CHECK_NOTHROW(verify_attack(s, r, cfg.lambda));

  auto moved = r;
  moved.originals[0].t = s.events[0].t > 0.5 ? s.events[0].t - 0.25 : s.events[0].t + 0.25;
  CHECK(code_of([&] { verify_attack(s, moved, cfg.lambda); }) == ErrorCode::ConstraintViolation);

  auto relocated = r;
  relocated.originals[0].p = static_cast<std::int8_t>(-relocated.originals[0].p);
  CHECK(code_of([&] { verify_attack(s, relocated, cfg.lambda); }) == ErrorCode::ConstraintViolation);

  auto zero = r;
  zero.stream.events[0].t = 0.0;
  CHECK(code_of([&] { verify_attack(s, zero, cfg.lambda); }) == ErrorCode::ConstraintViolation);

  auto crowded = r;
  crowded.stream.events.push_back(crowded.stream.events[0]);
  crowded.originals.push_back(crowded.originals[0]);
  CHECK(code_of([&] { verify_attack(s, crowded, cfg.lambda); }) == ErrorCode::ConstraintViolation);
}

TEST_CASE("attacks check their inputs") {
  Rng rng(12);
  const auto clf = victim(2, 1);
  auto wrong = random_stream(rng, kSide + 4, kSide, 10);
  CHECK(code_of([&] { grad_wrt_times(clf, wrong, Objective{}); }) == ErrorCode::GeometryMismatch);
  auto raw = random_stream(rng, kSide, kSide, 10);
  raw.time_state = TimeState::Raw;
  AttackConfig cfg;
  CHECK(code_of([&] { shift_attack(clf, raw, cfg, Objective{}); }) == ErrorCode::InvalidConfig);
}
