#include "evadv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "evadv/error.hpp"
#include "evadv/random.hpp"

namespace evadv {

namespace {

constexpr double kBoundTolerance = 1e-9;
constexpr double kGapTolerance = 1e-12;

// Interval kept by projection: anchor +- radius intersected with (0, 1].
TimeBound ball(double anchor, double radius, double lambda) {
  const double floor = anchor > 0.0 ? std::min(lambda, anchor) : lambda;
  return {std::max(anchor - radius, floor), std::min(anchor + radius, 1.0)};
}

TimeBound intersect(TimeBound a, TimeBound b) { return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

// Events that may move, with their projection interval and step.
struct Mover {
  std::size_t index;
  TimeBound bound;
  double step;
};

// Signed-gradient PGD over the movers; everything else in `work` is frozen.
void run_pgd(const Classifier& clf, EventStream& work, const std::vector<Mover>& movers, int iterations,
             const Objective& objective) {
  const double dir = objective.direction();
  for (int it = 0; it < iterations; ++it) {
    const auto grads = grad_wrt_times(clf, work, objective);
    for (const auto& m : movers) {
      double& t = work.events[m.index].t;
      t = pgd_step(t, grads[m.index], m.step, m.bound, dir);
    }
  }
}

EventStream assemble(const EventStream& like, const std::vector<Event>& originals, const std::vector<Event>& added) {
  EventStream out;
  out.width = like.width;
  out.height = like.height;
  out.time_state = TimeState::Normalized;
  out.events.reserve(originals.size() + added.size());
  out.events.insert(out.events.end(), originals.begin(), originals.end());
  out.events.insert(out.events.end(), added.begin(), added.end());
  sort_canonical(out);
  return out;
}

double max_abs_shift(const std::vector<Event>& a, const std::vector<Event>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i].t - b[i].t));
  return m;
}

void check_input(const Classifier& clf, const EventStream& stream) {
  if (stream.time_state != TimeState::Normalized) {
    throw Error(ErrorCode::InvalidConfig, "attacks operate on normalized streams");
  }
  if (stream.width != clf.spec.width || stream.height != clf.spec.height) {
    throw Error(ErrorCode::GeometryMismatch, "stream geometry differs from the victim's grid");
  }
}

}  // namespace

double pgd_step(double t, double grad, double step, TimeBound bound, double direction) {
  const double s = grad > 0.0 ? 1.0 : (grad < 0.0 ? -1.0 : 0.0);
  return std::clamp(t + direction * step * s, bound.lo, bound.hi);
}

double AttackConfig::effective_step() const { return std::min(alpha / (bins * frequency), cap); }

double AttackConfig::effective_bound() const {
  return epsilon ? *epsilon / (bins * frequency) : 2.0 * effective_step();
}

void validate(const AttackConfig& cfg) {
  if (cfg.bins < 1 || !(cfg.frequency > 0.0)) throw Error(ErrorCode::InvalidConfig, "attack needs bins >= 1 and f > 0");
  if (!(cfg.alpha >= 0.0) || !(cfg.cap > 0.0)) throw Error(ErrorCode::InvalidConfig, "attack step must be nonnegative");
  if (cfg.epsilon && !(*cfg.epsilon >= 0.0)) throw Error(ErrorCode::InvalidConfig, "attack epsilon must be nonnegative");
  if (cfg.iterations < 0) throw Error(ErrorCode::InvalidConfig, "attack iterations must be nonnegative");
  if (!(cfg.lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "minimum resolution must be positive");
}

void validate(const NullConfig& cfg) {
  if (cfg.per_location < 1) throw Error(ErrorCode::InvalidConfig, "need at least one null event per location");
  if (!(cfg.top_fraction > 0.0 && cfg.top_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "top fraction must lie in (0, 1]");
  }
  if (!(cfg.epsilon >= 0.0) || !(cfg.alpha >= 0.0) || cfg.iterations < 0) {
    throw Error(ErrorCode::InvalidConfig, "bad generation step, radius or iteration count");
  }
  if (!(cfg.lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "minimum resolution must be positive");
}

TimeGradient loss_and_time_grads(const Classifier& clf, const EventStream& stream, const Objective& objective) {
  check_input(clf, stream);
  const GridTensor rep = represent(stream, clf.spec);
  const std::vector<float> input(rep.values.begin(), rep.values.end());
  const auto cache = forward<float>(clf.model, input);
  const auto grads = backward<float>(clf.model, cache, objective.label);
  GridTensor dRep(rep.channels, rep.width, rep.height, rep.projection);
  std::copy(grads.input.begin(), grads.input.end(), dRep.values.begin());
  TimeGradient out;
  out.loss = cross_entropy<float>(cache.logits, objective.label);
  out.logits = cache.logits;
  out.grads = represent_backward(stream, clf.spec, dRep);
  return out;
}

std::vector<double> grad_wrt_times(const Classifier& clf, const EventStream& stream, const Objective& objective) {
  return loss_and_time_grads(clf, stream, objective).grads;
}

AttackResult shift_attack(const Classifier& clf, const EventStream& stream, const AttackConfig& cfg,
                          const Objective& objective) {
  validate(cfg);
  check_input(clf, stream);
  const double step = cfg.effective_step();
  const double radius = cfg.effective_bound();

  EventStream work = stream;
  std::vector<Mover> movers(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) movers[i] = {i, ball(stream.events[i].t, radius, cfg.lambda), step};
  run_pgd(clf, work, movers, cfg.iterations, objective);

  std::vector<TimeBound> bounds(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) bounds[i] = movers[i].bound;
  separate_within_bounds(work.events, bounds, cfg.lambda);

  AttackResult r;
  r.originals = work.events;
  r.max_shift = max_abs_shift(r.originals, stream.events);
  r.original_bound = radius;
  r.stream = assemble(stream, r.originals, {});
  verify_attack(stream, r, cfg.lambda);
  return r;
}

std::vector<Event> make_null_events(const EventStream& stream, int m) {
  if (m < 1) throw Error(ErrorCode::InvalidConfig, "need at least one null event per location");
  const std::size_t plane = static_cast<std::size_t>(stream.width) * stream.height;
  std::vector<char> occupied(2 * plane, 0);
  for (const auto& e : stream.events) {
    occupied[(e.p > 0 ? 0 : plane) + static_cast<std::size_t>(e.y) * stream.width + e.x] = 1;
  }
  std::vector<Event> nulls;
  // (y, x, p) order so that ties in later rankings resolve canonically.
  for (int y = 0; y < stream.height; ++y) {
    for (int x = 0; x < stream.width; ++x) {
      for (int p : {-1, 1}) {
        if (occupied[(p > 0 ? 0 : plane) + static_cast<std::size_t>(y) * stream.width + x]) continue;
        for (int k = 0; k < m; ++k) {
          nulls.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), 0.0,
                                static_cast<std::int8_t>(p)});
        }
      }
    }
  }
  return nulls;
}

AttackResult generate_attack(const Classifier& clf, const EventStream& stream, const NullConfig& cfg,
                             const Objective& objective, std::uint64_t seed) {
  validate(cfg);
  check_input(clf, stream);
  const auto nulls = make_null_events(stream, cfg.per_location);
  if (nulls.empty()) throw Error(ErrorCode::NoCandidates, "every (x, y, p) location already holds an event");

  // Gradients of the null events at t = 0 inside the concatenated stream.
  EventStream joined = stream;
  joined.events.insert(joined.events.end(), nulls.begin(), nulls.end());
  const auto grads = grad_wrt_times(clf, joined, objective);
  const std::size_t base = stream.size();

  const double dir = objective.direction();
  std::vector<std::size_t> rank(nulls.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  const auto keep = std::min<std::size_t>(
      nulls.size(), std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.top_fraction * nulls.size()))));
  std::partial_sort(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(keep), rank.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = dir * grads[base + a];
                      const double sb = dir * grads[base + b];
                      if (sa != sb) return sa > sb;
                      return a < b;
                    });
  rank.resize(keep);
  std::sort(rank.begin(), rank.end());

  Rng rng(seed);
  EventStream work = stream;
  std::vector<Mover> movers;
  AttackResult r;
  for (const auto idx : rank) {
    Event e = nulls[idx];
    e.t = uniform_open_closed(rng);
    r.added_init.push_back(e.t);
    movers.push_back({work.size(), ball(e.t, cfg.epsilon, cfg.lambda), cfg.alpha});
    work.events.push_back(e);
  }
  run_pgd(clf, work, movers, cfg.iterations, objective);

  // Generated events never share a location with originals, so only they need spacing.
  r.added.assign(work.events.begin() + static_cast<std::ptrdiff_t>(base), work.events.end());
  std::vector<TimeBound> bounds;
  for (const auto& m : movers) bounds.push_back(m.bound);
  separate_within_bounds(r.added, bounds, cfg.lambda);

  r.originals = stream.events;
  r.added_bound = cfg.epsilon;
  r.stream = assemble(stream, r.originals, r.added);
  verify_attack(stream, r, cfg.lambda);
  return r;
}

AttackResult combined_attack(const Classifier& clf, const EventStream& stream, const AttackConfig& cfg,
                             const NullConfig& null_cfg, const Objective& objective, std::uint64_t seed) {
  validate(cfg);
  validate(null_cfg);
  check_input(clf, stream);
  if (make_null_events(stream, 1).empty()) return shift_attack(clf, stream, cfg, objective);

  AttackResult gen = generate_attack(clf, stream, null_cfg, objective, seed);
  const double step = cfg.effective_step();
  const double radius = cfg.effective_bound();
  const double lambda = std::max(cfg.lambda, null_cfg.lambda);

  EventStream work = stream;
  work.events.insert(work.events.end(), gen.added.begin(), gen.added.end());
  std::vector<Mover> movers;
  for (std::size_t i = 0; i < stream.size(); ++i) movers.push_back({i, ball(stream.events[i].t, radius, lambda), step});
  for (std::size_t k = 0; k < gen.added.size(); ++k) {
    const TimeBound b = intersect(ball(gen.added_init[k], null_cfg.epsilon, lambda),
                                  ball(gen.added[k].t, null_cfg.epsilon, lambda));
    movers.push_back({stream.size() + k, b, step});
  }
  run_pgd(clf, work, movers, cfg.iterations, objective);

  std::vector<TimeBound> bounds;
  for (const auto& m : movers) bounds.push_back(m.bound);
  separate_within_bounds(work.events, bounds, lambda);

  AttackResult r;
  r.originals.assign(work.events.begin(), work.events.begin() + static_cast<std::ptrdiff_t>(stream.size()));
  r.added.assign(work.events.begin() + static_cast<std::ptrdiff_t>(stream.size()), work.events.end());
  r.added_init = std::move(gen.added_init);
  r.max_shift = max_abs_shift(r.originals, stream.events);
  r.original_bound = radius;
  r.added_bound = null_cfg.epsilon;
  r.stream = assemble(stream, r.originals, r.added);
  verify_attack(stream, r, lambda);
  return r;
}

void verify_attack(const EventStream& original, const AttackResult& r, double lambda) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::ConstraintViolation, why); };
  if (r.originals.size() != original.size()) fail("original events were added or removed");
  if (r.added.size() != r.added_init.size()) fail("generated events lost their initialization");
  if (r.stream.size() != r.originals.size() + r.added.size()) fail("output stream size mismatch");
  for (std::size_t i = 0; i < original.size(); ++i) {
    const Event& a = original.events[i];
    const Event& b = r.originals[i];
    if (a.x != b.x || a.y != b.y || a.p != b.p) fail("an original event changed position or polarity");
    if (std::abs(b.t - a.t) > r.original_bound + kBoundTolerance) {
      fail("original event moved by " + std::to_string(std::abs(b.t - a.t)) + " > " + std::to_string(r.original_bound));
    }
  }
  for (std::size_t k = 0; k < r.added.size(); ++k) {
    if (std::abs(r.added[k].t - r.added_init[k]) > r.added_bound + kBoundTolerance) {
      fail("generated event left its radius");
    }
  }
  for (const auto& e : r.stream.events) {
    if (!(e.t > 0.0 && e.t <= 1.0)) fail("event time " + std::to_string(e.t) + " outside (0, 1]");
  }
  if (min_same_location_gap(r.stream.events) < lambda - kGapTolerance) fail("events closer than the minimum resolution");
}

}  // namespace evadv
