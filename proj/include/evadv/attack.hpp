#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "evadv/event.hpp"
#include "evadv/train.hpp"

namespace evadv {

enum class ObjectiveMode { Untargeted, Targeted };

/// Untargeted attacks ascend the loss of `label` (the true class); targeted
/// attacks descend the loss of `label` (the target class).
struct Objective {
  ObjectiveMode mode = ObjectiveMode::Untargeted;
  int label = 0;

  double direction() const { return mode == ObjectiveMode::Untargeted ? 1.0 : -1.0; }
};

/// Time-shift PGD settings. Step and radius are relative to the victim's
/// temporal scale: alpha / (B * f) and epsilon / (B * f).
struct AttackConfig {
  std::optional<double> epsilon;  // when empty the radius is twice the effective step
  double alpha = 0.5;
  int iterations = 3;
  int bins = 5;
  double frequency = 1.0;
  double cap = 0.1;  // upper limit on the effective step
  double lambda = kDefaultMinResolution;

  double effective_step() const;
  double effective_bound() const;
};

void validate(const AttackConfig& cfg);

/// Additional-event generation settings.
struct NullConfig {
  int per_location = 5;  // null events per empty (x, y, p)
  double top_fraction = 0.01;
  double epsilon = 0.1;
  double alpha = 0.01;
  int iterations = 10;
  double lambda = kDefaultMinResolution;
};

void validate(const NullConfig& cfg);

struct TimeGradient {
  double loss = 0.0;
  std::vector<float> logits;
  std::vector<double> grads;  // dJ/dt per event, input order
};

/// One signed-gradient step of size `step` followed by projection onto `bound`.
double pgd_step(double t, double grad, double step, TimeBound bound, double direction);

/// Loss of the objective's label and its gradient with respect to every event time.
TimeGradient loss_and_time_grads(const Classifier& clf, const EventStream& stream, const Objective& objective);

std::vector<double> grad_wrt_times(const Classifier& clf, const EventStream& stream, const Objective& objective);

struct AttackResult {
  EventStream stream;               // original plus added events, canonical order
  std::vector<Event> originals;     // attacked originals, same order as the input stream
  std::vector<Event> added;         // generated events
  std::vector<double> added_init;   // initialization time of each generated event
  double max_shift = 0.0;           // L-inf time change over original events
  double original_bound = 0.0;      // radius that applied to original events
  double added_bound = 0.0;         // radius that applied to generated events
};

/// Scaled PGD on original event times; positions and polarities stay fixed.
AttackResult shift_attack(const Classifier& clf, const EventStream& stream, const AttackConfig& cfg,
                          const Objective& objective);

/// `m` null events (t = 0) at every (x, y, p) with no event in the stream.
std::vector<Event> make_null_events(const EventStream& stream, int m);

/// Null events rank candidate locations by their loss gradient at t = 0; the
/// top fraction become new events with random times, then PGD moves only
/// the new events. Original events are returned bit-for-bit unchanged.
AttackResult generate_attack(const Classifier& clf, const EventStream& stream, const NullConfig& cfg,
                             const Objective& objective, std::uint64_t seed);

/// generate_attack followed by a shift stage over all events. Originals stay
/// within the shift radius of their true times; generated events stay within
/// the generation radius of both their initialization and their generated time.
AttackResult combined_attack(const Classifier& clf, const EventStream& stream, const AttackConfig& cfg,
                             const NullConfig& null_cfg, const Objective& objective, std::uint64_t seed);

/// Throws ConstraintViolation unless the result honours both radii, keeps
/// every time in (0, 1], keeps positions/polarities and is lambda-separated.
void verify_attack(const EventStream& original, const AttackResult& result, double lambda);

}  // namespace evadv
