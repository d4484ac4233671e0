#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "evadv/attack.hpp"
#include "evadv/dataset.hpp"
#include "evadv/train.hpp"

namespace evadv {

enum class AttackKind { None, Shift, Generate, Combined };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);
std::string_view to_string(ObjectiveMode mode);
ObjectiveMode parse_objective(std::string_view name);

/// Which attack to run and with what settings. `shift.bins` is taken from the
/// victim at run time.
struct AttackPlan {
  AttackKind kind = AttackKind::Combined;
  ObjectiveMode objective = ObjectiveMode::Untargeted;
  AttackConfig shift;
  NullConfig null;
};

/// One row of a per-sample attack table.
struct AttackRecord {
  std::size_t index = 0;
  int label = 0;
  int clean_pred = 0;
  int adv_pred = 0;
  int target = -1;  // -1 for untargeted attacks
  double linf = 0.0;
  std::size_t added = 0;
  bool in_pool = false;
  bool success = false;
};

struct AttackOutcome {
  EventStream adversarial;
  AttackRecord record;
};

/// Uniformly random wrong class for targeted attacks.
int random_target(int label, int num_classes, std::uint64_t seed);

/// Attacks one sample (the attack runs even when the clean prediction is wrong).
AttackOutcome attack_sample(const Classifier& clf, const Sample& sample, std::size_t index, const AttackPlan& plan,
                            int num_classes, std::uint64_t seed);

struct SuccessReport {
  double rate = 0.0;
  std::size_t pool = 0;
  std::size_t successes = 0;
  std::vector<AttackRecord> records;
  std::vector<EventStream> adversarial;  // filled only on request; empty streams for skipped samples
};

/// Success over the clean-correct pool: the prediction leaves the true class
/// (untargeted) or lands on the sampled target (targeted).
void tally(SuccessReport& report);

/// Attacks every clean-correct sample. Throws EmptyPool when none exist.
SuccessReport success_rate(const Classifier& clf, const Dataset& data, const AttackPlan& plan, std::uint64_t seed,
                           int jobs = 1, bool keep_streams = false);

/// Top-1 accuracy when every sample is attacked (untargeted, true label).
double accuracy_under_attack(const Classifier& clf, const Dataset& data, const AttackPlan& plan, std::uint64_t seed,
                             int jobs = 1);

/// Tab-separated result table plus key=value run metadata.
struct ExperimentReport {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_meta(std::string key, std::string value) { metadata.emplace_back(std::move(key), std::move(value)); }
  std::string to_tsv() const;
  std::string manifest() const;
  void write(const std::filesystem::path& tsv, const std::filesystem::path& manifest_file) const;
};

std::string format_fixed(double v, int digits = 4);

/// e.g. "EST(5)", "VoxelGrid(10)", "TwoChannel(1)".
std::string representation_id(const GridSpec& spec);

/// Per-sample rows: index, label, clean, adversarial, target, linf, added, pool, success.
ExperimentReport attack_table(const SuccessReport& report);

/// Frequency f = 2^-k means the streams are halved k times.
Dataset at_frequency(const Dataset& data, double f);

/// Shift-attack success per (epsilon, f) cell with step epsilon / 2 and three iterations.
ExperimentReport sweep_perturbation(const Classifier& clf, const Dataset& data, const std::vector<double>& epsilons,
                                    const std::vector<double>& frequencies, std::uint64_t seed, int jobs = 1);

inline AttackPlan shift_plan_default() {
  AttackPlan p;
  p.kind = AttackKind::Shift;
  return p;
}

struct AdvTrainConfig {
  int epochs = 5;
  double lr = 1e-5;
  double decay = 0.5;
  int batch_size = 16;
  AttackPlan train_attack = shift_plan_default();
};

struct AdvTrainResult {
  Classifier hardened;
  ExperimentReport report;  // clean / shift / shift+generate accuracy, before and after
  double clean_before = 0, clean_after = 0;
  double shift_before = 0, shift_after = 0;
  double combined_before = 0, combined_after = 0;
};

/// Fine-tunes on clean plus freshly attacked copies of every batch; attacks
/// target the model as it is being updated.
AdvTrainResult adversarial_training(const Classifier& clf, const Dataset& train_set, const Dataset& test_set,
                                    const AdvTrainConfig& cfg, std::uint64_t seed, int jobs = 1,
                                    bool evaluate_combined = true);

struct NamedClassifier {
  std::string name;
  Classifier classifier;
};

struct TransferCell {
  std::size_t source = 0;
  std::size_t target = 0;
  double rate = 0.0;
  std::size_t pool = 0;
};

struct TransferResult {
  std::vector<TransferCell> cells;      // off-diagonal only
  std::vector<double> white_box;        // per victim, attacking itself
  ExperimentReport report;
};

/// Streams attacked against each source are re-represented for every other
/// victim; success is counted over the target's clean-correct pool.
TransferResult transfer_matrix(const std::vector<NamedClassifier>& victims, const Dataset& data, const AttackPlan& plan,
                               std::uint64_t seed, int jobs = 1);

}  // namespace evadv
