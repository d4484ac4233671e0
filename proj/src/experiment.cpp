#include "evadv/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "evadv/error.hpp"
#include "evadv/parallel.hpp"
#include "evadv/random.hpp"

namespace evadv {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::Shift: return "shift";
    case AttackKind::Generate: return "generate";
    case AttackKind::Combined: return "combined";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "none") return AttackKind::None;
  if (name == "shift") return AttackKind::Shift;
  if (name == "generate") return AttackKind::Generate;
  if (name == "combined") return AttackKind::Combined;
  throw Error(ErrorCode::InvalidConfig, "unknown attack mode '" + std::string(name) + "'");
}

std::string_view to_string(ObjectiveMode mode) {
  return mode == ObjectiveMode::Untargeted ? "untargeted" : "targeted";
}

ObjectiveMode parse_objective(std::string_view name) {
  if (name == "untargeted") return ObjectiveMode::Untargeted;
  if (name == "targeted") return ObjectiveMode::Targeted;
  throw Error(ErrorCode::InvalidConfig, "unknown objective '" + std::string(name) + "'");
}

int random_target(int label, int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::InvalidConfig, "targeted attacks need at least two classes");
  Rng rng(seed);
  const int pick = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(num_classes - 1)));
  return pick < label ? pick : pick + 1;
}

AttackOutcome attack_sample(const Classifier& clf, const Sample& sample, std::size_t index, const AttackPlan& plan,
                            int num_classes, std::uint64_t seed) {
  const std::uint64_t sample_seed = derive_seed(seed, index);
  AttackOutcome out;
  auto& rec = out.record;
  rec.index = index;
  rec.label = sample.label;
  rec.clean_pred = predict(clf, sample.stream);
  rec.in_pool = rec.clean_pred == sample.label;

  Objective objective{plan.objective, sample.label};
  if (plan.objective == ObjectiveMode::Targeted) {
    rec.target = random_target(sample.label, num_classes, splitmix64(sample_seed ^ 0x7461726765740000ULL));
    objective.label = rec.target;
  }
  AttackConfig shift = plan.shift;
  shift.bins = clf.spec.bins;

  AttackResult result;
  switch (plan.kind) {
    case AttackKind::None:
      result.stream = sample.stream;
      break;
    case AttackKind::Shift:
      result = shift_attack(clf, sample.stream, shift, objective);
      break;
    case AttackKind::Generate:
      try {
        result = generate_attack(clf, sample.stream, plan.null, objective, sample_seed);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCandidates) throw;
        result.stream = sample.stream;
      }
      break;
    case AttackKind::Combined:
      result = combined_attack(clf, sample.stream, shift, plan.null, objective, sample_seed);
      break;
  }
  rec.linf = result.max_shift;
  rec.added = result.added.size();
  rec.adv_pred = plan.kind == AttackKind::None ? rec.clean_pred : predict(clf, result.stream);
  rec.success = rec.in_pool && (plan.objective == ObjectiveMode::Untargeted ? rec.adv_pred != sample.label
                                                                             : rec.adv_pred == rec.target);
  out.adversarial = std::move(result.stream);
  return out;
}

void tally(SuccessReport& report) {
  report.pool = 0;
  report.successes = 0;
  for (const auto& r : report.records) {
    report.pool += r.in_pool ? 1 : 0;
    report.successes += (r.in_pool && r.success) ? 1 : 0;
  }
  if (report.pool == 0) throw Error(ErrorCode::EmptyPool, "no sample is classified correctly before the attack");
  report.rate = static_cast<double>(report.successes) / static_cast<double>(report.pool);
}

SuccessReport success_rate(const Classifier& clf, const Dataset& data, const AttackPlan& plan, std::uint64_t seed,
                           int jobs, bool keep_streams) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to attack");
  SuccessReport report;
  report.records.resize(data.size());
  if (keep_streams) report.adversarial.resize(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const Sample& s = data.samples[i];
    const int clean = predict(clf, s.stream);
    if (clean != s.label) {
      AttackRecord rec;
      rec.index = i;
      rec.label = s.label;
      rec.clean_pred = clean;
      rec.adv_pred = clean;
      report.records[i] = rec;
      return;
    }
    auto outcome = attack_sample(clf, s, i, plan, data.num_classes, seed);
    report.records[i] = outcome.record;
    if (keep_streams) report.adversarial[i] = std::move(outcome.adversarial);
  });
  tally(report);
  return report;
}

double accuracy_under_attack(const Classifier& clf, const Dataset& data, const AttackPlan& plan, std::uint64_t seed,
                             int jobs) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to attack");
  AttackPlan untargeted = plan;
  untargeted.objective = ObjectiveMode::Untargeted;
  std::vector<int> correct(data.size(), 0);
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto outcome = attack_sample(clf, data.samples[i], i, untargeted, data.num_classes, seed);
    correct[i] = outcome.record.adv_pred == data.samples[i].label ? 1 : 0;
  });
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / static_cast<double>(data.size());
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string ExperimentReport::to_tsv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "\t" : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "\t" : "") << row[c];
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::manifest() const {
  std::ostringstream out;
  for (const auto& [k, v] : metadata) out << k << '=' << v << '\n';
  return out.str();
}

void ExperimentReport::write(const std::filesystem::path& tsv, const std::filesystem::path& manifest_file) const {
  auto dump = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + p.string());
  };
  dump(tsv, to_tsv());
  dump(manifest_file, manifest());
}

std::string representation_id(const GridSpec& spec) {
  switch (spec.projection) {
    case Projection::None: return "EST(" + std::to_string(spec.bins) + ")";
    case Projection::PolarityAvg: return "VoxelGrid(" + std::to_string(spec.bins) + ")";
    case Projection::TemporalAvg: return "TwoChannel(1)";
  }
  return "unknown";
}

ExperimentReport attack_table(const SuccessReport& report) {
  ExperimentReport t;
  t.columns = {"index", "label", "clean_pred", "adv_pred", "target", "linf", "added", "in_pool", "success"};
  for (const auto& r : report.records) {
    t.rows.push_back({std::to_string(r.index), std::to_string(r.label), std::to_string(r.clean_pred),
                      std::to_string(r.adv_pred), std::to_string(r.target), format_fixed(r.linf, 6),
                      std::to_string(r.added), r.in_pool ? "1" : "0", r.success ? "1" : "0"});
  }
  return t;
}

Dataset at_frequency(const Dataset& data, double f) {
  if (!(f > 0.0) || f > 1.0) throw Error(ErrorCode::InvalidConfig, "relative frequency must lie in (0, 1]");
  const double halvings = -std::log2(f);
  const int k = static_cast<int>(std::lround(halvings));
  if (std::abs(halvings - k) > 1e-9) throw Error(ErrorCode::InvalidConfig, "relative frequency must be a power of 1/2");
  Dataset out = data;
  for (auto& s : out.samples) {
    for (int i = 0; i < k; ++i) s.stream = halve_frequency(s.stream);
  }
  return out;
}

ExperimentReport sweep_perturbation(const Classifier& clf, const Dataset& data, const std::vector<double>& epsilons,
                                    const std::vector<double>& frequencies, std::uint64_t seed, int jobs) {
  ExperimentReport report;
  report.columns = {"representation", "kernel", "attack", "epsilon", "frequency", "success_rate", "pool"};
  report.add_meta("seed", std::to_string(seed));
  report.add_meta("dataset_hash", std::to_string(dataset_hash(data)));
  report.add_meta("representation", representation_id(clf.spec));
  report.add_meta("step", "epsilon/2");
  report.add_meta("iterations", "3");
  for (double f : frequencies) {
    const Dataset scaled = at_frequency(data, f);
    for (double eps : epsilons) {
      AttackPlan plan;
      plan.kind = AttackKind::Shift;
      plan.shift.epsilon = eps;
      plan.shift.alpha = eps / 2.0;
      plan.shift.iterations = 3;
      plan.shift.frequency = f;
      plan.shift.cap = std::numeric_limits<double>::infinity();
      const auto res = success_rate(clf, scaled, plan, seed, jobs);
      report.rows.push_back({representation_id(clf.spec), std::string(to_string(clf.spec.kernel.kind)), "shift",
                             format_fixed(eps, 3), format_fixed(f, 3), format_fixed(res.rate),
                             std::to_string(res.pool)});
    }
  }
  return report;
}

AdvTrainResult adversarial_training(const Classifier& clf, const Dataset& train_set, const Dataset& test_set,
                                    const AdvTrainConfig& cfg, std::uint64_t seed, int jobs, bool evaluate_combined) {
  if (train_set.empty() || test_set.empty()) throw Error(ErrorCode::EmptyDataset, "adversarial training needs data");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "bad adversarial training schedule");
  AttackPlan shift_plan;
  shift_plan.kind = AttackKind::Shift;
  shift_plan.shift = cfg.train_attack.shift;
  AttackPlan combined_plan = cfg.train_attack;
  combined_plan.kind = AttackKind::Combined;
  const std::uint64_t eval_seed = derive_seed(seed, 0xe7a1);

  AdvTrainResult result;
  result.clean_before = evaluate(clf, test_set, jobs);
  result.shift_before = accuracy_under_attack(clf, test_set, shift_plan, eval_seed, jobs);
  if (evaluate_combined) result.combined_before = accuracy_under_attack(clf, test_set, combined_plan, eval_seed, jobs);

  Classifier model = clf;
  auto adam = make_adam(model.model, cfg.lr);
  Rng rng(seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double lr = cfg.lr;
  std::uint64_t attack_counter = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.hyper.lr = lr;
    shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      std::vector<std::vector<float>> grads(2 * count);
      const std::uint64_t batch_seed = derive_seed(seed, ++attack_counter);
      parallel_for(count, jobs, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        const Sample& s = train_set.samples[idx];
        const auto adv = attack_sample(model, s, idx, cfg.train_attack, train_set.num_classes, batch_seed);
        const auto clean_in = network_input(model.spec, s.stream);
        const auto adv_in = network_input(model.spec, adv.adversarial);
        grads[2 * b] = backward<float>(model.model, forward<float>(model.model, clean_in), s.label).params;
        grads[2 * b + 1] = backward<float>(model.model, forward<float>(model.model, adv_in), s.label).params;
      });
      std::vector<float> g(model.model.size(), 0.0f);
      for (const auto& part : grads) {
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += part[k];
      }
      const float inv = 1.0f / static_cast<float>(grads.size());
      for (auto& v : g) v *= inv;
      adam_step(model.model, g, adam);
    }
    lr *= cfg.decay;
  }

  result.clean_after = evaluate(model, test_set, jobs);
  result.shift_after = accuracy_under_attack(model, test_set, shift_plan, eval_seed, jobs);
  if (evaluate_combined) result.combined_after = accuracy_under_attack(model, test_set, combined_plan, eval_seed, jobs);

  auto& rep = result.report;
  rep.columns = {"training", "none", "shifting", "shifting_and_generating"};
  const std::string na = "-";
  rep.rows.push_back({"original", format_fixed(result.clean_before), format_fixed(result.shift_before),
                      evaluate_combined ? format_fixed(result.combined_before) : na});
  rep.rows.push_back({"adversarial", format_fixed(result.clean_after), format_fixed(result.shift_after),
                      evaluate_combined ? format_fixed(result.combined_after) : na});
  rep.add_meta("seed", std::to_string(seed));
  rep.add_meta("train_hash", std::to_string(dataset_hash(train_set)));
  rep.add_meta("test_hash", std::to_string(dataset_hash(test_set)));
  rep.add_meta("representation", representation_id(clf.spec));
  rep.add_meta("epochs", std::to_string(cfg.epochs));
  rep.add_meta("lr", format_fixed(cfg.lr, 8));
  rep.add_meta("decay", format_fixed(cfg.decay, 4));
  rep.add_meta("train_attack", std::string(to_string(cfg.train_attack.kind)));
  result.hardened = std::move(model);
  return result;
}

TransferResult transfer_matrix(const std::vector<NamedClassifier>& victims, const Dataset& data, const AttackPlan& plan,
                               std::uint64_t seed, int jobs) {
  if (victims.size() < 2) throw Error(ErrorCode::InvalidConfig, "transfer needs at least two victims");
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to attack");
  AttackPlan untargeted = plan;
  untargeted.objective = ObjectiveMode::Untargeted;
  const std::size_t n = data.size();
  const std::size_t v = victims.size();

  // Clean predictions of every victim.
  std::vector<std::vector<int>> clean(v, std::vector<int>(n));
  for (std::size_t k = 0; k < v; ++k) {
    parallel_for(n, jobs, [&](std::size_t i) { clean[k][i] = predict(victims[k].classifier, data.samples[i].stream); });
  }

  TransferResult result;
  result.white_box.resize(v);
  for (std::size_t s = 0; s < v; ++s) {
    std::vector<AttackOutcome> adv(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      adv[i] = attack_sample(victims[s].classifier, data.samples[i], i, untargeted, data.num_classes, seed);
    });
    SuccessReport white;
    for (const auto& o : adv) white.records.push_back(o.record);
    tally(white);
    result.white_box[s] = white.rate;
    for (std::size_t t = 0; t < v; ++t) {
      if (t == s) continue;
      std::vector<int> fooled(n, 0);
      parallel_for(n, jobs, [&](std::size_t i) {
        if (clean[t][i] != data.samples[i].label) return;
        fooled[i] = predict(victims[t].classifier, adv[i].adversarial) != data.samples[i].label ? 1 : 0;
      });
      TransferCell cell{s, t, 0.0, 0};
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (clean[t][i] != data.samples[i].label) continue;
        ++cell.pool;
        hits += static_cast<std::size_t>(fooled[i]);
      }
      if (cell.pool == 0) throw Error(ErrorCode::EmptyPool, victims[t].name + " classifies no sample correctly");
      cell.rate = static_cast<double>(hits) / static_cast<double>(cell.pool);
      result.cells.push_back(cell);
    }
  }

  auto& rep = result.report;
  rep.columns = {"from", "to", "success_rate", "pool"};
  for (const auto& c : result.cells) {
    rep.rows.push_back({victims[c.source].name, victims[c.target].name, format_fixed(c.rate), std::to_string(c.pool)});
  }
  rep.add_meta("seed", std::to_string(seed));
  rep.add_meta("dataset_hash", std::to_string(dataset_hash(data)));
  rep.add_meta("attack", std::string(to_string(plan.kind)));
  for (std::size_t k = 0; k < v; ++k) {
    rep.add_meta("victim." + std::to_string(k), victims[k].name + " " + representation_id(victims[k].classifier.spec));
    rep.add_meta("white_box." + victims[k].name, format_fixed(result.white_box[k]));
  }
  return result;
}

}  // namespace evadv
