// Command-line front end: synth | train | attack | adv-train | sweep | transfer | render.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evadv/config.hpp"
#include "evadv/error.hpp"
#include "evadv/experiment.hpp"
#include "evadv/parallel.hpp"
#include "evadv/random.hpp"

using namespace evadv;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::string> mode;
};

// Config file first, then --set overrides, then dedicated flags.
KeyValueConfig gather(const Flags& f, const std::string& command) {
  KeyValueConfig c = f.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(f.config);
  for (const auto& s : f.sets) c.assign(s);
  if (f.seed) c.set("seed", std::to_string(*f.seed));
  if (f.out) c.set("out", *f.out);
  if (f.jobs) c.set("jobs", std::to_string(*f.jobs));
  if (f.data) c.set("data", *f.data);
  if (f.model) c.set("model", *f.model);
  const std::string prefix = command == "adv-train" ? "advtrain." : "train.";
  if (f.epochs) c.set(prefix + "epochs", std::to_string(*f.epochs));
  if (f.lr) c.set(prefix + "lr", format_fixed(*f.lr, 12));
  if (f.mode) c.set("attack.mode", *f.mode);
  return c;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

// Accepts either a split directory (train/, test/) or a single dataset directory.
fs::path split_dir(const fs::path& data, const char* split) {
  const fs::path sub = data / split;
  return fs::exists(sub / kManifestName) ? sub : data;
}

Dataset load_split(const RunConfig& r, const char* split, int num_classes = 0) {
  require_path(r.data, "data");
  return load_dataset(split_dir(r.data, split), r.attack.shift.lambda, num_classes);
}

Classifier load_model(const RunConfig& r) {
  require_path(r.model, "model");
  return load_checkpoint(r.model);
}

void add_config(ExperimentReport& rep, const KeyValueConfig& c, const std::string& command) {
  rep.add_meta("command", command);
  // Output location and thread count do not influence results.
  for (const auto& [k, v] : c.values()) {
    if (k != "out" && k != "jobs") rep.add_meta("config." + k, v);
  }
}

void write_report(const ExperimentReport& rep, const fs::path& out, const std::string& stem) {
  rep.write(out / (stem + ".tsv"), out / (stem + ".manifest"));
}

int cmd_synth(const RunConfig& r, const KeyValueConfig& c) {
  prepare_out(r.out);
  SynthSpec test = r.synth;
  test.count = r.synth_test_count;
  const auto train_raw = synth_raw_dataset(r.synth, derive_seed(r.seed, 1));
  const auto test_raw = synth_raw_dataset(test, derive_seed(r.seed, 2));
  write_dataset(r.out / "train", train_raw);
  write_dataset(r.out / "test", test_raw);
  ExperimentReport rep;
  add_config(rep, c, "synth");
  rep.columns = {"split", "samples", "events", "hash"};
  const std::pair<std::string, const std::vector<RawSample>*> splits[] = {{"train", &train_raw}, {"test", &test_raw}};
  for (const auto& [name, raws] : splits) {
    std::size_t events = 0;
    for (const auto& s : *raws) events += s.stream.size();
    const auto hash = dataset_hash(prepare_dataset(*raws, r.synth.num_classes, r.attack.shift.lambda));
    rep.rows.push_back({name, std::to_string(raws->size()), std::to_string(events), std::to_string(hash)});
    std::printf("%s: %zu samples, %zu events\n", name.c_str(), raws->size(), events);
  }
  write_report(rep, r.out, "synth");
  return 0;
}

int cmd_train(const RunConfig& r, const KeyValueConfig& c) {
  const Dataset train_set = load_split(r, "train");
  const Dataset test_set = load_split(r, "test", train_set.num_classes);
  prepare_out(r.out);
  TrainSchedule sch = r.schedule;
  sch.seed = r.seed;
  sch.jobs = r.jobs;
  const auto clf = make_classifier(r.grid_spec(train_set.width, train_set.height), train_set.num_classes,
                                   derive_seed(r.seed, 3));
  const auto result = train(clf, train_set, &test_set, sch);
  ExperimentReport rep;
  add_config(rep, c, "train");
  rep.add_meta("representation", representation_id(clf.spec));
  rep.add_meta("train_hash", std::to_string(dataset_hash(train_set)));
  rep.add_meta("test_hash", std::to_string(dataset_hash(test_set)));
  rep.columns = {"epoch", "lr", "train_loss", "train_accuracy", "test_accuracy"};
  for (const auto& e : result.history) {
    std::printf("epoch %d  lr %.2e  loss %.4f  train %.4f  test %.4f\n", e.epoch, e.lr, e.train_loss,
                e.train_accuracy, e.val_accuracy);
    rep.rows.push_back({std::to_string(e.epoch), format_fixed(e.lr, 8), format_fixed(e.train_loss),
                        format_fixed(e.train_accuracy), format_fixed(e.val_accuracy)});
  }
  save_checkpoint(result.classifier, r.out / "model.ckpt");
  write_report(rep, r.out, "train");
  return 0;
}

int cmd_attack(const RunConfig& r, const KeyValueConfig& c) {
  const Classifier clf = load_model(r);
  const Dataset test_set = load_split(r, "test", clf.model.shape.num_classes);
  prepare_out(r.out);
  const auto res = success_rate(clf, test_set, r.attack, r.seed, r.jobs, r.save_streams);

  ExperimentReport summary;
  add_config(summary, c, "attack");
  summary.add_meta("dataset_hash", std::to_string(dataset_hash(test_set)));
  summary.columns = {"representation", "kernel", "attack", "objective", "success_rate", "pool", "successes"};
  summary.rows.push_back({representation_id(clf.spec), std::string(to_string(clf.spec.kernel.kind)),
                          std::string(to_string(r.attack.kind)), std::string(to_string(r.attack.objective)),
                          format_fixed(res.rate), std::to_string(res.pool), std::to_string(res.successes)});
  write_report(summary, r.out, "attack");
  attack_table(res).write(r.out / "attack_samples.tsv", r.out / "attack_samples.manifest");

  if (r.save_streams) {
    std::vector<RawSample> adv;
    for (std::size_t i = 0; i < res.adversarial.size(); ++i) {
      if (!res.records[i].in_pool) continue;
      adv.push_back({to_raw(res.adversarial[i], test_set.samples[i].time_scale_us), test_set.samples[i].label});
    }
    write_dataset(r.out / "adversarial", adv);
  }
  std::printf("success rate %.4f (%zu of %zu)\n", res.rate, res.successes, res.pool);
  return 0;
}

int cmd_advtrain(const RunConfig& r, const KeyValueConfig& c) {
  const Classifier clf = load_model(r);
  const Dataset train_set = load_split(r, "train", clf.model.shape.num_classes);
  const Dataset test_set = load_split(r, "test", clf.model.shape.num_classes);
  prepare_out(r.out);
  auto result = adversarial_training(clf, train_set, test_set, r.adv, r.seed, r.jobs);
  add_config(result.report, c, "adv-train");
  save_checkpoint(result.hardened, r.out / "hardened.ckpt");
  write_report(result.report, r.out, "advtrain");
  std::printf("%s", result.report.to_tsv().c_str());
  return 0;
}

int cmd_sweep(const RunConfig& r, const KeyValueConfig& c) {
  const Classifier clf = load_model(r);
  const Dataset test_set = load_split(r, "test", clf.model.shape.num_classes);
  prepare_out(r.out);
  auto rep = sweep_perturbation(clf, test_set, r.sweep_epsilons, r.sweep_frequencies, r.seed, r.jobs);
  add_config(rep, c, "sweep");
  write_report(rep, r.out, "sweep");
  std::printf("%s", rep.to_tsv().c_str());
  return 0;
}

int cmd_transfer(const RunConfig& r, const KeyValueConfig& c) {
  if (r.transfer_models.size() < 2) throw Error(ErrorCode::ConfigError, "transfer.models needs at least two checkpoints");
  std::vector<NamedClassifier> victims;
  std::map<std::string, int> seen;
  for (const auto& p : r.transfer_models) {
    require_path(p, "transfer model");
    Classifier clf = load_checkpoint(p);
    std::string name = representation_id(clf.spec);
    if (seen[name]++) name += "#" + std::to_string(seen[name]);
    victims.push_back({name, std::move(clf)});
  }
  const Dataset test_set = load_split(r, "test", victims.front().classifier.model.shape.num_classes);
  prepare_out(r.out);
  auto result = transfer_matrix(victims, test_set, r.attack, r.seed, r.jobs);
  add_config(result.report, c, "transfer");
  write_report(result.report, r.out, "transfer");
  std::printf("%s", result.report.to_tsv().c_str());
  return 0;
}

int cmd_render(const RunConfig& r, const KeyValueConfig& c) {
  const Classifier clf = load_model(r);
  const Dataset test_set = load_split(r, "test", clf.model.shape.num_classes);
  const fs::path dir = r.out / "render";
  prepare_out(dir);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(r.render_count), test_set.size());
  std::vector<AttackOutcome> outcomes(n);
  parallel_for(n, r.jobs, [&](std::size_t i) {
    outcomes[i] = attack_sample(clf, test_set.samples[i], i, r.attack, test_set.num_classes, r.seed);
  });
  ExperimentReport rep;
  add_config(rep, c, "render");
  rep.columns = {"index", "label", "clean_pred", "adv_pred", "clean_image", "adversarial_image"};
  for (std::size_t i = 0; i < n; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%05zu", i);
    const std::string clean = std::string(stem) + "_clean.ppm";
    const std::string adv = std::string(stem) + "_adv.ppm";
    render_image(represent(test_set.samples[i].stream, clf.spec), dir / clean);
    render_image(represent(outcomes[i].adversarial, clf.spec), dir / adv);
    const auto& rec = outcomes[i].record;
    rep.rows.push_back({std::to_string(i), std::to_string(rec.label), std::to_string(rec.clean_pred),
                        std::to_string(rec.adv_pred), clean, adv});
  }
  write_report(rep, r.out, "render");
  std::printf("wrote %zu image pairs to %s\n", n, dir.string().c_str());
  return 0;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidConfig: return 2;
    case ErrorCode::IoFailure: return 3;
    default: return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial event streams against grid-representation classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", f.sets, "override one config key (key=value), repeatable");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--data", f.data, "dataset directory (with train/ and test/)");
  app.add_option("--model", f.model, "checkpoint file");
  app.add_option("--epochs", f.epochs, "training epochs");
  app.add_option("--lr", f.lr, "learning rate");
  app.add_option("--mode", f.mode, "attack mode: none | shift | generate | combined");

  using Handler = int (*)(const RunConfig&, const KeyValueConfig&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"synth", "write a synthetic train/test dataset", cmd_synth},
      {"train", "train a classifier and write model.ckpt", cmd_train},
      {"attack", "attack the test split and report the success rate", cmd_attack},
      {"adv-train", "fine-tune on clean plus attacked samples", cmd_advtrain},
      {"sweep", "shift-attack success over perturbation sizes and frequencies", cmd_sweep},
      {"transfer", "transfer-attack matrix between checkpoints", cmd_transfer},
      {"render", "render clean and adversarial tensors as PPM images", cmd_render}};
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, help, fn] : commands) {
      if (!app.got_subcommand(name)) continue;
      const KeyValueConfig cfg = gather(f, name);
      const RunConfig run = from_config(cfg);
      return fn(run, cfg);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
