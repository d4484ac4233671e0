#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evadv/experiment.hpp"

namespace evadv {

/// Flat `key = value` settings. Lines starting with '#' and blank lines are
/// ignored; later assignments replace earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& file);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Applies one "key=value" override.
  void assign(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Throws ConfigError naming the first key not in `known`.
  void check_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Everything one command needs, resolved from a KeyValueConfig.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out = "out";
  std::filesystem::path data;   // directory holding train/ and test/
  std::filesystem::path model;  // checkpoint consumed by attack, adv-train, sweep and render

  SynthSpec synth;
  int synth_test_count = 200;

  int bins = 5;
  KernelKind kernel = KernelKind::Trilinear;
  std::optional<double> kernel_tau;
  Projection projection = Projection::None;

  TrainSchedule schedule;
  AttackPlan attack;
  bool save_streams = false;
  AdvTrainConfig adv;
  std::vector<double> sweep_epsilons{0.05, 0.10, 0.15, 0.20, 0.25};
  std::vector<double> sweep_frequencies{1.0};
  std::vector<std::filesystem::path> transfer_models;
  int render_count = 4;

  GridSpec grid_spec(int width, int height) const;
};

/// Every key understood by from_config.
const std::vector<std::string>& known_config_keys();

/// Parses and range-checks all values; throws ConfigError.
RunConfig from_config(const KeyValueConfig& cfg);

/// Throws ConfigError unless `path` exists.
void require_path(const std::filesystem::path& path, std::string_view what);

}  // namespace evadv
