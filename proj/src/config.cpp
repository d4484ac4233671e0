#include "evadv/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "evadv/error.hpp"

namespace evadv {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view want) {
  throw Error(ErrorCode::ConfigError, "config key '" + key + "': '" + value + "' is not " + std::string(want));
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) bad_value(key, text, "a number");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text, "an integer");
  return v;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + " has no key");
    cfg.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::assign(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty()) {
    throw Error(ErrorCode::ConfigError, "override '" + std::string(assignment) + "' is not key=value");
  }
  values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::optional<double> KeyValueConfig::get_optional_double(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty() || it->second == "auto") return std::nullopt;
  return to_double(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = to_integer(key, it->second);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) bad_value(key, it->second, "in range");
  return static_cast<int>(v);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& text = it->second;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text, "a nonnegative integer");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_commas(it->second)) out.push_back(to_double(key, item));
  if (out.empty()) bad_value(key, it->second, "a nonempty list");
  return out;
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::vector<std::string>{} : split_commas(it->second);
}

void KeyValueConfig::check_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }
  }
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "seed", "jobs", "out", "data", "model",
      "synth.count", "synth.test_count", "synth.classes", "synth.width", "synth.height", "synth.threshold",
      "synth.frequency", "synth.duration", "synth.amplitude", "synth.steps",
      "grid.bins", "grid.projection", "kernel.kind", "kernel.tau",
      "train.epochs", "train.lr", "train.decay", "train.batch", "train.learn_kernel",
      "attack.mode", "attack.objective", "attack.epsilon", "attack.alpha", "attack.iterations", "attack.frequency",
      "attack.cap", "attack.lambda", "attack.save_streams",
      "null.m", "null.top", "null.epsilon", "null.alpha", "null.iterations",
      "advtrain.epochs", "advtrain.lr", "advtrain.decay", "advtrain.batch", "advtrain.attack",
      "sweep.epsilons", "sweep.frequencies", "transfer.models", "render.count"};
  return keys;
}

GridSpec RunConfig::grid_spec(int width, int height) const {
  GridSpec spec = make_grid_spec(width, height, bins, kernel, projection, seed);
  if (kernel_tau) spec.kernel.tau = *kernel_tau;
  validate(spec);
  return spec;
}

RunConfig from_config(const KeyValueConfig& c) {
  c.check_known(known_config_keys());
  RunConfig r;
  try {
    r.seed = c.get_u64("seed", r.seed);
    r.jobs = c.get_int("jobs", r.jobs);
    r.out = c.get("out", r.out.string());
    r.data = c.get("data", "");
    r.model = c.get("model", "");

    auto& s = r.synth;
    s.count = c.get_int("synth.count", s.count);
    r.synth_test_count = c.get_int("synth.test_count", r.synth_test_count);
    s.num_classes = c.get_int("synth.classes", s.num_classes);
    s.scene.width = c.get_int("synth.width", s.scene.width);
    s.scene.height = c.get_int("synth.height", s.scene.height);
    s.scene.contrast_threshold = c.get_double("synth.threshold", s.scene.contrast_threshold);
    s.scene.motion_frequency = c.get_double("synth.frequency", s.scene.motion_frequency);
    s.scene.duration = c.get_double("synth.duration", s.scene.duration);
    s.scene.amplitude = c.get_double("synth.amplitude", s.scene.amplitude);
    s.scene.time_steps = c.get_int("synth.steps", s.scene.time_steps);

    r.bins = c.get_int("grid.bins", r.bins);
    r.projection = parse_projection(c.get("grid.projection", std::string(to_string(r.projection))));
    r.kernel = parse_kernel_kind(c.get("kernel.kind", std::string(to_string(r.kernel))));
    r.kernel_tau = c.get_optional_double("kernel.tau");

    auto& t = r.schedule;
    t.epochs = c.get_int("train.epochs", t.epochs);
    t.lr = c.get_double("train.lr", t.lr);
    t.decay = c.get_double("train.decay", t.decay);
    t.batch_size = c.get_int("train.batch", t.batch_size);
    t.learn_kernel = c.get_bool("train.learn_kernel", t.learn_kernel);

    auto& a = r.attack;
    a.kind = parse_attack_kind(c.get("attack.mode", std::string(to_string(a.kind))));
    a.objective = parse_objective(c.get("attack.objective", std::string(to_string(a.objective))));
    a.shift.epsilon = c.get_optional_double("attack.epsilon");
    a.shift.alpha = c.get_double("attack.alpha", a.shift.alpha);
    a.shift.iterations = c.get_int("attack.iterations", a.shift.iterations);
    a.shift.frequency = c.get_double("attack.frequency", a.shift.frequency);
    a.shift.cap = c.get_double("attack.cap", a.shift.cap);
    a.shift.lambda = c.get_double("attack.lambda", a.shift.lambda);
    a.null.lambda = a.shift.lambda;
    a.null.per_location = c.get_int("null.m", a.null.per_location);
    a.null.top_fraction = c.get_double("null.top", a.null.top_fraction);
    a.null.epsilon = c.get_double("null.epsilon", a.null.epsilon);
    a.null.alpha = c.get_double("null.alpha", a.null.alpha);
    a.null.iterations = c.get_int("null.iterations", a.null.iterations);
    r.save_streams = c.get_bool("attack.save_streams", r.save_streams);

    auto& v = r.adv;
    v.epochs = c.get_int("advtrain.epochs", v.epochs);
    v.lr = c.get_double("advtrain.lr", v.lr);
    v.decay = c.get_double("advtrain.decay", v.decay);
    v.batch_size = c.get_int("advtrain.batch", v.batch_size);
    v.train_attack = a;
    v.train_attack.kind = parse_attack_kind(c.get("advtrain.attack", "shift"));
    v.train_attack.objective = ObjectiveMode::Untargeted;

    r.sweep_epsilons = c.get_doubles("sweep.epsilons", r.sweep_epsilons);
    r.sweep_frequencies = c.get_doubles("sweep.frequencies", r.sweep_frequencies);
    for (const auto& p : c.get_list("transfer.models")) r.transfer_models.emplace_back(p);
    r.render_count = c.get_int("render.count", r.render_count);

    if (r.jobs < 1) throw Error(ErrorCode::ConfigError, "jobs must be at least 1");
    if (s.count < 1 || r.synth_test_count < 1) throw Error(ErrorCode::ConfigError, "sample counts must be positive");
    if (s.num_classes < 2 || s.num_classes > kNumShapeClasses) {
      throw Error(ErrorCode::ConfigError, "synth.classes must lie in [2, " + std::to_string(kNumShapeClasses) + "]");
    }
    validate(s.scene);
    if (t.epochs < 0 || !(t.lr > 0.0) || !(t.decay > 0.0) || t.batch_size < 1) {
      throw Error(ErrorCode::ConfigError, "training needs epochs >= 0, lr > 0, decay > 0 and batch >= 1");
    }
    if (v.epochs < 0 || !(v.lr > 0.0) || !(v.decay > 0.0) || v.batch_size < 1) {
      throw Error(ErrorCode::ConfigError, "adversarial training needs epochs >= 0, lr > 0, decay > 0 and batch >= 1");
    }
    validate(a.shift);
    validate(a.null);
    r.grid_spec(s.scene.width, s.scene.height);
    if (r.render_count < 1) throw Error(ErrorCode::ConfigError, "render.count must be positive");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::ShapeMismatch) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
    throw;
  }
  return r;
}

void require_path(const std::filesystem::path& path, std::string_view what) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, std::string(what) + " path is not set");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::ConfigError, std::string(what) + " '" + path.string() + "' does not exist");
  }
}

}  // namespace evadv
