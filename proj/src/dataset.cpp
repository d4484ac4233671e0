#include "evadv/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evadv/error.hpp"
#include "evadv/random.hpp"

namespace evadv {

namespace fs = std::filesystem;

std::vector<RawSample> synth_raw_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.count < 0 || spec.num_classes < 1 || spec.num_classes > kNumShapeClasses) {
    throw Error(ErrorCode::InvalidConfig, "bad synthetic dataset size or class count");
  }
  std::vector<RawSample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    SceneConfig scene = spec.scene;
    scene.shape_class = i % spec.num_classes;
    auto [stream, label] = synth_sample(scene, derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(RawSample{std::move(stream), label});
  }
  return out;
}

Sample prepare_sample(const RawSample& raw, double lambda) {
  Sample s;
  double t_max = 0.5;
  for (const auto& e : raw.stream.events) t_max = std::max(t_max, e.t);
  s.stream = enforce_min_resolution(normalize_times(raw.stream), lambda);
  s.label = raw.label;
  s.time_scale_us = t_max;
  return s;
}

Dataset prepare_dataset(const std::vector<RawSample>& raws, int num_classes, double lambda) {
  Dataset d;
  d.num_classes = num_classes;
  for (const auto& r : raws) {
    if (d.samples.empty()) {
      d.width = r.stream.width;
      d.height = r.stream.height;
    } else if (r.stream.width != d.width || r.stream.height != d.height) {
      throw Error(ErrorCode::GeometryMismatch, "dataset mixes sensor geometries");
    }
    if (r.label < 0 || r.label >= num_classes) throw Error(ErrorCode::InvalidConfig, "label out of range");
    d.samples.push_back(prepare_sample(r, lambda));
  }
  return d;
}

EventStream to_raw(const EventStream& normalized, double time_scale_us) {
  EventStream out = normalized;
  for (auto& e : out.events) e.t = std::max(1.0, std::round(e.t * time_scale_us));
  out.time_state = TimeState::Raw;
  sort_canonical(out);
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("path,", 0) == 0) continue;
    }
    std::stringstream ss(line);
    ManifestEntry e;
    std::string label, w, h;
    if (!std::getline(ss, e.path, ',') || !std::getline(ss, label, ',') || !std::getline(ss, w, ',') ||
        !std::getline(ss, h, ',')) {
      throw Error(ErrorCode::IoFailure, "malformed manifest row: " + line);
    }
    try {
      e.label = std::stoi(label);
      e.width = std::stoi(w);
      e.height = std::stoi(h);
    } catch (const std::exception&) {
      throw Error(ErrorCode::IoFailure, "malformed manifest row: " + line);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& file, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
  out << "path,label,width,height\n";
  for (const auto& e : entries) out << e.path << ',' << e.label << ',' << e.width << ',' << e.height << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& file, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

void write_dataset(const fs::path& dir, const std::vector<RawSample>& samples) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string());
  std::vector<ManifestEntry> entries;
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "sample_%05zu.bin", i);
    write_bytes(dir / name, encode_stream(samples[i].stream));
    entries.push_back({name, samples[i].label, samples[i].stream.width, samples[i].stream.height});
  }
  write_manifest(dir / kManifestName, entries);
}

std::vector<RawSample> read_raw_dataset(const fs::path& dir) {
  std::vector<RawSample> out;
  for (const auto& entry : read_manifest(dir / kManifestName)) {
    const auto bytes = read_bytes(dir / entry.path);
    out.push_back({decode_stream(bytes, entry.width, entry.height), entry.label});
  }
  return out;
}

Dataset load_dataset(const fs::path& dir, double lambda, int num_classes) {
  const auto raws = read_raw_dataset(dir);
  if (raws.empty()) throw Error(ErrorCode::EmptyDataset, "no samples in " + dir.string());
  if (num_classes <= 0) {
    for (const auto& r : raws) num_classes = std::max(num_classes, r.label + 1);
  }
  return prepare_dataset(raws, num_classes, lambda);
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(data.width));
  mix(static_cast<std::uint64_t>(data.height));
  mix(static_cast<std::uint64_t>(data.num_classes));
  for (const auto& s : data.samples) {
    mix(static_cast<std::uint64_t>(s.label));
    mix(s.stream.size());
    for (const auto& e : s.stream.events) {
      mix((static_cast<std::uint64_t>(e.x) << 32) | (static_cast<std::uint64_t>(e.y) << 8) |
          static_cast<std::uint8_t>(e.p));
      mix(std::bit_cast<std::uint64_t>(e.t));
    }
  }
  return h;
}

}  // namespace evadv
