#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evadv/event.hpp"
#include "evadv/synth.hpp"

namespace evadv {

/// A labelled, normalized stream ready for representation building.
struct Sample {
  EventStream stream;
  int label = 0;
  double time_scale_us = 1.0;  // raw microseconds per normalized unit
};

struct Dataset {
  std::vector<Sample> samples;
  int width = 0;
  int height = 0;
  int num_classes = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct RawSample {
  EventStream stream;  // microseconds
  int label = 0;
};

struct SynthSpec {
  int count = 500;
  int num_classes = kNumShapeClasses;
  SceneConfig scene;
};

/// Balanced classes (round-robin), one derived seed per sample.
std::vector<RawSample> synth_raw_dataset(const SynthSpec& spec, std::uint64_t seed);

/// Normalizes and enforces the minimum time resolution.
Sample prepare_sample(const RawSample& raw, double lambda = kDefaultMinResolution);

Dataset prepare_dataset(const std::vector<RawSample>& raws, int num_classes, double lambda = kDefaultMinResolution);

/// Converts a normalized stream back to integer microseconds.
EventStream to_raw(const EventStream& normalized, double time_scale_us);

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  int label = 0;
  int width = 0;
  int height = 0;
};

inline constexpr const char* kManifestName = "manifest.csv";

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const std::vector<ManifestEntry>& entries);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& file);
void write_bytes(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes);

/// Writes `sample_NNNNN.bin` files plus manifest.csv into `dir`.
void write_dataset(const std::filesystem::path& dir, const std::vector<RawSample>& samples);

std::vector<RawSample> read_raw_dataset(const std::filesystem::path& dir);

/// Reads a dataset directory; num_classes is 1 + the largest label seen unless given.
Dataset load_dataset(const std::filesystem::path& dir, double lambda = kDefaultMinResolution, int num_classes = 0);

/// FNV-1a over labels, geometry and every event field.
std::uint64_t dataset_hash(const Dataset& data);

}  // namespace evadv
