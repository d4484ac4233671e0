#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evadv/dataset.hpp"
#include "evadv/grid.hpp"
#include "evadv/net.hpp"

namespace evadv {

/// A representation recipe together with the network that consumes it.
struct Classifier {
  GridSpec spec;
  ModelParams<float> model;
};

NetShape net_shape_for(const GridSpec& spec, int num_classes);

Classifier make_classifier(const GridSpec& spec, int num_classes, std::uint64_t seed);

/// Representation of a stream cast to the network's 32-bit input.
std::vector<float> network_input(const GridSpec& spec, const EventStream& stream);

std::vector<float> predict_logits(const Classifier& clf, const EventStream& stream);
int predict(const Classifier& clf, const EventStream& stream);
int argmax(const std::vector<float>& logits);

struct TrainSchedule {
  int epochs = 15;
  double lr = 1e-3;
  double decay = 1.0;  // multiplicative, applied after every epoch
  int batch_size = 16;
  bool learn_kernel = false;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // negative when no validation set was given
};

struct TrainResult {
  Classifier classifier;
  std::vector<EpochStats> history;
};

/// Mini-batch Adam training. Representations are built per sample; when
/// `learn_kernel` is set and the kernel is an MLP its weights are trained too.
TrainResult train(Classifier clf, const Dataset& train_set, const Dataset* val_set, const TrainSchedule& schedule);

/// Fraction of samples whose argmax logit equals the label.
double evaluate(const Classifier& clf, const Dataset& data, int jobs = 1);

/// Mean cross-entropy over a dataset.
double mean_loss(const Classifier& clf, const Dataset& data, int jobs = 1);

/// Text header with the grid spec and a parameter shape manifest, followed by
/// raw little-endian float32 network weights and float64 kernel weights.
void save_checkpoint(const Classifier& clf, const std::filesystem::path& path);
Classifier load_checkpoint(const std::filesystem::path& path);

}  // namespace evadv
