#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evadv/optim.hpp"

namespace evadv {

/// Shape of the two-block convolutional classifier:
/// conv3x3(16) -> ReLU -> meanpool2 -> conv3x3(32) -> ReLU -> meanpool2 -> affine.
struct NetShape {
  int in_channels = 10;
  int width = 32;
  int height = 32;
  int num_classes = 4;
  int conv1 = 16;
  int conv2 = 32;

  int features() const { return conv2 * (width / 4) * (height / 4); }

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

void validate(const NetShape& shape);

/// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b, total;
};

ParamLayout layout_of(const NetShape& shape);

/// Returns a fresh identifier; models get a new one whenever their weights change.
std::uint64_t next_model_version();

template <typename T>
struct ModelParams {
  NetShape shape;
  std::vector<T> data;
  std::uint64_t version = 0;

  ParamLayout layout() const { return layout_of(shape); }
  std::size_t size() const { return data.size(); }
  void touch() { version = next_model_version(); }
};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
template <typename T>
ModelParams<T> init_model(const NetShape& shape, std::uint64_t seed);

template <typename U, typename T>
ModelParams<U> cast_model(const ModelParams<T>& m) {
  ModelParams<U> out;
  out.shape = m.shape;
  out.data.assign(m.data.begin(), m.data.end());
  out.touch();
  return out;
}

/// Activations retained by forward for backward.
template <typename T>
struct ForwardCache {
  std::uint64_t model_version = 0;
  std::vector<T> input;   // C x W x H
  std::vector<T> z1;      // conv1 pre-activation, conv1 x W x H
  std::vector<T> pool1;   // conv1 x W/2 x H/2
  std::vector<T> z2;      // conv2 pre-activation, conv2 x W/2 x H/2
  std::vector<T> pool2;   // conv2 x W/4 x H/4, the flattened features
  std::vector<T> logits;
};

template <typename T>
ForwardCache<T> forward(const ModelParams<T>& model, std::span<const T> input);

/// -log softmax(logits)[label], evaluated with max subtraction.
template <typename T>
T cross_entropy(std::span<const T> logits, int label);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
struct Gradients {
  std::vector<T> params;  // same layout as ModelParams::data
  std::vector<T> input;   // same layout as the network input
};

/// Backpropagates an arbitrary upstream gradient on the logits.
template <typename T>
Gradients<T> backward_from_logits(const ModelParams<T>& model, const ForwardCache<T>& cache,
                                  std::span<const T> dL_dlogits);

/// Gradients of cross_entropy(logits, label).
template <typename T>
Gradients<T> backward(const ModelParams<T>& model, const ForwardCache<T>& cache, int label);

template <typename T>
struct AdamState {
  AdamHyper hyper;
  AdamMoments<T> moments;
  std::int64_t step = 0;
};

template <typename T>
AdamState<T> make_adam(const ModelParams<T>& model, double lr);

/// Bias-corrected Adam update of every parameter; increments the step counter.
template <typename T>
void adam_step(ModelParams<T>& model, const std::vector<T>& grads, AdamState<T>& state);

}  // namespace evadv
