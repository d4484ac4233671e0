#include "evadv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evadv/error.hpp"
#include "evadv/parallel.hpp"
#include "evadv/random.hpp"

namespace evadv {

NetShape net_shape_for(const GridSpec& spec, int num_classes) {
  NetShape s;
  s.in_channels = spec.channels();
  s.width = spec.width;
  s.height = spec.height;
  s.num_classes = num_classes;
  return s;
}

Classifier make_classifier(const GridSpec& spec, int num_classes, std::uint64_t seed) {
  validate(spec);
  return Classifier{spec, init_model<float>(net_shape_for(spec, num_classes), seed)};
}

std::vector<float> network_input(const GridSpec& spec, const EventStream& stream) {
  const GridTensor t = represent(stream, spec);
  return std::vector<float>(t.values.begin(), t.values.end());
}

int argmax(const std::vector<float>& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<float> predict_logits(const Classifier& clf, const EventStream& stream) {
  const auto input = network_input(clf.spec, stream);
  return forward<float>(clf.model, input).logits;
}

int predict(const Classifier& clf, const EventStream& stream) { return argmax(predict_logits(clf, stream)); }

double evaluate(const Classifier& clf, const Dataset& data, int jobs) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate on an empty dataset");
  std::vector<int> correct(data.size(), 0);
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    correct[i] = predict(clf, data.samples[i].stream) == data.samples[i].label ? 1 : 0;
  });
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / static_cast<double>(data.size());
}

double mean_loss(const Classifier& clf, const Dataset& data, int jobs) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate on an empty dataset");
  std::vector<double> losses(data.size(), 0.0);
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto logits = predict_logits(clf, data.samples[i].stream);
    losses[i] = cross_entropy<float>(logits, data.samples[i].label);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

TrainResult train(Classifier clf, const Dataset& train_set, const Dataset* val_set, const TrainSchedule& schedule) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (schedule.epochs < 0 || schedule.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "bad training schedule");
  TrainResult result;
  if (schedule.epochs == 0) {
    result.classifier = std::move(clf);
    return result;
  }
  const bool learn_kernel = schedule.learn_kernel && clf.spec.kernel.kind == KernelKind::Mlp;
  const std::size_t n = train_set.size();

  // Fixed kernels: representations never change, build them once.
  std::vector<std::vector<float>> cached;
  if (!learn_kernel) {
    cached.resize(n);
    parallel_for(n, schedule.jobs, [&](std::size_t i) { cached[i] = network_input(clf.spec, train_set.samples[i].stream); });
  }

  auto adam = make_adam(clf.model, schedule.lr);
  AdamMoments<double> kernel_moments(learn_kernel ? kMlpParamCount : 0);
  std::int64_t kernel_step = 0;
  Rng rng(schedule.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double lr = schedule.lr;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    adam.hyper.lr = lr;
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(schedule.batch_size), n - start);
      std::vector<std::vector<float>> param_grads(count);
      std::vector<std::vector<double>> kernel_grads(count);
      std::vector<double> losses(count);
      std::vector<int> right(count);
      parallel_for(count, schedule.jobs, [&](std::size_t b) {
        const Sample& s = train_set.samples[order[start + b]];
        const std::vector<float> input = learn_kernel ? network_input(clf.spec, s.stream) : cached[order[start + b]];
        const auto cache = forward<float>(clf.model, input);
        losses[b] = cross_entropy<float>(cache.logits, s.label);
        right[b] = argmax(cache.logits) == s.label;
        auto g = backward<float>(clf.model, cache, s.label);
        param_grads[b] = std::move(g.params);
        if (learn_kernel) {
          GridTensor dT(clf.spec.channels(), clf.spec.width, clf.spec.height, clf.spec.projection);
          std::copy(g.input.begin(), g.input.end(), dT.values.begin());
          kernel_grads[b] = est_backward_kernel(s.stream, clf.spec,
                                                project_backward(dT, clf.spec.projection, clf.spec.bins));
        }
      });
      std::vector<float> grad(clf.model.size(), 0.0f);
      for (std::size_t b = 0; b < count; ++b) {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += param_grads[b][k];
        loss_sum += losses[b];
        hits += static_cast<std::size_t>(right[b]);
      }
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& v : grad) v *= inv;
      adam_step(clf.model, grad, adam);
      if (learn_kernel) {
        std::vector<double> kg(kMlpParamCount, 0.0);
        for (std::size_t b = 0; b < count; ++b) {
          for (std::size_t k = 0; k < kMlpParamCount; ++k) kg[k] += kernel_grads[b][k] / static_cast<double>(count);
        }
        adam_update<double>(clf.spec.kernel.mlp_weights, kg, kernel_moments, AdamHyper{lr, 0.9, 0.999, 1e-8},
                            ++kernel_step);
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    stats.val_accuracy = val_set && !val_set->empty() ? evaluate(clf, *val_set, schedule.jobs) : -1.0;
    result.history.push_back(stats);
    lr *= schedule.decay;
  }
  result.classifier = std::move(clf);
  return result;
}

}  // namespace evadv
