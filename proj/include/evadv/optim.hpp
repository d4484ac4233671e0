#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "evadv/error.hpp"

namespace evadv {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamMoments {
  std::vector<T> first;
  std::vector<T> second;

  AdamMoments() = default;
  explicit AdamMoments(std::size_t n) : first(n, T(0)), second(n, T(0)) {}
};

/// One bias-corrected Adam update; `step` is the 1-based step index.
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamMoments<T>& m, const AdamHyper& h,
                 std::int64_t step) {
  if (grads.size() != params.size() || m.first.size() != params.size() || m.second.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam: parameter, gradient and moment sizes differ");
  }
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(h.beta1);
  const T b2 = static_cast<T>(h.beta2);
  const T lr_hat = static_cast<T>(h.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(h.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m.first[i] = b1 * m.first[i] + (T(1) - b1) * g;
    m.second[i] = b2 * m.second[i] + (T(1) - b2) * g * g;
    params[i] -= lr_hat * m.first[i] / (std::sqrt(m.second[i] * inv_c2) + eps);
  }
}

template <typename T>
void adam_update(std::vector<T>& params, const std::vector<T>& grads, AdamMoments<T>& m, const AdamHyper& h,
                 std::int64_t step) {
  adam_update<T>(std::span<T>(params), std::span<const T>(grads), m, h, step);
}

}  // namespace evadv
