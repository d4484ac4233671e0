#include "evadv/kernel.hpp"

#include <array>
#include <cmath>
#include <string>

#include "evadv/error.hpp"
#include "evadv/optim.hpp"
#include "evadv/random.hpp"

namespace evadv {

namespace {

constexpr int H = kMlpHidden;
constexpr std::size_t kW1 = 0;
constexpr std::size_t kB1 = kW1 + H;
constexpr std::size_t kW2 = kB1 + H;
constexpr std::size_t kB2 = kW2 + H * H;
constexpr std::size_t kW3 = kB2 + H;
constexpr std::size_t kB3 = kW3 + H;
static_assert(kB3 + 1 == kMlpParamCount);

struct MlpActivations {
  std::array<double, H> h1;
  std::array<double, H> h2;
  double out;
};

MlpActivations mlp_forward(const std::vector<double>& w, double u) {
  MlpActivations a{};
  for (int j = 0; j < H; ++j) a.h1[j] = std::tanh(w[kW1 + j] * u + w[kB1 + j]);
  for (int i = 0; i < H; ++i) {
    double z = w[kB2 + i];
    const double* row = &w[kW2 + static_cast<std::size_t>(i) * H];
    for (int j = 0; j < H; ++j) z += row[j] * a.h1[j];
    a.h2[i] = std::tanh(z);
  }
  double out = w[kB3];
  for (int i = 0; i < H; ++i) out += w[kW3 + i] * a.h2[i];
  a.out = out;
  return a;
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Trilinear: return "trilinear";
    case KernelKind::Exponential: return "exponential";
    case KernelKind::Mlp: return "mlp";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "trilinear") return KernelKind::Trilinear;
  if (name == "exponential") return KernelKind::Exponential;
  if (name == "mlp") return KernelKind::Mlp;
  throw Error(ErrorCode::InvalidConfig, "unknown kernel kind '" + std::string(name) + "'");
}

void validate(const KernelParams& params) {
  if (!(params.tau > 0.0) || !std::isfinite(params.tau)) throw Error(ErrorCode::InvalidConfig, "kernel tau must be positive");
  if (params.kind == KernelKind::Mlp) {
    if (params.mlp_weights.size() != kMlpParamCount) throw Error(ErrorCode::InvalidConfig, "mlp kernel has wrong weight count");
    for (double w : params.mlp_weights) {
      if (!std::isfinite(w)) throw Error(ErrorCode::InvalidConfig, "mlp kernel weight is not finite");
    }
  } else if (!params.mlp_weights.empty()) {
    throw Error(ErrorCode::InvalidConfig, "only mlp kernels carry weights");
  }
}

KernelParams make_trilinear(double tau) { return {KernelKind::Trilinear, tau, {}}; }

KernelParams make_exponential(double tau) { return {KernelKind::Exponential, tau, {}}; }

KernelParams make_mlp(double tau, std::uint64_t seed, bool fit_trilinear) {
  KernelParams k{KernelKind::Mlp, tau, std::vector<double>(kMlpParamCount, 0.0)};
  Rng rng(seed);
  auto init = [&](std::size_t off, std::size_t n, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < n; ++i) k.mlp_weights[off + i] = uniform(rng, -limit, limit);
  };
  init(kW1, H, 1, H);
  init(kB1, H, 1, H);
  init(kW2, H * H, H, H);
  init(kW3, H, H, 1);
  if (!fit_trilinear) return k;

  // Full-batch regression onto max(0, 1 - |u|) over u in [-2, 2].
  constexpr int kPoints = 81;
  AdamMoments<double> moments(kMlpParamCount);
  std::vector<double> grad(kMlpParamCount);
  const AdamHyper hyper{1e-2, 0.9, 0.999, 1e-8};
  for (int step = 1; step <= 1500; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int p = 0; p < kPoints; ++p) {
      const double u = -2.0 + 4.0 * p / (kPoints - 1);
      const double target = std::max(0.0, 1.0 - std::abs(u));
      const double err = mlp_forward(k.mlp_weights, u).out - target;
      accumulate_kernel_grad_params(k, u * tau, 2.0 * err / kPoints, grad);
    }
    adam_update<double>(k.mlp_weights, grad, moments, hyper, step);
  }
  return k;
}

double kernel_eval(const KernelParams& params, double dt) {
  const double tau = params.tau;
  switch (params.kind) {
    case KernelKind::Trilinear:
      return std::max(0.0, 1.0 - std::abs(dt) / tau);
    case KernelKind::Exponential:
      return dt >= 0.0 ? std::exp(-dt / tau) / tau : 0.0;
    case KernelKind::Mlp:
      return mlp_forward(params.mlp_weights, dt / tau).out;
  }
  return 0.0;
}

double kernel_grad_t(const KernelParams& params, double dt) {
  const double tau = params.tau;
  switch (params.kind) {
    case KernelKind::Trilinear: {
      const double a = std::abs(dt);
      if (dt == 0.0 || a >= tau) return 0.0;
      return dt > 0.0 ? -1.0 / tau : 1.0 / tau;
    }
    case KernelKind::Exponential:
      return dt >= 0.0 ? -std::exp(-dt / tau) / (tau * tau) : 0.0;
    case KernelKind::Mlp: {
      const auto& w = params.mlp_weights;
      const auto a = mlp_forward(w, dt / tau);
      std::array<double, H> dh1{};
      for (int j = 0; j < H; ++j) dh1[j] = (1.0 - a.h1[j] * a.h1[j]) * w[kW1 + j];
      double dout = 0.0;
      for (int i = 0; i < H; ++i) {
        const double* row = &w[kW2 + static_cast<std::size_t>(i) * H];
        double dz = 0.0;
        for (int j = 0; j < H; ++j) dz += row[j] * dh1[j];
        dout += w[kW3 + i] * (1.0 - a.h2[i] * a.h2[i]) * dz;
      }
      return dout / tau;
    }
  }
  return 0.0;
}

void accumulate_kernel_grad_params(const KernelParams& params, double dt, double scale, std::vector<double>& out) {
  if (params.kind != KernelKind::Mlp) throw Error(ErrorCode::NotLearnable, std::string(to_string(params.kind)) + " kernel has no parameters");
  if (out.size() != kMlpParamCount) out.assign(kMlpParamCount, 0.0);
  const auto& w = params.mlp_weights;
  const double u = dt / params.tau;
  const auto a = mlp_forward(w, u);

  out[kB3] += scale;
  std::array<double, H> delta2{};
  for (int i = 0; i < H; ++i) {
    out[kW3 + i] += scale * a.h2[i];
    delta2[i] = scale * w[kW3 + i] * (1.0 - a.h2[i] * a.h2[i]);
    out[kB2 + i] += delta2[i];
  }
  std::array<double, H> back{};
  for (int i = 0; i < H; ++i) {
    double* grow = &out[kW2 + static_cast<std::size_t>(i) * H];
    const double* wrow = &w[kW2 + static_cast<std::size_t>(i) * H];
    for (int j = 0; j < H; ++j) {
      grow[j] += delta2[i] * a.h1[j];
      back[j] += wrow[j] * delta2[i];
    }
  }
  for (int j = 0; j < H; ++j) {
    const double delta1 = back[j] * (1.0 - a.h1[j] * a.h1[j]);
    out[kW1 + j] += delta1 * u;
    out[kB1 + j] += delta1;
  }
}

std::vector<double> kernel_grad_params(const KernelParams& params, double dt) {
  std::vector<double> g(kMlpParamCount, 0.0);
  accumulate_kernel_grad_params(params, dt, 1.0, g);
  return g;
}

}  // namespace evadv
