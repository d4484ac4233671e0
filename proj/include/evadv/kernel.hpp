#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evadv {

enum class KernelKind { Trilinear, Exponential, Mlp };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

inline constexpr int kMlpHidden = 30;
// w1, b1, W2 (row-major, out x in), b2, w3, b3
inline constexpr std::size_t kMlpParamCount =
    kMlpHidden + kMlpHidden + kMlpHidden * kMlpHidden + kMlpHidden + kMlpHidden + 1;

/// Temporal kernel. Spatially the kernels are Dirac, so only the time offset
/// between a bin's nominal time and the event matters.
struct KernelParams {
  KernelKind kind = KernelKind::Trilinear;
  double tau = 1.0;
  std::vector<double> mlp_weights;  // kMlpParamCount entries iff kind == Mlp

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

void validate(const KernelParams& params);

KernelParams make_trilinear(double tau);
KernelParams make_exponential(double tau);

/// MLP kernel 1 -> 30 -> 30 -> 1 (tanh hidden, linear output) on dt / tau.
/// With `fit_trilinear`, the network is first regressed onto the trilinear
/// hat so that training starts from the voting kernel.
KernelParams make_mlp(double tau, std::uint64_t seed, bool fit_trilinear = true);

double kernel_eval(const KernelParams& params, double dt);

/// d k / d dt. Trilinear returns 0 at its kinks (-tau, 0, tau).
double kernel_grad_t(const KernelParams& params, double dt);

/// d k / d mlp_weights; throws NotLearnable unless kind == Mlp.
std::vector<double> kernel_grad_params(const KernelParams& params, double dt);

/// Accumulates scale * d k / d mlp_weights into `out` without allocating.
void accumulate_kernel_grad_params(const KernelParams& params, double dt, double scale, std::vector<double>& out);

}  // namespace evadv
