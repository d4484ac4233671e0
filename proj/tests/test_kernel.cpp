#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evadv/kernel.hpp"
#include "support.hpp"

using namespace evadv;
using evtest::code_of;
using evtest::rel_err;

namespace {

bool near_kink(const KernelParams& k, double dt, double margin) {
  if (k.kind == KernelKind::Trilinear) {
    return std::abs(dt) < margin || std::abs(std::abs(dt) - k.tau) < margin;
  }
  if (k.kind == KernelKind::Exponential) return std::abs(dt) < margin;
  return false;
}

}  // namespace

TEST_CASE("kernel values") {
  CHECK(kernel_eval(make_trilinear(0.5), 0.0) == 1.0);
  CHECK(kernel_eval(make_trilinear(0.5), 0.25) == 0.5);
  CHECK(kernel_eval(make_exponential(0.5), 0.0) == 2.0);
  CHECK(kernel_eval(make_exponential(0.5), -0.1) == 0.0);
  CHECK(kernel_eval(make_exponential(0.5), 0.5) == doctest::Approx(2.0 * std::exp(-1.0)));
}

TEST_CASE("kernel time derivatives") {
  const auto tri = make_trilinear(0.5);
  CHECK(kernel_grad_t(tri, 0.25) == -2.0);
  CHECK(kernel_grad_t(tri, -0.25) == 2.0);
  CHECK(kernel_grad_t(tri, 0.7) == 0.0);
  for (double kink : {-0.5, 0.0, 0.5}) CHECK(kernel_grad_t(tri, kink) == 0.0);
}

TEST_CASE("trilinear shape") {
  Rng rng(1);
  const auto k = make_trilinear(0.3);
  CHECK(kernel_eval(k, 0.3) == 0.0);
  CHECK(kernel_eval(k, -0.3) == 0.0);
  for (int i = 0; i < 1000; ++i) {
    const double dt = uniform(rng, -1.0, 1.0);
    CHECK(kernel_eval(k, dt) == kernel_eval(k, -dt));
    if (std::abs(dt) >= 0.3) CHECK(kernel_eval(k, dt) == 0.0);
  }
}

TEST_CASE("exponential shape and integral") {
  const auto k = make_exponential(0.2);
  double prev = kernel_eval(k, 0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = kernel_eval(k, i * 0.005);
    CHECK(v >= 0.0);
    CHECK(v <= prev);
    prev = v;
  }
  // Composite Simpson over [0, 40 tau]; the tail beyond is below 1e-17.
  const int n = 20000;
  const double hi = 40.0 * k.tau;
  const double h = hi / n;
  double sum = kernel_eval(k, 0.0) + kernel_eval(k, hi);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * kernel_eval(k, i * h);
  CHECK(std::abs(sum * h / 3.0 - 1.0) <= 1e-6);
}

TEST_CASE("time derivatives match finite differences") {
  Rng rng(2);
  std::vector<KernelParams> kernels{make_trilinear(0.2), make_trilinear(1.0), make_exponential(0.2),
                                    make_exponential(0.7), make_mlp(0.2, 3, false), make_mlp(0.5, 4, true)};
  const double h = 1e-6;
  for (const auto& k : kernels) {
    int checked = 0;
    while (checked < 200) {
      const double dt = uniform(rng, -1.5, 1.5);
      if (near_kink(k, dt, 1e-6 + h)) continue;
      const double fd = evtest::central_diff([&](double u) { return kernel_eval(k, u); }, dt, h);
      CHECK(rel_err(kernel_grad_t(k, dt), fd, 1e-6) <= 1e-4);
      ++checked;
    }
  }
}

TEST_CASE("mlp time derivative at 0.3") {
  const auto k = make_mlp(0.25, 99, false);
  const double fd = evtest::central_diff([&](double u) { return kernel_eval(k, u); }, 0.3, 1e-6);
  CHECK(rel_err(kernel_grad_t(k, 0.3), fd) <= 1e-5);
}

TEST_CASE("mlp parameter gradients") {
  KernelParams zero = make_mlp(0.5, 1, false);
  std::fill(zero.mlp_weights.begin(), zero.mlp_weights.end(), 0.0);
  const auto g0 = kernel_grad_params(zero, 0.37);
  REQUIRE(g0.size() == kMlpParamCount);
  CHECK(g0.back() == 1.0);

  Rng rng(6);
  const auto k = make_mlp(0.4, 7, false);
  for (double dt : {-0.6, -0.1, 0.05, 0.3, 0.9}) {
    const auto g = kernel_grad_params(k, dt);
    CHECK(g == kernel_grad_params(k, dt));
    for (int probe = 0; probe < 40; ++probe) {
      const std::size_t j = uniform_index(rng, kMlpParamCount);
      auto f = [&](double w) {
        KernelParams q = k;
        q.mlp_weights[j] = w;
        return kernel_eval(q, dt);
      };
      const double fd = evtest::central_diff(f, k.mlp_weights[j], 1e-6);
      if (std::abs(g[j]) < 1e-7 && std::abs(fd) < 1e-7) continue;
      CHECK(rel_err(g[j], fd, 1e-6) <= 1e-5);
    }
    std::vector<double> acc(kMlpParamCount, 0.0);
    accumulate_kernel_grad_params(k, dt, 2.0, acc);
    for (std::size_t j = 0; j < kMlpParamCount; ++j) CHECK(acc[j] == doctest::Approx(2.0 * g[j]));
  }
}

TEST_CASE("only the mlp kernel is learnable") {
  CHECK(code_of([] { kernel_grad_params(make_trilinear(0.2), 0.1); }) == ErrorCode::NotLearnable);
  CHECK(code_of([] { kernel_grad_params(make_exponential(0.2), 0.1); }) == ErrorCode::NotLearnable);
}

TEST_CASE("fitted mlp starts close to the trilinear hat") {
  const auto mlp = make_mlp(0.2, 5, true);
  const auto tri = make_trilinear(0.2);
  double worst = 0.0;
  for (int i = -40; i <= 40; ++i) {
    const double dt = i * 0.01;
    worst = std::max(worst, std::abs(kernel_eval(mlp, dt) - kernel_eval(tri, dt)));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("kernel validation and names") {
  KernelParams bad = make_trilinear(0.2);
  bad.tau = 0.0;
  CHECK(code_of([&] { validate(bad); }) == ErrorCode::InvalidConfig);
  KernelParams short_mlp = make_mlp(0.2, 1, false);
  short_mlp.mlp_weights.pop_back();
  CHECK(code_of([&] { validate(short_mlp); }) == ErrorCode::InvalidConfig);
  for (auto kind : {KernelKind::Trilinear, KernelKind::Exponential, KernelKind::Mlp}) {
    CHECK(parse_kernel_kind(to_string(kind)) == kind);
  }
  CHECK(code_of([] { parse_kernel_kind("gaussian"); }) == ErrorCode::InvalidConfig);
}
