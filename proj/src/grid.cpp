#include "evadv/grid.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "evadv/error.hpp"

namespace evadv {

namespace {

void check_geometry(const EventStream& stream, const GridSpec& spec) {
  if (stream.width != spec.width || stream.height != spec.height) {
    throw Error(ErrorCode::GeometryMismatch, "stream is " + std::to_string(stream.width) + "x" +
                                                 std::to_string(stream.height) + ", grid expects " +
                                                 std::to_string(spec.width) + "x" + std::to_string(spec.height));
  }
  if (stream.time_state != TimeState::Normalized) {
    throw Error(ErrorCode::InvalidConfig, "grid representations need normalized times");
  }
}

void check_est_shape(const GridTensor& g, const GridSpec& spec) {
  if (g.channels != spec.est_channels() || g.width != spec.width || g.height != spec.height) {
    throw Error(ErrorCode::GeometryMismatch, "gradient tensor does not match the EST shape");
  }
}

std::vector<std::size_t> canonical_order(const std::vector<Event>& events) {
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!std::is_sorted(events.begin(), events.end(), canonical_less)) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return canonical_less(events[a], events[b]); });
  }
  return order;
}

}  // namespace

std::string_view to_string(Projection p) {
  switch (p) {
    case Projection::None: return "none";
    case Projection::PolarityAvg: return "polarity_avg";
    case Projection::TemporalAvg: return "temporal_avg";
  }
  return "unknown";
}

Projection parse_projection(std::string_view name) {
  if (name == "none" || name == "est") return Projection::None;
  if (name == "polarity_avg" || name == "voxel") return Projection::PolarityAvg;
  if (name == "temporal_avg" || name == "two_channel") return Projection::TemporalAvg;
  throw Error(ErrorCode::InvalidConfig, "unknown projection '" + std::string(name) + "'");
}

int GridSpec::channels() const {
  switch (projection) {
    case Projection::None: return 2 * bins;
    case Projection::PolarityAvg: return bins;
    case Projection::TemporalAvg: return 2;
  }
  return 0;
}

void validate(const GridSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw Error(ErrorCode::InvalidConfig, "grid size must be positive");
  if (spec.bins < 1) throw Error(ErrorCode::InvalidConfig, "at least one temporal bin required");
  validate(spec.kernel);
}

GridSpec make_grid_spec(int width, int height, int bins, KernelKind kind, Projection projection,
                        std::uint64_t kernel_seed) {
  GridSpec spec;
  spec.width = width;
  spec.height = height;
  spec.bins = bins;
  spec.projection = projection;
  const double tau = 1.0 / bins;
  switch (kind) {
    case KernelKind::Trilinear: spec.kernel = make_trilinear(tau); break;
    case KernelKind::Exponential: spec.kernel = make_exponential(tau); break;
    case KernelKind::Mlp: spec.kernel = make_mlp(tau, kernel_seed); break;
  }
  validate(spec);
  return spec;
}

GridTensor build_est(const EventStream& stream, const GridSpec& spec) {
  check_geometry(stream, spec);
  GridTensor out(spec.est_channels(), spec.width, spec.height);
  for (const auto i : canonical_order(stream.events)) {
    const Event& e = stream.events[i];
    if (e.t == 0.0) continue;
    const int offset = polarity_offset(spec, e.p);
    for (int n = 0; n < spec.bins; ++n) {
      const double k = kernel_eval(spec.kernel, bin_time(spec, n) - e.t);
      if (k != 0.0) out.at(offset + n, e.x, e.y) += e.t * k;
    }
  }
  return out;
}

std::vector<double> est_backward(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dT) {
  check_geometry(stream, spec);
  check_est_shape(dL_dT, spec);
  std::vector<double> grads(stream.size(), 0.0);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream.events[i];
    const int offset = polarity_offset(spec, e.p);
    double g = 0.0;
    for (int n = 0; n < spec.bins; ++n) {
      const double upstream = dL_dT.at(offset + n, e.x, e.y);
      if (upstream == 0.0) continue;
      const double dt = bin_time(spec, n) - e.t;
      double local = kernel_eval(spec.kernel, dt);
      if (e.t != 0.0) local -= e.t * kernel_grad_t(spec.kernel, dt);
      g += upstream * local;
    }
    grads[i] = g;
  }
  return grads;
}

std::vector<double> est_backward_kernel(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dT) {
  check_geometry(stream, spec);
  check_est_shape(dL_dT, spec);
  if (spec.kernel.kind != KernelKind::Mlp) throw Error(ErrorCode::NotLearnable, "kernel has no parameters");
  std::vector<double> grads(kMlpParamCount, 0.0);
  for (const auto& e : stream.events) {
    if (e.t == 0.0) continue;
    const int offset = polarity_offset(spec, e.p);
    for (int n = 0; n < spec.bins; ++n) {
      const double upstream = dL_dT.at(offset + n, e.x, e.y);
      if (upstream == 0.0) continue;
      accumulate_kernel_grad_params(spec.kernel, bin_time(spec, n) - e.t, upstream * e.t, grads);
    }
  }
  return grads;
}

GridTensor project(const GridTensor& est, Projection mode) {
  if (est.projection != Projection::None) throw Error(ErrorCode::AlreadyProjected, "tensor is already projected");
  if (est.channels % 2 != 0) throw Error(ErrorCode::ShapeMismatch, "EST needs an even channel count");
  if (mode == Projection::None) return est;
  const int bins = est.channels / 2;
  const std::size_t plane = static_cast<std::size_t>(est.width) * est.height;
  if (mode == Projection::PolarityAvg) {
    GridTensor out(bins, est.width, est.height, mode);
    for (int n = 0; n < bins; ++n) {
      const double* pos = &est.values[static_cast<std::size_t>(n) * plane];
      const double* neg = &est.values[static_cast<std::size_t>(n + bins) * plane];
      double* dst = &out.values[static_cast<std::size_t>(n) * plane];
      for (std::size_t k = 0; k < plane; ++k) dst[k] = (pos[k] + neg[k]) / 2.0;
    }
    return out;
  }
  GridTensor out(2, est.width, est.height, mode);
  for (int side = 0; side < 2; ++side) {
    double* dst = &out.values[static_cast<std::size_t>(side) * plane];
    for (std::size_t k = 0; k < plane; ++k) {
      double sum = 0.0;
      for (int n = 0; n < bins; ++n) sum += est.values[static_cast<std::size_t>(side * bins + n) * plane + k];
      dst[k] = sum / bins;
    }
  }
  return out;
}

GridTensor project_backward(const GridTensor& grad, Projection mode, int bins) {
  if (mode == Projection::None) return grad;
  GridTensor out(2 * bins, grad.width, grad.height);
  const std::size_t plane = static_cast<std::size_t>(grad.width) * grad.height;
  if (mode == Projection::PolarityAvg) {
    if (grad.channels != bins) throw Error(ErrorCode::ShapeMismatch, "voxel gradient channel count");
    for (int n = 0; n < bins; ++n) {
      for (std::size_t k = 0; k < plane; ++k) {
        const double g = grad.values[static_cast<std::size_t>(n) * plane + k] / 2.0;
        out.values[static_cast<std::size_t>(n) * plane + k] = g;
        out.values[static_cast<std::size_t>(n + bins) * plane + k] = g;
      }
    }
    return out;
  }
  if (grad.channels != 2) throw Error(ErrorCode::ShapeMismatch, "two-channel gradient channel count");
  for (int side = 0; side < 2; ++side) {
    for (std::size_t k = 0; k < plane; ++k) {
      const double g = grad.values[static_cast<std::size_t>(side) * plane + k] / bins;
      for (int n = 0; n < bins; ++n) out.values[static_cast<std::size_t>(side * bins + n) * plane + k] = g;
    }
  }
  return out;
}

GridTensor represent(const EventStream& stream, const GridSpec& spec) {
  return project(build_est(stream, spec), spec.projection);
}

std::vector<double> represent_backward(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dRep) {
  if (dL_dRep.channels != spec.channels() || dL_dRep.width != spec.width || dL_dRep.height != spec.height) {
    throw Error(ErrorCode::GeometryMismatch, "gradient does not match the representation shape");
  }
  if (spec.projection == Projection::None) return est_backward(stream, spec, dL_dRep);
  return est_backward(stream, spec, project_backward(dL_dRep, spec.projection, spec.bins));
}

}  // namespace evadv
