#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "evadv/event.hpp"
#include "evadv/kernel.hpp"

namespace evadv {

/// none = full EST, polarity_avg = voxel grid, temporal_avg = two-channel.
enum class Projection { None, PolarityAvg, TemporalAvg };

std::string_view to_string(Projection p);
Projection parse_projection(std::string_view name);

struct GridSpec {
  int width = 32;
  int height = 32;
  int bins = 5;
  KernelParams kernel = make_trilinear(0.2);
  Projection projection = Projection::None;

  double delta_t() const { return 1.0 / bins; }
  /// Channels of the unprojected EST (both polarities).
  int est_channels() const { return 2 * bins; }
  /// Channels after projection, i.e. what the classifier sees.
  int channels() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

void validate(const GridSpec& spec);

/// EST spec with the kernel support set to the bin width.
GridSpec make_grid_spec(int width, int height, int bins, KernelKind kind = KernelKind::Trilinear,
                        Projection projection = Projection::None, std::uint64_t kernel_seed = 0);

/// Dense C x W x H tensor, stored with y fastest.
struct GridTensor {
  int channels = 0;
  int width = 0;
  int height = 0;
  Projection projection = Projection::None;
  std::vector<double> values;

  GridTensor() = default;
  GridTensor(int c, int w, int h, Projection proj = Projection::None)
      : channels(c), width(w), height(h), projection(proj), values(static_cast<std::size_t>(c) * w * h, 0.0) {}

  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * width + x) * height + y;
  }
  double& at(int c, int x, int y) { return values[index(c, x, y)]; }
  double at(int c, int x, int y) const { return values[index(c, x, y)]; }

  friend bool operator==(const GridTensor&, const GridTensor&) = default;
};

/// Nominal time of bin n.
inline double bin_time(const GridSpec& spec, int n) { return n * spec.delta_t(); }

/// Channel offset of a polarity inside the EST: + first, then -.
inline int polarity_offset(const GridSpec& spec, int polarity) { return polarity > 0 ? 0 : spec.bins; }

/// Each event adds t * k(t_n - t) to bin n of its polarity at its pixel.
/// Events are accumulated in canonical order, so the result does not depend
/// on the order they are given in. Null events (t == 0) add nothing.
GridTensor build_est(const EventStream& stream, const GridSpec& spec);

/// Per-event d<dL_dT, T>/dt, in input order:
///   sum_n dL/dT[c(e, n)] * (k(t_n - t) - t * k'(t_n - t)).
std::vector<double> est_backward(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dT);

/// Gradient of <dL_dT, T> with respect to the MLP kernel weights.
std::vector<double> est_backward_kernel(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dT);

GridTensor project(const GridTensor& est, Projection mode);

/// Adjoint of project: maps a gradient on the projected tensor to the EST.
GridTensor project_backward(const GridTensor& grad, Projection mode, int bins);

/// build_est followed by the spec's projection.
GridTensor represent(const EventStream& stream, const GridSpec& spec);

/// Per-event time gradient through the spec's projection.
std::vector<double> represent_backward(const EventStream& stream, const GridSpec& spec, const GridTensor& dL_dRep);

/// Three temporal groups per polarity as RGB, min-max scaled, positive
/// polarity on the left and negative on the right; binary PPM (P6).
void render_image(const GridTensor& tensor, const std::filesystem::path& path);

/// Flat little-endian float32 dump with a 16-byte header (C, W, H, magic).
inline constexpr std::uint32_t kTensorMagic = 0x54534556;  // "VEST"
void write_tensor_file(const GridTensor& tensor, const std::filesystem::path& path);
GridTensor read_tensor_file(const std::filesystem::path& path);

}  // namespace evadv
