#include "evadv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "evadv/error.hpp"
#include "evadv/random.hpp"

namespace evadv {

namespace {

// Signed distance to a rectangle with half extents (a, b), local frame.
double box_distance(double u, double v, double a, double b) {
  const double dx = std::abs(u) - a;
  const double dy = std::abs(v) - b;
  const double outside = std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  return outside + std::min(std::max(dx, dy), 0.0);
}

double shape_distance(ShapeClass shape, double u, double v, double size) {
  switch (shape) {
    case ShapeClass::Bar:
      return box_distance(u, v, size, 0.3 * size);
    case ShapeClass::Cross:
      return std::min(box_distance(u, v, size, 0.25 * size), box_distance(u, v, 0.25 * size, size));
    case ShapeClass::Disc:
      return std::hypot(u, v) - 0.8 * size;
    case ShapeClass::Ring:
      return std::abs(std::hypot(u, v) - 0.8 * size) - 0.22 * size;
  }
  return 1e9;
}

}  // namespace

void validate(const SceneConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (!(cfg.contrast_threshold > 0.0)) fail("contrast_threshold must be positive");
  if (!(cfg.motion_frequency >= 1.0)) fail("motion_frequency must be at least 1");
  if (cfg.shape_class < 0 || cfg.shape_class >= kNumShapeClasses) fail("unknown shape class");
  if (cfg.width < 8 || cfg.height < 8 || cfg.width > 256 || cfg.height > 256) fail("frame must be 8..256 pixels");
  if (!(cfg.duration > 0.0) || cfg.duration * 1e6 > kMaxRawTimestamp) fail("duration outside the 23-bit microsecond range");
  if (!(cfg.amplitude >= 0.0)) fail("amplitude must be nonnegative");
  if (cfg.time_steps < 1) fail("time_steps must be positive");
}

SceneGeometry draw_geometry(const SceneConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  SceneGeometry g{};
  const double scale = std::min(cfg.width, cfg.height) / 32.0;
  g.size = uniform(rng, 6.0, 9.0) * scale;
  g.center_x = cfg.width / 2.0 + uniform(rng, -3.0, 3.0) * scale;
  g.center_y = cfg.height / 2.0 + uniform(rng, -3.0, 3.0) * scale;
  g.orientation = uniform(rng, 0.0, std::numbers::pi);
  g.direction = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  g.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  g.ellipse = uniform(rng, 0.5, 1.0);
  const double lo = uniform(rng, 0.15, 0.3);
  const double hi = uniform(rng, 0.7, 0.95);
  if (uniform01(rng) < 0.5) {
    g.background = lo;
    g.foreground = hi;
  } else {
    g.background = hi;
    g.foreground = lo;
  }
  return g;
}

namespace {

struct Pose {
  double cx, cy, c, s;
  double log_bg, log_fg;
};

Pose pose_at(const SceneConfig& cfg, const SceneGeometry& g, double s) {
  // Elliptical sinusoid along `direction` (major) and its normal (minor),
  // starting from the rest position at s = 0.
  const double w = 2.0 * std::numbers::pi * cfg.motion_frequency * s + g.phase;
  const double major = cfg.amplitude * (std::sin(w) - std::sin(g.phase));
  const double minor = cfg.amplitude * g.ellipse * (std::cos(w) - std::cos(g.phase));
  const double cd = std::cos(g.direction);
  const double sd = std::sin(g.direction);
  return {g.center_x + major * cd - minor * sd, g.center_y + major * sd + minor * cd,
          std::cos(g.orientation), std::sin(g.orientation), std::log(g.background), std::log(g.foreground)};
}

double log_brightness(const SceneConfig& cfg, const SceneGeometry& g, const Pose& pose, double px, double py) {
  const double dx = px - pose.cx;
  const double dy = py - pose.cy;
  const double u = pose.c * dx + pose.s * dy;
  const double v = -pose.s * dx + pose.c * dy;
  const double d = shape_distance(static_cast<ShapeClass>(cfg.shape_class), u, v, g.size);
  if (d >= 0.5) return pose.log_bg;
  if (d <= -0.5) return pose.log_fg;
  return std::log(g.background + (g.foreground - g.background) * (0.5 - d));
}

}  // namespace

double scene_log_brightness(const SceneConfig& cfg, const SceneGeometry& g, double px, double py, double s) {
  return log_brightness(cfg, g, pose_at(cfg, g, s), px, py);
}

std::pair<EventStream, int> synth_sample(const SceneConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const SceneGeometry geom = draw_geometry(cfg, seed);
  const std::size_t pixels = static_cast<std::size_t>(cfg.width) * cfg.height;
  const double window_us = cfg.duration * 1e6;
  const double step_us = window_us / cfg.time_steps;

  std::vector<double> reference(pixels);
  std::vector<double> previous(pixels);
  const Pose start = pose_at(cfg, geom, 0.0);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const double l = log_brightness(cfg, geom, start, x + 0.5, y + 0.5);
      reference[y * cfg.width + x] = l;
      previous[y * cfg.width + x] = l;
    }
  }

  EventStream stream;
  stream.width = cfg.width;
  stream.height = cfg.height;
  stream.time_state = TimeState::Raw;
  const double threshold = cfg.contrast_threshold;
  for (int step = 1; step <= cfg.time_steps; ++step) {
    const double s = static_cast<double>(step) / cfg.time_steps;
    const double t_prev = (step - 1) * step_us;
    const Pose pose = pose_at(cfg, geom, s);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
        const double now = log_brightness(cfg, geom, pose, x + 0.5, y + 0.5);
        const double before = previous[i];
        for (;;) {
          const double delta = now - reference[i];
          if (std::abs(delta) < threshold) break;
          const int polarity = delta > 0 ? 1 : -1;
          const double level = reference[i] + polarity * threshold;
          // Linear interpolation of the crossing inside this step.
          const double frac = now != before ? std::clamp((level - before) / (now - before), 0.0, 1.0) : 1.0;
          const double t = std::max(1.0, std::round(t_prev + frac * step_us));
          stream.events.push_back(
              Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, static_cast<std::int8_t>(polarity)});
          reference[i] = level;
        }
        previous[i] = now;
      }
    }
  }
  sort_canonical(stream);
  return {std::move(stream), cfg.shape_class};
}

}  // namespace evadv
