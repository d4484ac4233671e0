#pragma once

#include <cstdint>
#include <utility>

#include "evadv/event.hpp"

namespace evadv {

enum class ShapeClass : int { Bar = 0, Cross = 1, Disc = 2, Ring = 3 };
inline constexpr int kNumShapeClasses = 4;

/// A shape translating sinusoidally (elliptical path) over a uniform background, observed by a
/// simulated event sensor. Geometry details (size, orientation, direction,
/// phase, contrast) are drawn from the seed passed to synth_sample.
struct SceneConfig {
  int width = 32;
  int height = 32;
  double contrast_threshold = 0.2;  // log-brightness units
  double motion_frequency = 1.0;    // oscillations per capture window
  int shape_class = 0;
  double duration = 0.1;  // seconds
  double amplitude = 4.0;  // pixels; 0 gives a static scene
  int time_steps = 300;    // simulation steps over the capture window
};

void validate(const SceneConfig& cfg);

/// Simulates the log-brightness trigger rule per pixel: an event of polarity
/// sign(dL) fires each time the change since that pixel's last event reaches
/// the contrast threshold. Returns a raw (microsecond) stream and its label.
std::pair<EventStream, int> synth_sample(const SceneConfig& cfg, std::uint64_t seed);

/// Scene geometry drawn for one seed; exposed for tests.
struct SceneGeometry {
  double center_x, center_y;
  double size;         // characteristic radius in pixels
  double orientation;  // radians
  double direction;    // motion direction, radians
  double phase;        // motion phase, radians
  double ellipse;      // minor / major axis ratio of the motion path
  double background;   // linear intensity
  double foreground;   // linear intensity
};

SceneGeometry draw_geometry(const SceneConfig& cfg, std::uint64_t seed);

/// Log brightness of pixel centre (px, py) at time fraction s in [0, 1].
double scene_log_brightness(const SceneConfig& cfg, const SceneGeometry& geom, double px, double py, double s);

}  // namespace evadv
