#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include "evadv/error.hpp"
#include "evadv/event.hpp"
#include "evadv/random.hpp"

namespace evtest {

using namespace evadv;

/// Normalized stream with times drawn from (lo, hi].
inline EventStream random_stream(Rng& rng, int w, int h, std::size_t n, double lo = 0.0, double hi = 1.0) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.time_state = TimeState::Normalized;
  for (std::size_t i = 0; i < n; ++i) {
    Event e;
    e.x = static_cast<std::uint16_t>(uniform_index(rng, static_cast<std::uint64_t>(w)));
    e.y = static_cast<std::uint16_t>(uniform_index(rng, static_cast<std::uint64_t>(h)));
    e.p = uniform_index(rng, 2) == 0 ? -1 : 1;
    e.t = lo + (hi - lo) * uniform_open_closed(rng);
    s.events.push_back(e);
  }
  return s;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected an evadv::Error");
}

}  // namespace evtest
