#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace convoforge {

/// Simulated time, millisecond resolution. Never read from a wall clock.
struct SimTime {
  std::int64_t ms = 0;

  static SimTime from_seconds(double s) { return SimTime{static_cast<std::int64_t>(std::llround(s * 1000.0))}; }
  double seconds() const { return static_cast<double>(ms) / 1000.0; }
  auto operator<=>(const SimTime&) const = default;
};

inline SimTime operator+(SimTime a, SimTime b) { return SimTime{a.ms + b.ms}; }
inline SimTime operator-(SimTime a, SimTime b) { return SimTime{a.ms - b.ms}; }

/// Fixed three-decimal seconds rendering, e.g. "12.400".
inline std::string format_seconds(SimTime t) {
  char buf[48];
  const std::int64_t whole = t.ms / 1000;
  const std::int64_t frac = t.ms % 1000;
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

class SimClock {
 public:
  SimTime now() const { return now_; }

  void advance(SimTime by) {
    if (by.ms < 0) throw std::invalid_argument("clock cannot run backwards");
    now_ = now_ + by;
  }

 private:
  SimTime now_{};
};

}  // namespace convoforge
