#pragma once

#include <cstdint>
#include <stdexcept>

namespace v2h::devsim {

/// Shared simulated time base. Time is derived from an integer tick count so
/// long runs do not accumulate rounding drift.
struct SimClock {
  double step_s = 0.05;
  double scale = 0.0;  // simulated seconds per wall second; 0 = free-run
  std::int64_t ticks = 0;

  double now() const { return static_cast<double>(ticks) * step_s; }
  void tick() { ++ticks; }

  void validate() const {
    if (!(step_s > 0.0)) throw std::invalid_argument("clock: step_s must be positive");
    if (!(scale == 0.0 || scale >= 1.0)) {
      throw std::invalid_argument("clock: scale must be 0 (free-run) or >= 1");
    }
  }
};

}  // namespace v2h::devsim
