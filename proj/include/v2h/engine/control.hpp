#pragma once

// Setpoint laws for the automated modes. All pure functions; powers in kW,
// charging positive.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "v2h/engine/types.hpp"

namespace v2h::engine {

/// Zero-export law on the previous sample: discharge to cover the house load
/// minus the tolerance alpha, so that net import settles at alpha.
inline double zero_export_setpoint(const Sample& prev, double alpha_kw, double p_max_kw) {
  const double house = prev.p_net_kw - prev.p_ev_kw;
  return std::clamp(alpha_kw - house, -p_max_kw, p_max_kw);
}

inline double zero_export_setpoint(const Sample& prev, double alpha_kw, const ChargerLimits& limits = {}) {
  return zero_export_setpoint(prev, alpha_kw, limits.p_max_kw(prev.soc_pct));
}

/// Full-power charge in off-peak, full-power discharge in on-peak, otherwise idle.
inline double arbitrage_decide(double time_of_day_s, const TariffSchedule& tariff, double soc_pct,
                               double soc_floor_pct, double soc_ceiling_pct,
                               const ChargerLimits& limits = {}) {
  const auto* band = tariff.band_at(time_of_day_s);
  if (band == nullptr) return 0.0;
  const double p_max = limits.p_max_kw(soc_pct);
  if (band->label == TariffLabel::OffPeak && soc_pct < soc_ceiling_pct) return p_max;
  if (band->label == TariffLabel::OnPeak && soc_pct > soc_floor_pct) return -p_max;
  return 0.0;
}

/// Export up to the requested reduction while the event is active.
inline double dr_dispatch(double now, const DrEvent& event, double soc_pct,
                          const ChargerLimits& limits = {}) {
  if (now < event.start || now >= event.end) return 0.0;
  return -std::min(limits.p_max_kw(soc_pct), event.requested_kw);
}

struct FreqRegulationAssessment {
  bool suitable = false;
  double p95_s = 0.0;
};

/// Nearest-rank 95th percentile of response latencies against a threshold.
inline FreqRegulationAssessment assess_freq_regulation(std::span<const double> latencies,
                                                       double threshold_s = 6.0) {
  if (latencies.empty()) throw std::invalid_argument("EmptyInput: no latency samples");
  std::vector<double> sorted(latencies.begin(), latencies.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = (95 * sorted.size() + 99) / 100;  // ceil(0.95 n) in integers
  const double p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  return {p95 <= threshold_s, p95};
}

}  // namespace v2h::engine
