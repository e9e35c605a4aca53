#pragma once

// Metrics over engine traces. All functions are pure; the same trace always
// produces the same numbers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2h/devsim/scenario.hpp"
#include "v2h/engine/trace.hpp"
#include "v2h/engine/types.hpp"

namespace v2h::bench {

using engine::TraceRow;

class NeverReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyWindow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScenarioMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default hit band: 1% of the target, never tighter than 0.05 kW.
inline double default_band(double target_kw) { return std::max(0.05, 0.01 * std::abs(target_kw)); }

/// Seconds from `cmd_t` to the first sample within `band` of `target_kw`,
/// searching samples with t in [cmd_t, cmd_t + dwell_s].
inline double response_time(std::span<const TraceRow> trace, double cmd_t, double target_kw, double band,
                            double dwell_s) {
  for (const auto& r : trace) {
    if (r.t < cmd_t - 1e-9) continue;
    if (r.t > cmd_t + dwell_s + 1e-9) break;
    if (std::abs(r.p_ev_kw - target_kw) <= band) return r.t - cmd_t;
  }
  char msg[128];
  std::snprintf(msg, sizeof(msg), "NeverReached: %.3f kW not reached within %.1f s of t=%.3f", target_kw,
                dwell_s, cmd_t);
  throw NeverReached(msg);
}

inline double response_time(std::span<const TraceRow> trace, double cmd_t, double target_kw, double dwell_s) {
  return response_time(trace, cmd_t, target_kw, default_band(target_kw), dwell_s);
}

/// Mean EV power over samples with t in [t0, t1).
inline double mean_ev_power(std::span<const TraceRow> trace, double t0, double t1) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : trace) {
    if (r.t >= t0 - 1e-9 && r.t < t1 - 1e-9) {
      sum += r.p_ev_kw;
      ++n;
    }
  }
  if (n == 0) throw EmptyWindow("EmptyWindow: no samples in the steady-state window");
  return sum / static_cast<double>(n);
}

/// Percent deviation of the mean from the target; for a zero target the
/// absolute mean in kW.
inline double error_vs_target(double mean_kw, double target_kw) {
  if (target_kw == 0.0) return std::abs(mean_kw);
  return std::abs(mean_kw - target_kw) / std::abs(target_kw) * 100.0;
}

inline double steady_state_error(std::span<const TraceRow> trace, double t0, double t1, double target_kw) {
  return error_vs_target(mean_ev_power(trace, t0, t1), target_kw);
}

/// Left-rectangle weights: each sample holds until the next one; the final
/// sample closes the horizon and carries no weight.
inline double interval_after(std::span<const TraceRow> trace, std::size_t i) {
  return i + 1 < trace.size() ? trace[i + 1].t - trace[i].t : 0.0;
}

/// Dollars earned: discharging earns and charging costs at the band rate.
inline double arbitrage_revenue(std::span<const TraceRow> trace, const engine::TariffSchedule& tariff,
                                double start_tod_s = 0.0) {
  double dollars = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double rate = tariff.rate_at(start_tod_s + trace[i].t);
    dollars += rate * (-trace[i].p_ev_kw) * interval_after(trace, i) / 3600.0;
  }
  return dollars;
}

struct LoadFollowItem {
  std::string name;
  double duration_min = 0.0;
  double energy_kwh = 0.0;
};

struct LoadFollowTotals {
  double duration_min = 0.0;
  double house_kwh = 0.0;          // integral of p_net - p_ev
  double ev_supplied_kwh = 0.0;    // EV discharge that served house load
  double ev_discharged_kwh = 0.0;  // all EV discharge
  double net_kwh = 0.0;            // grid import
  double exported_kwh = 0.0;       // grid export
  double tolerance_kwh = 0.0;
  double shiftable_kwh = 0.0;
  double coverage_pct = 0.0;
};

struct LoadFollowReport {
  std::string scenario;
  double alpha_kw = 0.0;
  std::vector<LoadFollowItem> items;
  LoadFollowTotals totals;
};

/// Energy accounting for a zero-export run. EV discharge counts as supplied
/// only up to the house load of the same sample; the remainder is export.
/// With the EV never charging, house = ev_supplied + net holds exactly.
inline LoadFollowReport load_follow_report(std::span<const TraceRow> trace, const devsim::Scenario& scenario,
                                           double alpha_kw) {
  if (scenario.house.appliances.empty()) {
    throw ScenarioMismatch("ScenarioMismatch: scenario '" + scenario.name + "' has no appliance log");
  }
  if (trace.size() < 2) throw EmptyWindow("EmptyWindow: trace needs at least two samples");
  LoadFollowReport rep;
  rep.scenario = scenario.name;
  rep.alpha_kw = alpha_kw;
  const double span_s = trace.back().t - trace.front().t;
  const double duration_s = scenario.duration_s > 0.0 ? scenario.duration_s : span_s;

  for (const auto& a : scenario.house.appliances) {
    rep.items.push_back({a.name, a.duration_s / 60.0, a.energy_kwh()});
  }
  rep.items.push_back({"base_load", duration_s / 60.0, scenario.house.base_load_kw * duration_s / 3600.0});

  auto& tot = rep.totals;
  tot.duration_min = duration_s / 60.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double h = interval_after(trace, i) / 3600.0;
    const auto& r = trace[i];
    const double house = r.p_net_kw - r.p_ev_kw;
    const double discharge = std::max(0.0, -r.p_ev_kw);
    tot.house_kwh += house * h;
    tot.ev_discharged_kwh += discharge * h;
    tot.ev_supplied_kwh += std::min(discharge, std::max(0.0, house)) * h;
    tot.net_kwh += std::max(0.0, r.p_net_kw) * h;
    tot.exported_kwh += std::max(0.0, -r.p_net_kw) * h;
  }
  tot.tolerance_kwh = alpha_kw * duration_s / 3600.0;
  tot.shiftable_kwh = tot.house_kwh - tot.tolerance_kwh;
  tot.coverage_pct = tot.shiftable_kwh > 0.0 ? tot.ev_supplied_kwh / tot.shiftable_kwh * 100.0 : 0.0;
  return rep;
}

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= begin && t < end; }
};

/// Spans where an appliance switches faster than `fast_s`, extended by
/// `settle_s` so the charger can catch up afterwards.
inline std::vector<TimeWindow> fast_transient_windows(const devsim::HouseModel& house, double fast_s,
                                                      double settle_s) {
  std::vector<TimeWindow> out;
  for (const auto& a : house.appliances) {
    double first = -1.0, last = -1.0;
    for (const auto& seg : a.segments) {
      if (seg.duration_s < fast_s) {
        if (first < 0.0) first = a.start_s + seg.offset_s;
        last = a.start_s + seg.offset_s + seg.duration_s;
      }
    }
    if (first >= 0.0) out.push_back({first, last + settle_s});
  }
  return out;
}

/// Fraction of samples outside `exclude` whose net power lies within
/// `tol_kw` of `alpha_kw`.
inline double fraction_near_alpha(std::span<const TraceRow> trace, double alpha_kw, double tol_kw,
                                  const std::vector<TimeWindow>& exclude) {
  std::size_t n = 0, hits = 0;
  for (const auto& r : trace) {
    if (std::any_of(exclude.begin(), exclude.end(), [&](const TimeWindow& w) { return w.contains(r.t); })) {
      continue;
    }
    ++n;
    if (std::abs(r.p_net_kw - alpha_kw) <= tol_kw) ++hits;
  }
  if (n == 0) throw EmptyWindow("EmptyWindow: every sample is excluded");
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace v2h::bench
