#pragma once

// Pass/fail thresholds for the benchmark reports.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "v2h/bench/report.hpp"
#include "v2h/bench/runner.hpp"
#include "v2h/engine/control.hpp"

namespace v2h::bench {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

inline std::string render(const std::vector<Check>& checks) {
  std::string out;
  for (const auto& c : checks) out += (c.pass ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
  return out;
}

namespace detail {

inline std::string printf_str(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

inline bool within(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

}  // namespace detail

inline std::vector<Check> step_checks(const TestReport& rep) {
  using detail::printf_str;
  using detail::within;
  std::vector<Check> out;
  if (rep.rows.empty()) return {{"step rows", false, "report has no rows"}};
  const auto& first = rep.rows.front();
  out.push_back({"first-row response", within(first.response_time_s, 108.8, 109.8),
                 printf_str("%.2f s, expected 109.3 +/- 0.5", first.response_time_s)});

  double lo = 1e9, hi = -1e9;
  bool responses_ok = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const double r = rep.rows[i].response_time_s;
    responses_ok = responses_ok && within(r, 5.0, 8.0);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  out.push_back({"step responses", responses_ok, printf_str("%.2f..%.2f s, expected within [5, 8]", lo, hi)});

  double worst_pct = 0.0, worst_zero_kw = 0.0;
  for (const auto& r : rep.rows) {
    if (std::abs(r.setpoint_kw) > 6.0) continue;
    if (r.error_in_kw()) {
      worst_zero_kw = std::max(worst_zero_kw, r.error);
    } else {
      worst_pct = std::max(worst_pct, r.error);
    }
  }
  out.push_back({"steady-state error", worst_pct < 0.5 && worst_zero_kw < 0.005,
                 printf_str("worst %.3f %% (|setpoint| <= 6), zero row %.4f kW", worst_pct, worst_zero_kw)});

  for (const auto& r : rep.rows) {
    if (std::abs(r.setpoint_kw) <= 6.0) continue;
    const bool ok = within(std::abs(r.achieved_kw), 6.325, 6.425) && within(r.error, 8.0, 14.0);
    out.push_back({printf_str("clamp at %+.0f kW", r.setpoint_kw), ok,
                   printf_str("achieved %.3f kW, error %.2f %% vs commanded", r.achieved_kw, r.error)});
  }
  return out;
}

inline std::vector<Check> sweep_checks(const TestReport& rep) {
  using detail::printf_str;
  using detail::within;
  if (rep.rows.size() != 6) return {{"sweep legs", false, "expected 6 legs"}};
  std::vector<Check> out;
  double lo = 1e9, hi = -1e9, worst = 0.0;
  bool resp_ok = true, err_ok = true;
  std::vector<double> latencies;
  for (const auto& r : rep.rows) {
    resp_ok = resp_ok && within(r.response_time_s, 7.5, 9.5);
    err_ok = err_ok && r.error <= 0.2;
    lo = std::min(lo, r.response_time_s);
    hi = std::max(hi, r.response_time_s);
    worst = std::max(worst, r.error);
    latencies.push_back(r.response_time_s);
  }
  out.push_back({"sweep responses", resp_ok, printf_str("%.2f..%.2f s, expected within [7.5, 9.5]", lo, hi)});
  out.push_back({"sweep error", err_ok, printf_str("worst %.3f %%, expected <= 0.2", worst)});
  const auto fr = engine::assess_freq_regulation(latencies, 6.0);
  out.push_back({"frequency regulation", !fr.suitable,
                 printf_str("p95 %.2f s vs 6 s threshold -> ", fr.p95_s) + (fr.suitable ? "suitable" : "not suitable")});
  return out;
}

inline std::vector<Check> load_follow_checks(const LoadFollowRun& run) {
  using detail::printf_str;
  using detail::within;
  const auto& t = run.report.totals;
  std::vector<Check> out;
  const double gap = std::abs(t.house_kwh - (t.ev_supplied_kwh + t.net_kwh));
  out.push_back({"energy balance", gap < 0.05,
                 printf_str("house %.3f vs ev %.3f + net %.3f kWh", t.house_kwh, t.ev_supplied_kwh, t.net_kwh)});
  out.push_back({"tolerance energy", within(t.tolerance_kwh, 0.5, 0.51),
                 printf_str("%.4f kWh, expected 0.505 +/- 0.005", t.tolerance_kwh)});
  out.push_back({"coverage", within(t.coverage_pct, 60.0, 75.0),
                 printf_str("%.1f %%, expected within [60, 75]", t.coverage_pct)});
  const double settle = run.scenario.charger.dead_time_s +
                        run.scenario.charger.nameplate_kw / run.scenario.charger.ramp_kw_per_s;
  const auto windows = fast_transient_windows(run.scenario.house, 5.0, settle);
  const double frac = fraction_near_alpha(run.trace, run.alpha_kw, 0.05, windows);
  out.push_back({"net power near alpha", frac >= 0.8,
                 printf_str("%.1f %% of samples outside fast-switching windows within alpha +/- 0.05 kW", frac * 100)});
  return out;
}

/// Time for the charger to act on a new setpoint: dead time plus a full
/// nameplate ramp, plus one second of sampling slack.
inline double arbitrage_grace_s(const devsim::ChargerParams& c) {
  return c.dead_time_s + c.nameplate_kw / c.ramp_kw_per_s + 1.0;
}

/// Charging must happen only off-peak and discharging only on-peak. Measured
/// power may trail a band edge by `grace_s`, the time the charger needs to
/// act on a new setpoint; commanded setpoints must match the band exactly.
inline std::vector<Check> arbitrage_checks(const ArbitrageRun& run, double grace_s) {
  using detail::printf_str;
  const auto& tariff = run.mode.tariff;
  const double tod0 = run.scenario.start_tod_s;
  auto label_at = [&](double t) {
    const auto* b = tariff.band_at(tod0 + t);
    return b ? b->label : engine::TariffLabel::MidPeak;
  };
  constexpr double eps = 0.05;  // well above the reporting noise
  int bad_cmd = 0, bad_power = 0;
  for (const auto& r : run.trace) {
    const auto now = label_at(r.t);
    const auto before = label_at(r.t - grace_s);
    if (r.setpoint_kw > 0.0 && now != engine::TariffLabel::OffPeak) ++bad_cmd;
    if (r.setpoint_kw < 0.0 && now != engine::TariffLabel::OnPeak) ++bad_cmd;
    if (r.p_ev_kw > eps && now != engine::TariffLabel::OffPeak && before != engine::TariffLabel::OffPeak) ++bad_power;
    if (r.p_ev_kw < -eps && now != engine::TariffLabel::OnPeak && before != engine::TariffLabel::OnPeak) ++bad_power;
  }
  std::vector<Check> out;
  out.push_back({"revenue positive", run.report.revenue > 0.0, printf_str("$%.4f", run.report.revenue)});
  out.push_back({"band containment", bad_cmd == 0 && bad_power == 0,
                 printf_str("%.0f setpoints and %.0f power samples outside their band", bad_cmd, bad_power)});
  return out;
}

}  // namespace v2h::bench
