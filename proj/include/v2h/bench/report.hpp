#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2h/bench/metrics.hpp"

namespace v2h::bench {

struct StepRow {
  double from_kw = 0.0;
  double setpoint_kw = 0.0;
  double effective_kw = 0.0;  // setpoint after the charger clamp
  double achieved_kw = 0.0;   // steady-state mean
  double response_time_s = std::numeric_limits<double>::quiet_NaN();  // NaN when never reached
  double error = 0.0;         // percent, or kW for a zero setpoint
  bool first = false;

  bool error_in_kw() const { return setpoint_kw == 0.0; }
};

struct TestReport {
  std::string kind;  // "step" or "sweep"
  std::string scenario;
  int trials = 1;
  double steady_window_s = 30.0;
  std::vector<StepRow> rows;
};

struct StepAnalysis {
  engine::ChargerLimits limits;
  double steady_window_s = 30.0;
};

/// Splits a manual-mode trace at every setpoint change and measures each
/// step. The command time of a step is the first row carrying its setpoint.
inline std::vector<StepRow> analyze_steps(std::span<const TraceRow> trace, const StepAnalysis& opt = {}) {
  struct Cmd {
    std::size_t index;
    double setpoint;
  };
  std::vector<Cmd> cmds;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].mode != "manual") continue;
    if (cmds.empty() || trace[i].setpoint_kw != cmds.back().setpoint) cmds.push_back({i, trace[i].setpoint_kw});
  }
  std::vector<StepRow> rows;
  for (std::size_t k = 0; k < cmds.size(); ++k) {
    const auto& row0 = trace[cmds[k].index];
    const double cmd_t = row0.t;
    const double end_t = k + 1 < cmds.size() ? trace[cmds[k + 1].index].t
                                              : trace.back().t + (trace.size() > 1 ? interval_after(trace, trace.size() - 2) : 0.0);
    StepRow r;
    r.first = k == 0;
    r.from_kw = k == 0 ? 0.0 : cmds[k - 1].setpoint;
    r.setpoint_kw = cmds[k].setpoint;
    const double p_max = opt.limits.p_max_kw(row0.soc_pct);
    r.effective_kw = std::clamp(r.setpoint_kw, -p_max, p_max);
    const auto window = trace.subspan(cmds[k].index);
    try {
      r.response_time_s = response_time(window, cmd_t, r.effective_kw, end_t - cmd_t);
    } catch (const NeverReached&) {
    }
    r.achieved_kw = mean_ev_power(window, end_t - opt.steady_window_s, end_t);
    r.error = error_vs_target(r.achieved_kw, r.setpoint_kw);
    rows.push_back(r);
  }
  return rows;
}

/// Per-cell arithmetic mean over trials with identical step sequences.
inline std::vector<StepRow> average_trials(const std::vector<std::vector<StepRow>>& trials) {
  if (trials.empty()) return {};
  std::vector<StepRow> out = trials.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double achieved = 0.0, response = 0.0, error = 0.0;
    for (const auto& t : trials) {
      if (t.size() != out.size() || t[i].setpoint_kw != out[i].setpoint_kw) {
        throw std::invalid_argument("trials differ in their step sequence");
      }
      achieved += t[i].achieved_kw;
      response += t[i].response_time_s;
      error += t[i].error;
    }
    const double n = static_cast<double>(trials.size());
    out[i].achieved_kw = achieved / n;
    out[i].response_time_s = response / n;
    out[i].error = error / n;
  }
  return out;
}

enum class Format { Text, Csv, Json };

inline Format parse_format(const std::string& s) {
  if (s == "text") return Format::Text;
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw std::invalid_argument("unknown format '" + s + "'");
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline std::string render(const TestReport& rep, Format format) {
  using detail::fmt;
  std::ostringstream out;
  if (format == Format::Json) {
    nlohmann::json j{{"kind", rep.kind},
                     {"scenario", rep.scenario},
                     {"trials", rep.trials},
                     {"band", "max(0.05 kW, 1% of target)"},
                     {"steady_window_s", rep.steady_window_s}};
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
      j["rows"].push_back({{"from_kw", r.from_kw},
                           {"setpoint_kw", r.setpoint_kw},
                           {"effective_kw", r.effective_kw},
                           {"achieved_kw", r.achieved_kw},
                           {"response_time_s", detail::num_or_null(r.response_time_s)},
                           {"error", r.error},
                           {"error_unit", r.error_in_kw() ? "kW" : "%"}});
    }
    out << j.dump(2) << '\n';
  } else if (format == Format::Csv) {
    out << "from_kw,setpoint_kw,effective_kw,achieved_kw,response_time_s,error,error_unit\n";
    for (const auto& r : rep.rows) {
      out << fmt("%.2f", r.from_kw) << ',' << fmt("%.2f", r.setpoint_kw) << ',' << fmt("%.3f", r.effective_kw)
          << ',' << fmt("%.3f", r.achieved_kw) << ','
          << (std::isfinite(r.response_time_s) ? fmt("%.2f", r.response_time_s) : "") << ','
          << fmt(r.error_in_kw() ? "%.3f" : "%.2f", r.error) << ',' << (r.error_in_kw() ? "kW" : "%") << '\n';
    }
  } else {
    out << (rep.kind == "sweep" ? "SWEEP TEST RESULTS" : "STEP TEST RESULTS") << " (" << rep.scenario << ", "
        << rep.trials << (rep.trials == 1 ? " trial" : " trials") << ")\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %12s %14s %10s\n", "Setpoint (kW)", "Achieved (kW)", "Response (s)",
                  "Error");
    out << line;
    for (const auto& r : rep.rows) {
      std::string label = rep.kind == "sweep" ? fmt("%+.0f", r.from_kw) + " to " + fmt("%+.0f", r.setpoint_kw)
                                              : fmt("%.0f", r.setpoint_kw);
      if (r.first && rep.kind != "sweep") label += " (start)";
      const std::string err =
          r.error_in_kw() ? fmt("%.3f", r.error) + " kW" : fmt("%.2f", r.error) + " %";
      const std::string resp = std::isfinite(r.response_time_s) ? fmt("%.2f", r.response_time_s) : "never";
      std::snprintf(line, sizeof(line), "%-16s %12.2f %14s %10s\n", label.c_str(), r.achieved_kw, resp.c_str(),
                    err.c_str());
      out << line;
    }
    out << "band: max(0.05 kW, 1% of clamped target); steady state: last " << fmt("%.0f", rep.steady_window_s)
        << " s of each step\n";
  }
  return out.str();
}

inline std::string render(const LoadFollowReport& rep, Format format) {
  using detail::fmt;
  const auto& t = rep.totals;
  std::ostringstream out;
  if (format == Format::Json) {
    nlohmann::json j{{"scenario", rep.scenario}, {"alpha_kw", rep.alpha_kw}};
    j["items"] = nlohmann::json::array();
    for (const auto& i : rep.items) {
      j["items"].push_back({{"name", i.name}, {"duration_min", i.duration_min}, {"energy_kwh", i.energy_kwh}});
    }
    j["totals"] = {{"duration_min", t.duration_min},       {"house_kwh", t.house_kwh},
                   {"ev_supplied_kwh", t.ev_supplied_kwh}, {"ev_discharged_kwh", t.ev_discharged_kwh},
                   {"net_kwh", t.net_kwh},                 {"exported_kwh", t.exported_kwh},
                   {"tolerance_kwh", t.tolerance_kwh},     {"shiftable_kwh", t.shiftable_kwh},
                   {"coverage_pct", t.coverage_pct}};
    out << j.dump(2) << '\n';
  } else if (format == Format::Csv) {
    out << "item,duration_min,energy_kwh\n";
    for (const auto& i : rep.items) out << i.name << ',' << fmt("%.0f", i.duration_min) << ',' << fmt("%.3f", i.energy_kwh) << '\n';
    out << "tolerance," << fmt("%.0f", t.duration_min) << ',' << fmt("%.3f", t.tolerance_kwh) << '\n';
    out << "ev_supplied," << fmt("%.0f", t.duration_min) << ',' << fmt("%.3f", -t.ev_supplied_kwh) << '\n';
    out << "net_house," << fmt("%.0f", t.duration_min) << ',' << fmt("%.3f", t.net_kwh) << '\n';
    out << "house_load," << fmt("%.0f", t.duration_min) << ',' << fmt("%.3f", t.house_kwh) << '\n';
    out << "shiftable," << fmt("%.0f", t.duration_min) << ',' << fmt("%.3f", t.shiftable_kwh) << '\n';
    out << "coverage_pct,," << fmt("%.1f", t.coverage_pct) << '\n';
  } else {
    out << "LOAD FOLLOWING RESULTS (" << rep.scenario << ", alpha " << fmt("%.2f", rep.alpha_kw) << " kW)\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %14s %12s\n", "Item", "Duration (min)", "Energy (kWh)");
    out << line;
    auto row = [&](const std::string& name, double minutes, double kwh) {
      std::snprintf(line, sizeof(line), "%-18s %14.0f %12.2f\n", name.c_str(), minutes, kwh);
      out << line;
    };
    for (const auto& i : rep.items) row(i.name, i.duration_min, i.energy_kwh);
    std::snprintf(line, sizeof(line), "%-18s %14.0f %12.3f\n", "tolerance", t.duration_min, t.tolerance_kwh);
    out << line;
    row("EV", t.duration_min, -t.ev_supplied_kwh);
    row("Net House", t.duration_min, t.net_kwh);
    row("House Load", t.duration_min, t.house_kwh);
    out << "TOTAL house " << fmt("%.2f", t.house_kwh) << " = EV " << fmt("%.2f", t.ev_supplied_kwh) << " + net "
        << fmt("%.2f", t.net_kwh) << " kWh\n";
    out << "shiftable " << fmt("%.2f", t.shiftable_kwh) << " kWh, coverage " << fmt("%.1f", t.coverage_pct)
        << " %, EV discharged " << fmt("%.2f", t.ev_discharged_kwh) << " kWh, exported "
        << fmt("%.2f", t.exported_kwh) << " kWh\n";
  }
  return out.str();
}

/// Energy moved in each tariff band plus the resulting revenue.
struct ArbitrageReport {
  std::string scenario;
  double revenue = 0.0;
  double charged_kwh[3] = {0, 0, 0};     // indexed by TariffLabel
  double discharged_kwh[3] = {0, 0, 0};
  double soc_start = 0.0;
  double soc_end = 0.0;
  double soc_min = 0.0;
  double soc_max = 0.0;
};

inline ArbitrageReport arbitrage_report(std::span<const TraceRow> trace, const engine::TariffSchedule& tariff,
                                        double start_tod_s, std::string scenario = {}) {
  ArbitrageReport rep;
  rep.scenario = std::move(scenario);
  rep.revenue = arbitrage_revenue(trace, tariff, start_tod_s);
  if (trace.empty()) return rep;
  rep.soc_start = trace.front().soc_pct;
  rep.soc_end = trace.back().soc_pct;
  rep.soc_min = rep.soc_max = rep.soc_start;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    rep.soc_min = std::min(rep.soc_min, r.soc_pct);
    rep.soc_max = std::max(rep.soc_max, r.soc_pct);
    const auto* band = tariff.band_at(start_tod_s + r.t);
    if (band == nullptr) continue;
    const double kwh = r.p_ev_kw * interval_after(trace, i) / 3600.0;
    const auto idx = static_cast<std::size_t>(band->label);
    (kwh > 0 ? rep.charged_kwh[idx] : rep.discharged_kwh[idx]) += std::abs(kwh);
  }
  return rep;
}

inline std::string render(const ArbitrageReport& rep, Format format) {
  using detail::fmt;
  static constexpr engine::TariffLabel labels[] = {engine::TariffLabel::OffPeak, engine::TariffLabel::MidPeak,
                                                   engine::TariffLabel::OnPeak};
  std::ostringstream out;
  if (format == Format::Json) {
    nlohmann::json j{{"scenario", rep.scenario}, {"revenue", rep.revenue},     {"soc_start", rep.soc_start},
                     {"soc_end", rep.soc_end},   {"soc_min", rep.soc_min},     {"soc_max", rep.soc_max}};
    for (auto l : labels) {
      const auto i = static_cast<std::size_t>(l);
      j["bands"][engine::to_string(l)] = {{"charged_kwh", rep.charged_kwh[i]},
                                          {"discharged_kwh", rep.discharged_kwh[i]}};
    }
    out << j.dump(2) << '\n';
  } else if (format == Format::Csv) {
    out << "band,charged_kwh,discharged_kwh\n";
    for (auto l : labels) {
      const auto i = static_cast<std::size_t>(l);
      out << engine::to_string(l) << ',' << fmt("%.3f", rep.charged_kwh[i]) << ','
          << fmt("%.3f", rep.discharged_kwh[i]) << '\n';
    }
    out << "revenue,," << fmt("%.4f", rep.revenue) << '\n';
  } else {
    out << "ARBITRAGE RESULTS (" << rep.scenario << ")\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %14s %16s\n", "Band", "Charged (kWh)", "Discharged (kWh)");
    out << line;
    for (auto l : labels) {
      const auto i = static_cast<std::size_t>(l);
      std::snprintf(line, sizeof(line), "%-10s %14.2f %16.2f\n", engine::to_string(l), rep.charged_kwh[i],
                    rep.discharged_kwh[i]);
      out << line;
    }
    out << "SOC " << fmt("%.1f", rep.soc_start) << " -> " << fmt("%.1f", rep.soc_end) << " % (range "
        << fmt("%.1f", rep.soc_min) << " to " << fmt("%.1f", rep.soc_max) << ")\n";
    out << "revenue $" << fmt("%.2f", rep.revenue) << '\n';
  }
  return out.str();
}

}  // namespace v2h::bench
