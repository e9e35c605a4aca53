#pragma once

// Engine settings read from the [engine] section of a scenario-format file.
//
//   [engine]
//   sample_hz = 5
//   mode = zero_export          # idle | manual | zero_export | arbitrage | dr
//   alpha_kw = 0.1
//   setpoint_kw = 2.0           # manual
//   soc_floor_pct = 30          # arbitrage
//   soc_ceiling_pct = 90
//   dr_start_s = 600            # dr
//   dr_end_s = 1200
//   dr_kw = 3.0
//   meter = 127.0.0.1:1502
//   charger = 127.0.0.1:1503
//   log_path = trace.csv

#include <string>

#include "v2h/config_file.hpp"
#include "v2h/engine/types.hpp"

namespace v2h::engine {

struct EngineSetup {
  EngineConfig config;
  ControlMode mode = IdleMode{};
};

inline ControlMode make_mode(std::string name, const EngineConfig& config, double setpoint_kw,
                             double soc_floor_pct, double soc_ceiling_pct, DrEvent dr) {
  for (auto& ch : name) {
    if (ch == '-') ch = '_';
  }
  ControlMode mode;
  if (name == "idle") {
    mode = IdleMode{};
  } else if (name == "manual") {
    mode = ManualMode{setpoint_kw};
  } else if (name == "zero_export") {
    mode = ZeroExportMode{config.alpha_kw};
  } else if (name == "arbitrage") {
    ArbitrageMode a;
    a.soc_floor_pct = soc_floor_pct;
    a.soc_ceiling_pct = soc_ceiling_pct;
    a.start_tod_s = config.start_tod_s;
    mode = a;
  } else if (name == "dr") {
    mode = DemandResponseMode{dr};
  } else {
    throw std::invalid_argument("unknown mode '" + name + "'");
  }
  validate(mode);
  return mode;
}

/// Reads [engine] (all keys optional). `start_tod_s` comes from the scenario.
inline EngineSetup engine_setup(const ConfigFile& f, double start_tod_s = 0.0) {
  EngineSetup out;
  const auto* sec = f.section("engine");
  auto& c = out.config;
  c.start_tod_s = start_tod_s;
  c.sample_hz = f.number_or(sec, "sample_hz", c.sample_hz);
  c.alpha_kw = f.number_or(sec, "alpha_kw", c.alpha_kw);
  c.max_failures = static_cast<int>(f.number_or(sec, "max_failures", c.max_failures));
  c.chatter_kw = f.number_or(sec, "chatter_kw", c.chatter_kw);
  try {
    if (auto v = f.text(sec, "meter")) c.meter = wire::Endpoint::parse(v->text);
    if (auto v = f.text(sec, "charger")) c.charger = wire::Endpoint::parse(v->text);
  } catch (const std::invalid_argument& e) {
    f.fail(*sec, "meter", e.what());
  }
  if (auto v = f.text(sec, "log_path")) c.log_path = v->text;
  try {
    c.validate();
    const std::string name = sec ? f.text(sec, "mode").value_or(ConfigValue{"idle", 0}).text : "idle";
    const DrEvent dr{f.number_or(sec, "dr_start_s", 0.0), f.number_or(sec, "dr_end_s", 1.0),
                     f.number_or(sec, "dr_kw", 0.0)};
    out.mode = make_mode(name, c, f.number_or(sec, "setpoint_kw", 0.0),
                         f.number_or(sec, "soc_floor_pct", 30.0), f.number_or(sec, "soc_ceiling_pct", 90.0), dr);
  } catch (const std::invalid_argument& e) {
    throw ParseError(f.source(), sec ? sec->line : 0, "engine", e.what());
  }
  return out;
}

}  // namespace v2h::engine
