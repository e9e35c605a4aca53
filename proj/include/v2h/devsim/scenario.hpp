#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "v2h/config_file.hpp"
#include "v2h/devsim/battery.hpp"
#include "v2h/devsim/charger.hpp"
#include "v2h/devsim/clock.hpp"
#include "v2h/devsim/house.hpp"

namespace v2h::devsim {

struct MeterParams {
  double noise_sigma_kw = 0.0;
  double line_voltage_v = 240.0;
};

/// A fully initialized simulation setup. `file` keeps the raw sections so
/// other modules (engine, bench) can read their own settings from it.
struct Scenario {
  std::string name;
  double start_tod_s = 0.0;  // time of day at simulated t = 0
  double duration_s = 0.0;   // 0 = open-ended
  std::uint64_t seed = 1;
  SimClock clock;
  BatteryModel battery;
  ChargerParams charger;
  bool charger_remote = false;
  MeterParams meter;
  HouseModel house;
  ConfigFile file;
};

namespace detail {

struct BurstSpec {
  double window_start_s, window_end_s;
  double on_min_s, on_max_s, off_min_s, off_max_s;
};

// Rounds to the 0.05 s grid so tick sampling integrates traces exactly.
inline double to_grid(double s) { return std::max(0.05, std::round(s * 20.0) / 20.0); }

inline std::vector<std::pair<double, double>> make_bursts(const BurstSpec& burst, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> on(burst.on_min_s, burst.on_max_s);
  std::uniform_real_distribution<double> off(burst.off_min_s, burst.off_max_s);
  std::vector<std::pair<double, double>> out;  // [begin, end)
  double t = burst.window_start_s;
  while (t < burst.window_end_s) {
    const double end = std::min(burst.window_end_s, t + to_grid(on(rng)));
    out.emplace_back(t, end);
    t = end + to_grid(off(rng));
  }
  return out;
}

inline std::vector<ApplianceProfile::Segment> parse_segments(const ConfigFile& file,
                                                             const ConfigValue& v,
                                                             const std::string& key) {
  std::vector<ApplianceProfile::Segment> out;
  std::stringstream ss(v.text);
  std::string item;
  double offset = 0.0;
  while (std::getline(ss, item, ',')) {
    const auto piece = trim(item);
    const auto x = piece.find('x');
    if (x == std::string_view::npos) {
      throw ParseError(file.source(), v.line, key, "segment '" + std::string(piece) + "' is not KWxMIN");
    }
    const double kw = file.to_number({std::string(trim(piece.substr(0, x))), v.line}, key);
    const double minutes = file.to_number({std::string(trim(piece.substr(x + 1))), v.line}, key);
    if (kw < 0.0) throw ParseError(file.source(), v.line, key, "negative power");
    if (!(minutes > 0.0)) throw ParseError(file.source(), v.line, key, "segment minutes must be positive");
    out.push_back({offset, minutes * 60.0, kw});
    offset += minutes * 60.0;
  }
  if (out.empty()) throw ParseError(file.source(), v.line, key, "no segments");
  return out;
}

// Merges baseline segments with bursts of `burst_kw` into one contiguous trace.
inline std::vector<ApplianceProfile::Segment> overlay(
    const std::vector<ApplianceProfile::Segment>& base,
    const std::vector<std::pair<double, double>>& bursts, double burst_kw) {
  std::vector<double> cuts{0.0};
  for (const auto& s : base) cuts.push_back(s.offset_s + s.duration_s);
  for (const auto& [b, e] : bursts) {
    cuts.push_back(b);
    cuts.push_back(e);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
             cuts.end());
  std::vector<ApplianceProfile::Segment> out;
  std::size_t bi = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    double kw = 0.0;
    for (const auto& s : base) {
      if (mid >= s.offset_s && mid < s.offset_s + s.duration_s) kw = s.kw;
    }
    while (bi < bursts.size() && bursts[bi].second <= mid) ++bi;
    if (bi < bursts.size() && mid >= bursts[bi].first) kw += burst_kw;
    if (!out.empty() && out.back().kw == kw) {
      out.back().duration_s += cuts[i + 1] - cuts[i];
    } else {
      out.push_back({cuts[i], cuts[i + 1] - cuts[i], kw});
    }
  }
  return out;
}

inline ApplianceProfile parse_appliance(const ConfigFile& file, const ConfigSection& sec) {
  ApplianceProfile a;
  a.name = sec.label;
  if (a.name.empty()) throw ParseError(file.source(), sec.line, "", "appliance section needs a name");
  a.start_s = file.number(sec, "start_min") * 60.0;
  const double duration_min = file.number(sec, "duration_min");
  if (!(duration_min > 0.0)) file.fail(sec, "duration_min", "must be positive");
  a.duration_s = duration_min * 60.0;

  std::vector<ApplianceProfile::Segment> base;
  if (auto seg = file.text(&sec, "segments")) {
    base = parse_segments(file, *seg, "segments");
  } else {
    // flat profile; with only energy_kwh given, the level is scaled below
    const double flat = file.text(&sec, "energy_kwh") ? 1.0 : 0.0;
    base.push_back({0.0, a.duration_s, file.number_or(&sec, "power_kw", flat)});
  }
  const double base_len = base.back().offset_s + base.back().duration_s;
  if (std::abs(base_len - a.duration_s) > 1e-6) {
    file.fail(sec, "segments", "segments cover " + std::to_string(base_len / 60.0) +
                                   " min but duration_min is " + std::to_string(duration_min));
  }

  const auto energy = file.text(&sec, "energy_kwh");
  const double target_kwh = energy ? file.to_number(*energy, "energy_kwh") : -1.0;
  if (energy && target_kwh < 0.0) file.fail(sec, "energy_kwh", "must be non-negative");

  if (auto bursts_text = file.text(&sec, "bursts")) {
    std::istringstream in(bursts_text->text);
    BurstSpec burst{};
    if (!(in >> burst.window_start_s >> burst.window_end_s >> burst.on_min_s >> burst.on_max_s >>
          burst.off_min_s >> burst.off_max_s)) {
      file.fail(sec, "bursts", "expected: WIN_START_MIN WIN_END_MIN ON_MIN_S ON_MAX_S OFF_MIN_S OFF_MAX_S");
    }
    burst.window_start_s *= 60.0;
    burst.window_end_s = std::min(burst.window_end_s * 60.0, a.duration_s);
    if (burst.on_min_s <= 0.0 || burst.on_max_s < burst.on_min_s || burst.off_min_s <= 0.0 ||
        burst.off_max_s < burst.off_min_s || burst.window_end_s <= burst.window_start_s) {
      file.fail(sec, "bursts", "inconsistent burst window or durations");
    }
    const auto seed = static_cast<std::uint64_t>(file.number_or(&sec, "burst_seed", 1.0));
    const auto bursts = make_bursts(burst, seed);
    double burst_kw = file.number_or(&sec, "burst_kw", 0.0);
    if (target_kwh >= 0.0) {
      double base_kws = 0.0, on_s = 0.0;
      for (const auto& s : base) base_kws += s.kw * s.duration_s;
      for (const auto& [b, e] : bursts) on_s += e - b;
      burst_kw = (target_kwh * 3600.0 - base_kws) / on_s;
      if (burst_kw < 0.0) file.fail(sec, "energy_kwh", "smaller than the baseline segments alone");
    }
    a.segments = overlay(base, bursts, burst_kw);
  } else {
    a.segments = std::move(base);
    if (target_kwh >= 0.0) {
      double kws = 0.0;
      for (const auto& s : a.segments) kws += s.kw * s.duration_s;
      if (kws <= 0.0 && target_kwh > 0.0) file.fail(sec, "energy_kwh", "segments have zero energy to scale");
      const double factor = kws > 0.0 ? target_kwh * 3600.0 / kws : 0.0;
      for (auto& s : a.segments) s.kw *= factor;
    }
  }
  a.validate();
  return a;
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view text, std::string source) {
  Scenario sc;
  sc.file = ConfigFile::parse(text, std::move(source));
  const ConfigFile& f = sc.file;

  const auto* meta = f.section("scenario");
  sc.name = meta ? f.text(meta, "name").value_or(ConfigValue{"", 0}).text : "";
  if (sc.name.empty()) sc.name = f.source();
  if (auto tod = f.text(meta, "start_time")) sc.start_tod_s = f.time_of_day(*tod, "start_time");
  sc.duration_s = f.number_or(meta, "duration_min", 0.0) * 60.0;
  if (sc.duration_s < 0.0) f.fail(*meta, "duration_min", "must be non-negative");
  sc.seed = static_cast<std::uint64_t>(f.number_or(meta, "seed", 1.0));

  const auto* clock = f.section("clock");
  sc.clock.step_s = f.number_or(clock, "step_s", sc.clock.step_s);
  sc.clock.scale = f.number_or(clock, "scale", sc.clock.scale);

  const auto* bat = f.section("battery");
  auto& b = sc.battery;
  b.capacity_kwh = f.number_or(bat, "capacity_kwh", b.capacity_kwh);
  b.soc_pct = f.number_or(bat, "soc_pct", b.soc_pct);
  b.soc_min_pct = f.number_or(bat, "soc_min_pct", b.soc_min_pct);
  b.v0 = f.number_or(bat, "v0", b.v0);
  b.k_v = f.number_or(bat, "k_v", b.k_v);
  b.eta_chg = f.number_or(bat, "eta_chg", b.eta_chg);
  b.eta_dis = f.number_or(bat, "eta_dis", b.eta_dis);

  const auto* chg = f.section("charger");
  auto& c = sc.charger;
  c.nameplate_kw = f.number_or(chg, "nameplate_kw", c.nameplate_kw);
  c.i_dc_max_a = f.number_or(chg, "i_dc_max_a", c.i_dc_max_a);
  c.t_negotiate_s = f.number_or(chg, "t_negotiate_s", c.t_negotiate_s);
  c.dead_time_s = f.number_or(chg, "dead_time_s", c.dead_time_s);
  c.ramp_kw_per_s = f.number_or(chg, "ramp_kw_per_s", c.ramp_kw_per_s);
  c.noise_sigma_kw = f.number_or(chg, "noise_sigma_kw", c.noise_sigma_kw);
  sc.charger_remote = f.number_or(chg, "remote", 0.0) != 0.0;

  const auto* met = f.section("meter");
  sc.meter.noise_sigma_kw = f.number_or(met, "noise_sigma_kw", sc.meter.noise_sigma_kw);
  sc.meter.line_voltage_v = f.number_or(met, "line_voltage_v", sc.meter.line_voltage_v);

  const auto* house = f.section("house");
  sc.house.base_load_kw = f.number_or(house, "base_load_kw", sc.house.base_load_kw);
  if (sc.house.base_load_kw < 0.0) f.fail(*house, "base_load_kw", "must be non-negative");
  for (const auto* sec : f.sections_of("appliance")) {
    sc.house.appliances.push_back(detail::parse_appliance(f, *sec));
  }

  // Cross-field validation, reported against the owning section.
  auto check = [&](const ConfigSection* sec, const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ParseError(f.source(), sec ? sec->line : 0, name, e.what());
    }
  };
  check(clock, "clock", [&] { sc.clock.validate(); });
  check(bat, "battery", [&] { sc.battery.validate(); });
  check(chg, "charger", [&] { sc.charger.validate(); });
  if (!(sc.meter.line_voltage_v > 0.0)) f.fail(*met, "line_voltage_v", "must be positive");
  return sc;
}

namespace bundled {

inline constexpr std::string_view kStepTest = R"(# Idle house, charger connected but not yet negotiated.
[scenario]
name = stepTest
seed = 101

[battery]
soc_pct = 50

[house]
base_load_kw = 0.13

[engine]
sample_hz = 5
mode = manual
)";

inline constexpr std::string_view kSweepTest = R"(# Idle house used for +/-6 kW sweeps.
[scenario]
name = sweepTest
seed = 202

[battery]
soc_pct = 50

[house]
base_load_kw = 0.13

[engine]
sample_hz = 5
mode = manual
)";

inline constexpr std::string_view kTable3 = R"(# Zero-export load following with the household appliance schedule.
[scenario]
name = table3
duration_min = 303
seed = 303

[battery]
soc_pct = 85

[house]
base_load_kw = 0.13

[appliance kettle]
start_min = 8
duration_min = 4
energy_kwh = 0.07

[appliance washing_machine]
start_min = 15
duration_min = 57
energy_kwh = 0.25
segments = 0.35x6, 0.08x3, 0.35x6, 0.08x3, 0.35x6, 0.08x3, 0.35x6, 0.08x3, 0.5x8, 0.08x4, 0.5x9

# Heating element switching on and off every one to two seconds over a
# continuously running drum motor, then a motor-only cool-down.
[appliance dryer]
start_min = 80
duration_min = 80
energy_kwh = 4.35
segments = 0.25x80
bursts = 0 72 1.0 2.0 1.0 2.0
burst_seed = 7

[appliance microwave]
start_min = 170
duration_min = 2
energy_kwh = 0.02

[appliance dishwasher]
start_min = 185
duration_min = 83
energy_kwh = 1.08
segments = 0.12x10, 1.9x14, 0.12x25, 1.9x12, 0.12x12, 0.05x10

[engine]
sample_hz = 5
mode = zero_export
alpha_kw = 0.1
)";

inline constexpr std::string_view kTouDay = R"(# One summer day of time-of-use arbitrage starting at midnight.
[scenario]
name = touDay
start_time = 00:00
duration_min = 1440
seed = 404

[battery]
soc_pct = 60

[house]
base_load_kw = 0.13

[engine]
sample_hz = 1
mode = arbitrage
soc_floor_pct = 30
soc_ceiling_pct = 90
)";

}  // namespace bundled

inline std::optional<std::string_view> bundled_scenario(std::string_view name) {
  if (name == "stepTest") return bundled::kStepTest;
  if (name == "sweepTest") return bundled::kSweepTest;
  if (name == "table3") return bundled::kTable3;
  if (name == "touDay") return bundled::kTouDay;
  return std::nullopt;
}

inline std::vector<std::string_view> bundled_scenario_names() {
  return {"stepTest", "sweepTest", "table3", "touDay"};
}

/// Loads a bundled scenario by name, or a scenario file by path.
inline Scenario scenario_load(const std::string& name_or_path) {
  if (auto text = bundled_scenario(name_or_path)) return parse_scenario(*text, name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ParseError(name_or_path, 0, "", "cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), name_or_path);
}

}  // namespace v2h::devsim
