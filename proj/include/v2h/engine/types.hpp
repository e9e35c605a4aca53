#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "v2h/wire/tcp.hpp"

namespace v2h::engine {

/// One synchronized measurement. Powers in kW; P_NET import positive,
/// P_EV charging positive.
struct Sample {
  double t = 0.0;
  double p_net_kw = 0.0;
  double p_ev_kw = 0.0;
  double soc_pct = 0.0;
  double house_load_kw = 0.0;

  static Sample make(double t, double p_net_kw, double p_ev_kw, double soc_pct) {
    return {t, p_net_kw, p_ev_kw, soc_pct, p_net_kw - p_ev_kw};
  }
};

enum class TariffLabel { OffPeak, MidPeak, OnPeak };

inline const char* to_string(TariffLabel l) {
  switch (l) {
    case TariffLabel::OffPeak: return "OffPeak";
    case TariffLabel::MidPeak: return "MidPeak";
    case TariffLabel::OnPeak: return "OnPeak";
  }
  return "?";
}

struct TariffBand {
  double start_s = 0.0;  // seconds after midnight
  double end_s = 0.0;    // may be < start_s for bands that wrap midnight
  double rate = 0.0;     // $/kWh
  TariffLabel label = TariffLabel::MidPeak;

  bool contains(double tod) const {
    return start_s <= end_s ? (tod >= start_s && tod < end_s) : (tod >= start_s || tod < end_s);
  }
};

class TariffSchedule {
 public:
  TariffSchedule() = default;
  explicit TariffSchedule(std::vector<TariffBand> bands) : bands_(std::move(bands)) { validate(); }

  /// Ontario summer 2022 time-of-use rates.
  static TariffSchedule ontario_summer_2022() {
    constexpr double h = 3600.0;
    return TariffSchedule({
        {19 * h, 7 * h, 0.082, TariffLabel::OffPeak},
        {7 * h, 11 * h, 0.113, TariffLabel::MidPeak},
        {11 * h, 17 * h, 0.170, TariffLabel::OnPeak},
        {17 * h, 19 * h, 0.113, TariffLabel::MidPeak},
    });
  }

  const std::vector<TariffBand>& bands() const { return bands_; }

  const TariffBand* band_at(double time_of_day_s) const {
    const double tod = std::fmod(std::fmod(time_of_day_s, 86400.0) + 86400.0, 86400.0);
    for (const auto& b : bands_) {
      if (b.contains(tod)) return &b;
    }
    return nullptr;
  }

  double rate_at(double time_of_day_s) const {
    const auto* b = band_at(time_of_day_s);
    return b ? b->rate : 0.0;
  }

  /// Same bands with every rate of `label` replaced.
  TariffSchedule with_rate(TariffLabel label, double rate) const {
    auto copy = bands_;
    for (auto& b : copy) {
      if (b.label == label) b.rate = rate;
    }
    return TariffSchedule(std::move(copy));
  }

 private:
  void validate() const {
    std::vector<std::pair<double, double>> spans;
    for (const auto& b : bands_) {
      if (!(b.rate > 0.0)) throw std::invalid_argument("tariff rates must be positive");
      if (b.start_s < 0 || b.start_s >= 86400 || b.end_s < 0 || b.end_s > 86400 || b.start_s == b.end_s) {
        throw std::invalid_argument("tariff band times must lie within one day");
      }
      if (b.start_s < b.end_s) {
        spans.emplace_back(b.start_s, b.end_s);
      } else {
        spans.emplace_back(b.start_s, 86400.0);
        if (b.end_s > 0.0) spans.emplace_back(0.0, b.end_s);
      }
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].first < spans[i - 1].second) throw std::invalid_argument("tariff bands overlap");
    }
  }

  std::vector<TariffBand> bands_;
};

struct DrEvent {
  double start = 0.0;  // simulated seconds
  double end = 0.0;
  double requested_kw = 0.0;

  void validate() const {
    if (!(start < end)) throw std::invalid_argument("demand response event needs start < end");
    if (!(requested_kw >= 0.0)) throw std::invalid_argument("requested_kw must be non-negative");
  }
};

struct IdleMode {};
struct ManualMode {
  double setpoint_kw = 0.0;
};
struct ZeroExportMode {
  double alpha_kw = 0.3;
};
struct ArbitrageMode {
  TariffSchedule tariff = TariffSchedule::ontario_summer_2022();
  double soc_floor_pct = 30.0;
  double soc_ceiling_pct = 90.0;
  double start_tod_s = 0.0;  // time of day at engine time 0
};
struct DemandResponseMode {
  DrEvent event;
};

using ControlMode = std::variant<IdleMode, ManualMode, ZeroExportMode, ArbitrageMode, DemandResponseMode>;

inline std::string mode_name(const ControlMode& m) {
  static constexpr const char* names[] = {"idle", "manual", "zero_export", "arbitrage", "dr"};
  return names[m.index()];
}

inline bool is_automated(const ControlMode& m) {
  return std::holds_alternative<ZeroExportMode>(m) || std::holds_alternative<ArbitrageMode>(m) ||
         std::holds_alternative<DemandResponseMode>(m);
}

inline void validate(const ControlMode& m) {
  if (const auto* z = std::get_if<ZeroExportMode>(&m); z && !(z->alpha_kw >= 0.0)) {
    throw std::invalid_argument("alpha_kw must be >= 0");
  }
  if (const auto* a = std::get_if<ArbitrageMode>(&m)) {
    if (!(a->soc_floor_pct < a->soc_ceiling_pct)) {
      throw std::invalid_argument("soc_floor_pct must be below soc_ceiling_pct");
    }
  }
  if (const auto* d = std::get_if<DemandResponseMode>(&m)) d->event.validate();
  if (const auto* s = std::get_if<ManualMode>(&m); s && !std::isfinite(s->setpoint_kw)) {
    throw std::invalid_argument("setpoint must be finite");
  }
}

/// Charger electrical limits as seen by the controller.
struct ChargerLimits {
  double nameplate_kw = 7.4;
  double i_dc_max_a = 17.0;
  double v0 = 350.0;
  double k_v = 0.5;

  double p_max_kw(double soc_pct) const {
    return std::min(nameplate_kw, (v0 + k_v * soc_pct) * i_dc_max_a / 1000.0);
  }
};

struct EngineConfig {
  double sample_hz = 5.0;
  double alpha_kw = 0.3;
  wire::Endpoint meter{"127.0.0.1", 1502};
  wire::Endpoint charger{"127.0.0.1", 1503};
  std::string log_path;
  double start_tod_s = 0.0;  // time of day at engine time 0
  ChargerLimits limits;
  bool take_remote_control = true;
  int max_failures = 3;
  double chatter_kw = 0.01;

  void validate() const {
    if (!(sample_hz > 0.0)) throw std::invalid_argument("sample_hz must be positive");
    if (!(alpha_kw >= 0.0)) throw std::invalid_argument("alpha_kw must be >= 0");
    if (max_failures < 1) throw std::invalid_argument("max_failures must be >= 1");
  }
};

}  // namespace v2h::engine
