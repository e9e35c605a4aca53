#pragma once

#include <stdexcept>
#include <string>

namespace v2h::devsim {

/// EV traction battery seen from the charger's DC side.
struct BatteryModel {
  double capacity_kwh = 40.0;
  double soc_pct = 50.0;
  double soc_min_pct = 20.0;
  double v0 = 350.0;   // volts at 0 % SOC
  double k_v = 0.5;    // volts per SOC percent
  double eta_chg = 0.95;
  double eta_dis = 0.95;

  double dc_voltage() const { return v0 + k_v * soc_pct; }

  /// SOC change in percentage points when the charger carries `p_ev_kw`
  /// (AC side, charging positive) for `dt_s` seconds.
  double soc_delta_pct(double p_ev_kw, double dt_s) const {
    const double dc_kws = p_ev_kw >= 0.0 ? p_ev_kw * eta_chg * dt_s : (p_ev_kw / eta_dis) * dt_s;
    return dc_kws / (36.0 * capacity_kwh);
  }

  /// AC power that moves SOC by exactly `delta_pct` over `dt_s`.
  double power_for_delta(double delta_pct, double dt_s) const {
    const double dc_kws = delta_pct * 36.0 * capacity_kwh;
    return dc_kws >= 0.0 ? dc_kws / (eta_chg * dt_s) : dc_kws * eta_dis / dt_s;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("battery: " + what); };
    if (!(capacity_kwh > 0.0)) fail("capacity_kwh must be positive");
    if (!(soc_min_pct >= 0.0 && soc_min_pct < 100.0)) fail("soc_min_pct must lie in [0, 100)");
    if (!(soc_pct >= soc_min_pct && soc_pct <= 100.0)) fail("soc_pct must lie in [soc_min_pct, 100]");
    if (!(eta_chg > 0.0 && eta_chg <= 1.0)) fail("eta_chg must lie in (0, 1]");
    if (!(eta_dis > 0.0 && eta_dis <= 1.0)) fail("eta_dis must lie in (0, 1]");
  }
};

}  // namespace v2h::devsim
