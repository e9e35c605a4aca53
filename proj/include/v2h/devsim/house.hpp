#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2h/devsim/charger.hpp"

namespace v2h::devsim {

/// Piecewise-constant power draw of one appliance run.
struct ApplianceProfile {
  struct Segment {
    double offset_s = 0.0;  // relative to start
    double duration_s = 0.0;
    double kw = 0.0;
  };

  std::string name;
  double start_s = 0.0;
  double duration_s = 0.0;
  std::vector<Segment> segments;  // contiguous, ordered, covering [0, duration_s)

  double end_s() const { return start_s + duration_s; }

  double power_at(double t) const {
    if (t < start_s || t >= end_s()) return 0.0;
    const double rel = t - start_s;
    auto it = std::upper_bound(segments.begin(), segments.end(), rel,
                               [](double r, const Segment& s) { return r < s.offset_s; });
    if (it == segments.begin()) return 0.0;
    --it;
    return rel < it->offset_s + it->duration_s ? it->kw : 0.0;
  }

  /// Energy drawn in [t0, t1), kWh.
  double energy_kwh(double t0, double t1) const {
    double kws = 0.0;
    for (const auto& s : segments) {
      const double a = std::max(t0, start_s + s.offset_s);
      const double b = std::min(t1, start_s + s.offset_s + s.duration_s);
      if (b > a) kws += s.kw * (b - a);
    }
    return kws / 3600.0;
  }

  double energy_kwh() const { return energy_kwh(start_s, end_s()); }

  void validate() const {
    auto fail = [this](const std::string& what) {
      throw std::invalid_argument("appliance '" + name + "': " + what);
    };
    double cursor = 0.0;
    for (const auto& s : segments) {
      if (s.kw < 0.0) fail("negative power");
      if (!(s.duration_s > 0.0)) fail("segment duration must be positive");
      if (std::abs(s.offset_s - cursor) > 1e-6) fail("segments are not contiguous");
      cursor = s.offset_s + s.duration_s;
    }
    if (std::abs(cursor - duration_s) > 1e-6) {
      fail("trace length " + std::to_string(cursor) + " s does not match duration " +
           std::to_string(duration_s) + " s");
    }
  }
};

struct HouseModel {
  double base_load_kw = 0.13;
  std::vector<ApplianceProfile> appliances;

  /// Energy of base load plus appliances over [t0, t1), kWh.
  double energy_kwh(double t0, double t1) const {
    double e = base_load_kw * (t1 - t0) / 3600.0;
    for (const auto& a : appliances) e += a.energy_kwh(t0, t1);
    return e;
  }
};

/// Household consumption at simulated time `t`, kW.
inline double house_load(const HouseModel& house, double t) {
  double kw = house.base_load_kw;
  for (const auto& a : house.appliances) kw += a.power_at(t);
  return kw;
}

/// Net power at the point of common coupling, import positive.
inline double meter_read(const HouseModel& house, const ChargerModel& charger, double t) {
  return house_load(house, t) + charger.p_ev_kw();
}

}  // namespace v2h::devsim
