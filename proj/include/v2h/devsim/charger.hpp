#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>

#include "v2h/devsim/battery.hpp"

namespace v2h::devsim {

enum class ChargerState : std::uint16_t {
  Disconnected = 0,
  Negotiating = 1,
  Ready = 2,
  Tracking = 3,
  Fault = 4,
};

inline const char* to_string(ChargerState s) {
  switch (s) {
    case ChargerState::Disconnected: return "Disconnected";
    case ChargerState::Negotiating: return "Negotiating";
    case ChargerState::Ready: return "Ready";
    case ChargerState::Tracking: return "Tracking";
    case ChargerState::Fault: return "Fault";
  }
  return "?";
}

struct ChargerParams {
  double nameplate_kw = 7.4;
  double i_dc_max_a = 17.0;
  double t_negotiate_s = 109.32;
  double dead_time_s = 5.5;
  double ramp_kw_per_s = 4.0;
  double noise_sigma_kw = 0.005;

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("charger: " + what); };
    if (!(nameplate_kw > 0.0)) fail("nameplate_kw must be positive");
    if (!(i_dc_max_a > 0.0)) fail("i_dc_max_a must be positive");
    if (!(t_negotiate_s >= 0.0)) fail("t_negotiate_s must be non-negative");
    if (!(dead_time_s >= 0.0)) fail("dead_time_s must be non-negative");
    if (!(ramp_kw_per_s > 0.0)) fail("ramp_kw_per_s must be positive");
    if (!(noise_sigma_kw >= 0.0)) fail("noise_sigma_kw must be non-negative");
  }
};

/// Output power bound at the battery's present voltage.
inline double power_limit_kw(const ChargerParams& p, const BatteryModel& b) {
  return std::min(p.nameplate_kw, b.dc_voltage() * p.i_dc_max_a / 1000.0);
}

/// Bidirectional DC charger: negotiation on first start, then a pure dead
/// time per command followed by a rate-limited ramp toward the clamped target.
/// Power is AC-side, charging positive.
class ChargerModel {
 public:
  ChargerModel() = default;
  explicit ChargerModel(ChargerParams params) : params_(params) { params_.validate(); }

  const ChargerParams& params() const { return params_; }
  ChargerState state() const { return state_; }
  double now() const { return now_s_; }
  bool remote() const { return remote_; }
  bool running() const { return run_; }
  double setpoint_kw() const { return setpoint_kw_; }
  /// Target currently acted upon (after dead time), before clamping.
  double target_kw() const { return target_kw_; }
  /// Physical output, noise-free.
  double p_ev_kw() const { return p_ev_kw_; }
  /// Value reported through the measurement register.
  double reported_kw() const { return reported_kw_; }

  void write_remote(bool remote) {
    if (remote_ == remote) return;
    remote_ = remote;
    maybe_negotiate();
    queue_command();
  }

  void write_run(bool run) {
    if (run_ == run) return;
    run_ = run;
    if (!run && state_ == ChargerState::Fault) state_ = ChargerState::Ready;
    maybe_negotiate();
    queue_command();
  }

  void write_setpoint(double kw) {
    setpoint_kw_ = kw;
    queue_command();
  }

  /// Imposes an output directly, bypassing dead time and ramp. If that output
  /// would break the battery's operating envelope the charger faults instead.
  void force_output(double kw, const BatteryModel& battery) {
    const double limit = power_limit_kw(params_, battery);
    const bool violates = std::abs(kw) > limit + 1e-12 ||
                          (kw < 0.0 && battery.soc_pct <= battery.soc_min_pct) ||
                          (kw > 0.0 && battery.soc_pct >= 100.0);
    pending_.clear();
    if (violates) {
      state_ = ChargerState::Fault;
      p_ev_kw_ = 0.0;
      reported_kw_ = 0.0;
      return;
    }
    target_kw_ = kw;
    p_ev_kw_ = kw;
    if (state_ != ChargerState::Fault) state_ = kw != 0.0 ? ChargerState::Tracking : ChargerState::Ready;
  }

  /// Advances the charger and battery by one tick.
  template <class Rng = std::mt19937_64>
  void step(BatteryModel& battery, double dt, Rng* rng = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("charger step needs dt > 0");
    constexpr double eps = 1e-9;
    double effective = 0.0;
    switch (state_) {
      case ChargerState::Fault:
      case ChargerState::Disconnected:
        p_ev_kw_ = 0.0;
        pending_.clear();
        break;
      case ChargerState::Negotiating:
        if (now_s_ + eps >= negotiate_done_s_) {
          // Negotiation ends with the converter already at the requested level.
          pending_.clear();
          target_kw_ = commanded();
          effective = clamp_target(target_kw_, battery);
          p_ev_kw_ = effective;
          state_ = ChargerState::Ready;
        } else {
          p_ev_kw_ = 0.0;
        }
        break;
      case ChargerState::Ready:
      case ChargerState::Tracking: {
        while (!pending_.empty() && pending_.front().apply_at <= now_s_ + eps) {
          target_kw_ = pending_.front().kw;
          pending_.pop_front();
        }
        effective = clamp_target(target_kw_, battery);
        const double max_move = params_.ramp_kw_per_s * dt;
        p_ev_kw_ += std::clamp(effective - p_ev_kw_, -max_move, max_move);
        break;
      }
    }

    const double limit = power_limit_kw(params_, battery);
    p_ev_kw_ = std::clamp(p_ev_kw_, -limit, limit);
    if (battery.soc_pct <= battery.soc_min_pct && p_ev_kw_ < 0.0) p_ev_kw_ = 0.0;
    if (battery.soc_pct >= 100.0 && p_ev_kw_ > 0.0) p_ev_kw_ = 0.0;

    const double delta = battery.soc_delta_pct(p_ev_kw_, dt);
    if (battery.soc_pct + delta < battery.soc_min_pct) {
      p_ev_kw_ = battery.power_for_delta(battery.soc_min_pct - battery.soc_pct, dt);
      battery.soc_pct = battery.soc_min_pct;
    } else if (battery.soc_pct + delta > 100.0) {
      p_ev_kw_ = battery.power_for_delta(100.0 - battery.soc_pct, dt);
      battery.soc_pct = 100.0;
    } else {
      battery.soc_pct += delta;
    }

    if (state_ == ChargerState::Ready || state_ == ChargerState::Tracking) {
      state_ = (effective != 0.0 || p_ev_kw_ != 0.0) ? ChargerState::Tracking : ChargerState::Ready;
      reported_kw_ = p_ev_kw_;
      if (rng != nullptr && params_.noise_sigma_kw > 0.0) {
        std::normal_distribution<double> noise(0.0, params_.noise_sigma_kw);
        reported_kw_ += noise(*rng);
      }
    } else {
      reported_kw_ = p_ev_kw_;
    }
    now_s_ += dt;
  }

  /// Re-anchors the model clock, for simulators that own the time base.
  void set_now(double now_s) { now_s_ = now_s; }

 private:
  struct Pending {
    double apply_at;
    double kw;
  };

  double commanded() const { return (remote_ && run_) ? setpoint_kw_ : 0.0; }

  void maybe_negotiate() {
    if (run_ && remote_ && state_ == ChargerState::Disconnected) {
      state_ = ChargerState::Negotiating;
      negotiate_done_s_ = now_s_ + params_.t_negotiate_s;
    }
  }

  void queue_command() {
    if (state_ == ChargerState::Fault) return;
    pending_.push_back({now_s_ + params_.dead_time_s, commanded()});
  }

  double clamp_target(double kw, const BatteryModel& battery) const {
    const double limit = power_limit_kw(params_, battery);
    double eff = std::clamp(kw, -limit, limit);
    if (eff < 0.0 && battery.soc_pct <= battery.soc_min_pct) eff = 0.0;
    if (eff > 0.0 && battery.soc_pct >= 100.0) eff = 0.0;
    return eff;
  }

  ChargerParams params_;
  ChargerState state_ = ChargerState::Disconnected;
  bool remote_ = false;
  bool run_ = false;
  double setpoint_kw_ = 0.0;
  double target_kw_ = 0.0;
  double p_ev_kw_ = 0.0;
  double reported_kw_ = 0.0;
  double now_s_ = 0.0;
  double negotiate_done_s_ = 0.0;
  std::deque<Pending> pending_;
};

/// One simulation tick of the charger/battery pair.
template <class Rng = std::mt19937_64>
void charger_step(ChargerModel& charger, BatteryModel& battery, double dt, Rng* rng = nullptr) {
  charger.step(battery, dt, rng);
}

}  // namespace v2h::devsim
