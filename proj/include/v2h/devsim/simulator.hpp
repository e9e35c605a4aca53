#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stop_token>
#include <thread>

#include "v2h/devsim/scenario.hpp"
#include "v2h/wire/codec.hpp"
#include "v2h/wire/register_map.hpp"
#include "v2h/wire/register_store.hpp"

namespace v2h::devsim {

/// State after one tick, for observers and tests.
struct TickRecord {
  double t = 0.0;
  double p_ev_kw = 0.0;
  double reported_ev_kw = 0.0;
  double house_kw = 0.0;
  double p_net_kw = 0.0;
  double soc_pct = 0.0;
  double target_kw = 0.0;
  ChargerState state = ChargerState::Disconnected;
};

/// Meter, charger and battery advanced on one clock, exposed through register
/// stores. Register writes queue in the stores and take effect at the next
/// tick boundary; the stores are republished after every tick.
class Simulator {
 public:
  explicit Simulator(Scenario scenario)
      : scenario_(std::move(scenario)),
        clock_(scenario_.clock),
        battery_(scenario_.battery),
        charger_(scenario_.charger),
        meter_store_(wire::meter::register_map(), wire::WritePolicy::Deferred),
        charger_store_(wire::charger::register_map(), wire::WritePolicy::Deferred),
        meter_slave_(wire::meter::kUnitId, meter_store_),
        charger_slave_(wire::charger::kUnitId, charger_store_),
        meter_image_(meter_store_.map()),
        charger_image_(charger_store_.map()),
        charger_rng_(scenario_.seed),
        meter_rng_(scenario_.seed ^ 0x9E3779B97F4A7C15ULL) {
    clock_.ticks = 0;
    charger_.write_remote(scenario_.charger_remote);
    charger_image_.set_word(wire::charger::kRemoteEnable, scenario_.charger_remote ? 1 : 0);
    publish();
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  const Scenario& scenario() const { return scenario_; }
  double now() const { return clock_.now(); }
  double step_s() const { return clock_.step_s; }
  double time_of_day() const { return std::fmod(scenario_.start_tod_s + now(), 86400.0); }

  const ChargerModel& charger() const { return charger_; }
  ChargerModel& charger() { return charger_; }
  const BatteryModel& battery() const { return battery_; }
  const HouseModel& house() const { return scenario_.house; }

  wire::RegisterStore& meter_store() { return meter_store_; }
  wire::RegisterStore& charger_store() { return charger_store_; }
  wire::RegisterSlave& meter_slave() { return meter_slave_; }
  wire::RegisterSlave& charger_slave() { return charger_slave_; }

  void on_tick(std::function<void(const TickRecord&)> fn) { observer_ = std::move(fn); }

  const TickRecord& last_tick() const { return last_; }

  void tick() {
    apply_writes();
    const double dt = clock_.step_s;
    charger_.set_now(clock_.now());
    charger_.step(battery_, dt, &charger_rng_);
    clock_.tick();
    publish();
    if (observer_) observer_(last_);
  }

  /// Advances by whole ticks until at least `seconds` more simulated time passed.
  void advance(double seconds) { advance_to(now() + seconds); }

  void advance_to(double t) {
    const auto target = static_cast<std::int64_t>(std::ceil(t / clock_.step_s - 1e-9));
    while (clock_.ticks < target) tick();
  }

  /// Ticks until stopped, pacing simulated time at `scale` x wall time
  /// (0 = as fast as possible). Stops at the scenario duration if one is set.
  void run(std::stop_token stop, double scale) {
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    const double sim_start = now();
    while (!stop.stop_requested()) {
      if (scenario_.duration_s > 0.0 && now() >= scenario_.duration_s) break;
      tick();
      if (scale > 0.0) {
        const auto due = wall_start + std::chrono::duration_cast<clock::duration>(
                                          std::chrono::duration<double>((now() - sim_start) / scale));
        std::this_thread::sleep_until(due);
      }
    }
  }

 private:
  void apply_writes() {
    namespace reg = wire::charger;
    for (const auto& w : charger_store_.take_writes()) {
      charger_image_.assign(w.address, w.words);
      const auto end = w.address + w.words.size();
      auto covers = [&](std::uint16_t a) { return a >= w.address && a < end; };
      if (covers(reg::kRemoteEnable)) charger_.write_remote(charger_image_.word(reg::kRemoteEnable) != 0);
      if (covers(reg::kSetpoint)) charger_.write_setpoint(charger_image_.power_kw(reg::kSetpoint));
      if (covers(reg::kRunCommand)) charger_.write_run(charger_image_.word(reg::kRunCommand) != 0);
    }
    meter_store_.take_writes();  // meter has no writable registers
  }

  void publish() {
    namespace reg = wire::charger;
    const double t = now();
    const double house = house_load(scenario_.house, t);
    const double p_net = house + charger_.p_ev_kw();
    double p_net_reported = p_net;
    if (scenario_.meter.noise_sigma_kw > 0.0) {
      std::normal_distribution<double> noise(0.0, scenario_.meter.noise_sigma_kw);
      p_net_reported += noise(meter_rng_);
    }
    meter_image_.set_power_kw(wire::meter::kNetPower, p_net_reported);
    meter_image_.set_i32(wire::meter::kLineCurrent,
                         wire::join_i32(wire::encode_current(p_net_reported * 1000.0 /
                                                             scenario_.meter.line_voltage_v)));
    meter_store_.publish(meter_image_);

    charger_image_.set_word(reg::kRemoteEnable, charger_.remote() ? 1 : 0);
    charger_image_.set_word(reg::kRunCommand, charger_.running() ? 1 : 0);
    charger_image_.set_power_kw(reg::kSetpoint, charger_.setpoint_kw());
    charger_image_.set_power_kw(reg::kMeasuredPower, charger_.reported_kw());
    charger_image_.set_word(reg::kSoc, wire::encode_soc(battery_.soc_pct));
    charger_image_.set_word(reg::kState, static_cast<std::uint16_t>(charger_.state()));
    charger_image_.set_word(reg::kDcVoltage, wire::encode_volts(battery_.dc_voltage()));
    charger_store_.publish(charger_image_);

    last_ = {t,        charger_.p_ev_kw(),  charger_.reported_kw(), house,
             p_net,    battery_.soc_pct,    charger_.target_kw(),   charger_.state()};
  }

  Scenario scenario_;
  SimClock clock_;
  BatteryModel battery_;
  ChargerModel charger_;
  wire::RegisterStore meter_store_;
  wire::RegisterStore charger_store_;
  wire::RegisterSlave meter_slave_;
  wire::RegisterSlave charger_slave_;
  wire::RegisterImage meter_image_;
  wire::RegisterImage charger_image_;
  std::mt19937_64 charger_rng_;
  std::mt19937_64 meter_rng_;
  std::function<void(const TickRecord&)> observer_;
  TickRecord last_;
};

}  // namespace v2h::devsim
