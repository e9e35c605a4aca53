#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "v2h/devsim/charger.hpp"
#include "v2h/engine/control.hpp"
#include "v2h/engine/trace.hpp"
#include "v2h/engine/types.hpp"
#include "v2h/wire/client.hpp"
#include "v2h/wire/codec.hpp"
#include "v2h/wire/register_map.hpp"

namespace v2h::engine {

class RemoteDisabled : public std::runtime_error {
 public:
  RemoteDisabled() : std::runtime_error("RemoteDisabled: charger is in local control mode") {}
};

/// Control request rejected because another mode owns the setpoint.
class ModeConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChargerFaulted : public std::runtime_error {
 public:
  ChargerFaulted() : std::runtime_error("charger is faulted") {}
};

struct CommandRecord {
  double sent_at = 0.0;
  double setpoint_kw = 0.0;
  std::string mode;
};

struct ChargerStatus {
  bool remote = false;
  bool running = false;
  double setpoint_kw = 0.0;
  devsim::ChargerState state = devsim::ChargerState::Disconnected;
  double dc_voltage = 0.0;
};

struct EngineState {
  std::optional<Sample> latest;
  ChargerStatus charger;
  std::string mode;
  std::optional<double> last_setpoint_kw;
  int meter_failures = 0;
  int charger_failures = 0;
  bool failsafe_pending = false;
  std::string last_error;
};

/// The DERMS control loop. One thread calls cycle(); everything else may be
/// called concurrently and is applied at the next cycle boundary.
class Engine {
 public:
  using Clock = std::function<double()>;

  Engine(EngineConfig config, wire::RegisterClient& meter, wire::RegisterClient& charger, Clock clock)
      : config_(std::move(config)), meter_(meter), charger_(charger), clock_(std::move(clock)) {
    config_.validate();
    if (!config_.log_path.empty()) trace_.open(config_.log_path);
  }

  const EngineConfig& config() const { return config_; }
  const TraceLog& trace() const { return trace_; }
  TraceLog& trace() { return trace_; }

  // --- control surface (thread-safe, queued) ---

  void request_mode(ControlMode mode) {
    validate(mode);
    std::lock_guard lock(mu_);
    requested_mode_ = mode;
    queue_.push_back(std::move(mode));
  }

  /// Manual setpoint. Rejected while an automated mode is active or requested.
  void request_setpoint(double kw) {
    if (!std::isfinite(kw)) throw std::invalid_argument("setpoint must be finite");
    std::lock_guard lock(mu_);
    if (state_.charger.state == devsim::ChargerState::Fault) throw ChargerFaulted();
    if (is_automated(requested_mode_)) {
      throw ModeConflict("setpoint rejected: " + mode_name(requested_mode_) + " mode is active");
    }
    requested_mode_ = ManualMode{kw};
    queue_.push_back(ManualMode{kw});
  }

  EngineState state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  std::vector<CommandRecord> commands() const {
    std::lock_guard lock(mu_);
    return commands_;
  }

  ControlMode mode() const {
    std::lock_guard lock(mu_);
    return mode_;
  }

  // --- loop operations ---

  /// Reads both devices and stamps the pair with one timestamp.
  Sample poll_cycle() {
    const double t = clock_();
    std::vector<std::uint16_t> m;
    try {
      m = meter_.read_holding(wire::meter::kBlockStart, wire::meter::kBlockCount);
      note_success(true);
    } catch (const wire::DeviceTimeout& e) {
      note_failure(true, e.what());
      throw;
    }
    std::vector<std::uint16_t> c;
    try {
      c = charger_.read_holding(wire::charger::kBlockStart, wire::charger::kBlockCount);
      note_success(false);
    } catch (const wire::DeviceTimeout& e) {
      note_failure(false, e.what());
      throw;
    }
    namespace reg = wire::charger;
    auto word = [&](std::uint16_t addr) { return c.at(addr - reg::kBlockStart); };
    auto power = [&](std::uint16_t addr) { return wire::decode_power({word(addr), word(addr + 1)}); };
    ChargerStatus status;
    status.remote = word(reg::kRemoteEnable) != 0;
    status.running = word(reg::kRunCommand) != 0;
    status.setpoint_kw = power(reg::kSetpoint);
    status.state = static_cast<devsim::ChargerState>(word(reg::kState));
    status.dc_voltage = wire::decode_volts(word(reg::kDcVoltage));
    const double p_net = wire::decode_power({m.at(0), m.at(1)});
    const auto sample = Sample::make(t, p_net, power(reg::kMeasuredPower), wire::decode_soc(word(reg::kSoc)));
    {
      std::lock_guard lock(mu_);
      state_.charger = status;
      state_.latest = sample;
    }
    running_ = running_ || status.running;
    remote_ = status.remote;
    return sample;
  }

  /// Writes a setpoint (and the run command when stopped). Returns nullopt
  /// when suppressed because it is within the chatter threshold of the last one.
  std::optional<CommandRecord> dispatch(double kw, bool force = false) {
    if (!remote_) throw RemoteDisabled();
    if (!force && running_ && last_setpoint_ && std::abs(kw - *last_setpoint_) < config_.chatter_kw) {
      return std::nullopt;
    }
    const auto w = wire::encode_power(kw);
    const double sent_at = clock_();
    try {
      if (running_) {
        const std::uint16_t words[] = {w.hi, w.lo};
        charger_.write_multiple(wire::charger::kSetpoint, words);
      } else {
        const std::uint16_t words[] = {1, w.hi, w.lo};
        charger_.write_multiple(wire::charger::kRunCommand, words);
        running_ = true;
      }
      note_success(false);
    } catch (const wire::DeviceTimeout& e) {
      note_failure(false, e.what());
      throw;
    }
    last_setpoint_ = kw;
    CommandRecord rec{sent_at, kw, mode_name(mode_)};
    std::lock_guard lock(mu_);
    state_.last_setpoint_kw = kw;
    commands_.push_back(rec);
    return rec;
  }

  /// One control period: apply queued requests, poll, compute, dispatch, log.
  void cycle() {
    apply_requests();
    Sample sample;
    try {
      sample = poll_cycle();
    } catch (const wire::DeviceTimeout&) {
      escalate_if_needed();
      return;
    } catch (const wire::DeviceException& e) {
      set_error(e.what());
      return;
    }

    try {
      if (!remote_ && config_.take_remote_control) {
        const std::uint16_t on[] = {1};
        charger_.write_multiple(wire::charger::kRemoteEnable, on);
        remote_ = true;
      }
      if (failsafe_pending_) {
        dispatch(0.0, true);
        failsafe_pending_ = false;
        std::lock_guard lock(mu_);
        state_.failsafe_pending = false;
      }
      if (auto sp = compute_setpoint(sample)) dispatch(*sp);
    } catch (const wire::DeviceTimeout&) {
      escalate_if_needed();
    } catch (const std::exception& e) {
      set_error(e.what());
    }

    trace_.append({sample.t, sample.p_net_kw, sample.p_ev_kw, sample.soc_pct, mode_name(mode_),
                   last_setpoint_.value_or(0.0)});
    prev_ = sample;
  }

  /// Runs cycle() at the configured rate on the wall clock until stopped.
  void run(std::stop_token stop) {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / config_.sample_hz));
    auto next = clock::now();
    while (!stop.stop_requested()) {
      cycle();
      next += period;
      std::this_thread::sleep_until(next);
    }
    trace_.flush();
  }

 private:
  void apply_requests() {
    std::lock_guard lock(mu_);
    while (!queue_.empty()) {
      mode_ = std::move(queue_.front());
      queue_.pop_front();
    }
    state_.mode = mode_name(mode_);
  }

  std::optional<double> compute_setpoint(const Sample& now) {
    return std::visit(
        [&](const auto& m) -> std::optional<double> {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, IdleMode>) {
            return 0.0;
          } else if constexpr (std::is_same_v<M, ManualMode>) {
            return m.setpoint_kw;  // the charger applies its own clamp
          } else if constexpr (std::is_same_v<M, ZeroExportMode>) {
            if (!prev_) return std::nullopt;
            return zero_export_setpoint(*prev_, m.alpha_kw, config_.limits);
          } else if constexpr (std::is_same_v<M, ArbitrageMode>) {
            const double tod = std::fmod(m.start_tod_s + now.t, 86400.0);
            return arbitrage_decide(tod, m.tariff, now.soc_pct, m.soc_floor_pct, m.soc_ceiling_pct,
                                    config_.limits);
          } else {
            return dr_dispatch(now.t, m.event, now.soc_pct, config_.limits);
          }
        },
        mode_);
  }

  void note_success(bool meter) {
    std::lock_guard lock(mu_);
    (meter ? state_.meter_failures : state_.charger_failures) = 0;
  }

  void note_failure(bool meter, const std::string& what) {
    std::lock_guard lock(mu_);
    ++(meter ? state_.meter_failures : state_.charger_failures);
    state_.last_error = what;
  }

  void set_error(const std::string& what) {
    std::lock_guard lock(mu_);
    state_.last_error = what;
  }

  // After max_failures consecutive failed cycles on either device the engine
  // drops to Idle and owes the charger a zero setpoint.
  void escalate_if_needed() {
    bool escalate = false;
    {
      std::lock_guard lock(mu_);
      escalate = state_.meter_failures >= config_.max_failures ||
                 state_.charger_failures >= config_.max_failures;
      if (escalate) {
        mode_ = IdleMode{};
        requested_mode_ = IdleMode{};
        queue_.clear();
        state_.mode = "idle";
        state_.failsafe_pending = true;
      }
    }
    if (!escalate) return;
    failsafe_pending_ = true;
    if (!remote_) return;
    try {
      dispatch(0.0, true);
      failsafe_pending_ = false;
      std::lock_guard lock(mu_);
      state_.failsafe_pending = false;
    } catch (const std::exception&) {
      // retried on the next successful poll
    }
  }

  EngineConfig config_;
  wire::RegisterClient& meter_;
  wire::RegisterClient& charger_;
  Clock clock_;
  TraceLog trace_;

  mutable std::mutex mu_;
  ControlMode mode_ = IdleMode{};
  ControlMode requested_mode_ = IdleMode{};
  std::deque<ControlMode> queue_;
  EngineState state_;
  std::vector<CommandRecord> commands_;

  // loop-thread only
  std::optional<Sample> prev_;
  std::optional<double> last_setpoint_;
  bool running_ = false;
  bool remote_ = false;
  bool failsafe_pending_ = false;
};

}  // namespace v2h::engine
