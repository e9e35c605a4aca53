#pragma once

// End-to-end experiments: an embedded simulator served over loopback TCP,
// driven in lockstep with the engine on the simulated clock.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2h/bench/report.hpp"
#include "v2h/devsim/simulator.hpp"
#include "v2h/engine/config.hpp"
#include "v2h/engine/engine.hpp"
#include "v2h/wire/tcp.hpp"

namespace v2h::bench {

/// Simulator, register servers, clients and engine wired together. Each
/// step runs one engine cycle and then advances the simulator by one
/// sample period.
class Rig {
 public:
  Rig(devsim::Scenario scenario, engine::EngineConfig config)
      : sim_(std::move(scenario)),
        meter_server_(sim_.meter_slave(), wire::Endpoint{"127.0.0.1", 0}),
        charger_server_(sim_.charger_slave(), wire::Endpoint{"127.0.0.1", 0}),
        meter_(meter_server_.endpoint(), wire::meter::kUnitId, "meter"),
        charger_(charger_server_.endpoint(), wire::charger::kUnitId, "charger"),
        engine_(with_endpoints(std::move(config)), meter_, charger_, [this] { return sim_.now(); }) {}

  devsim::Simulator& sim() { return sim_; }
  engine::Engine& engine() { return engine_; }
  double period() const { return 1.0 / engine_.config().sample_hz; }

  void step() {
    engine_.cycle();
    sim_.advance(period());
  }

  void run_until(double t) {
    while (sim_.now() < t - 1e-9) step();
  }

  void run_for(double seconds) { run_until(sim_.now() + seconds); }

 private:
  engine::EngineConfig with_endpoints(engine::EngineConfig c) const {
    c.meter = meter_server_.endpoint();
    c.charger = charger_server_.endpoint();
    return c;
  }

  devsim::Simulator sim_;
  wire::TcpRegisterServer meter_server_;
  wire::TcpRegisterServer charger_server_;
  wire::TcpRegisterClient meter_;
  wire::TcpRegisterClient charger_;
  engine::Engine engine_;
};

struct StepPlan {
  std::vector<double> setpoints;
  double dwell_s = 60.0;
  double sample_hz = 5.0;
  int trials = 3;

  /// +7 kW down to -7 kW in 1 kW decrements.
  static StepPlan step_default() {
    StepPlan p;
    for (int kw = 7; kw >= -7; --kw) p.setpoints.push_back(kw);
    return p;
  }

  /// +6 kW, then six legs alternating between -6 and +6.
  static StepPlan sweep_default() {
    StepPlan p;
    p.setpoints = {6, -6, 6, -6, 6, -6, 6};
    return p;
  }

  void validate() const {
    if (setpoints.empty()) throw std::invalid_argument("step plan needs at least one setpoint");
    if (!(dwell_s > 0.0) || !(sample_hz > 0.0)) throw std::invalid_argument("dwell and rate must be positive");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  }
};

class TrialAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One pass of the plan. The first setpoint is held until negotiation has
/// finished and then for one dwell; every later setpoint for one dwell.
inline std::vector<TraceRow> run_step_trial(const StepPlan& plan, devsim::Scenario scenario,
                                            const std::string& log_path = {}) {
  plan.validate();
  engine::EngineConfig config;
  config.sample_hz = plan.sample_hz;
  config.log_path = log_path;
  Rig rig(std::move(scenario), config);
  auto check_fault = [&] {
    if (rig.sim().charger().state() == devsim::ChargerState::Fault) {
      throw TrialAborted("charger faulted during the trial");
    }
  };
  rig.engine().request_setpoint(plan.setpoints.front());
  rig.step();
  while (rig.sim().charger().state() == devsim::ChargerState::Disconnected ||
         rig.sim().charger().state() == devsim::ChargerState::Negotiating) {
    if (rig.sim().now() > 3600.0) throw TrialAborted("charger never finished negotiating");
    rig.step();
  }
  rig.run_for(plan.dwell_s);
  check_fault();
  for (std::size_t i = 1; i < plan.setpoints.size(); ++i) {
    rig.engine().request_setpoint(plan.setpoints[i]);
    rig.run_for(plan.dwell_s);
    check_fault();
  }
  rig.engine().trace().flush();
  return rig.engine().trace().rows();
}

struct StepRunOptions {
  std::string log_path;  // trace of the first trial, if set
  StepAnalysis analysis;
};

inline TestReport run_plan(const std::string& kind, const StepPlan& plan, const devsim::Scenario& scenario,
                           const StepRunOptions& opt) {
  std::vector<std::vector<StepRow>> trials;
  for (int k = 0; k < plan.trials; ++k) {
    devsim::Scenario sc = scenario;
    sc.seed = scenario.seed + static_cast<std::uint64_t>(k);
    const auto trace = run_step_trial(plan, sc, k == 0 ? opt.log_path : std::string{});
    trials.push_back(analyze_steps(trace, opt.analysis));
  }
  TestReport rep;
  rep.kind = kind;
  rep.scenario = scenario.name;
  rep.trials = plan.trials;
  rep.steady_window_s = opt.analysis.steady_window_s;
  rep.rows = average_trials(trials);
  return rep;
}

inline TestReport run_step_test(const StepPlan& plan, const devsim::Scenario& scenario,
                                const StepRunOptions& opt = {}) {
  return run_plan("step", plan, scenario, opt);
}

/// Sweep rows are the legs; the initial +6 kW step only establishes the start.
inline TestReport run_sweep_test(const StepPlan& plan, const devsim::Scenario& scenario,
                                 const StepRunOptions& opt = {}) {
  auto rep = run_plan("sweep", plan, scenario, opt);
  if (!rep.rows.empty()) rep.rows.erase(rep.rows.begin());
  return rep;
}

/// Runs the scenario's [engine] setup for the scenario duration.
inline std::vector<TraceRow> run_scenario(const devsim::Scenario& scenario, const engine::EngineSetup& setup,
                                          double duration_s) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("scenario needs a positive duration");
  Rig rig(scenario, setup.config);
  rig.engine().request_mode(setup.mode);
  rig.run_until(duration_s);
  rig.engine().trace().flush();
  return rig.engine().trace().rows();
}

struct LoadFollowRun {
  devsim::Scenario scenario;
  double alpha_kw = 0.0;
  std::vector<TraceRow> trace;
  LoadFollowReport report;
};

inline LoadFollowRun run_load_follow_test(const devsim::Scenario& scenario, std::optional<double> alpha_kw = {},
                                          const std::string& log_path = {}) {
  auto setup = engine::engine_setup(scenario.file, scenario.start_tod_s);
  if (alpha_kw) setup.config.alpha_kw = *alpha_kw;
  setup.mode = engine::ZeroExportMode{setup.config.alpha_kw};
  setup.config.log_path = log_path;
  LoadFollowRun run{scenario, setup.config.alpha_kw, {}, {}};
  run.trace = run_scenario(scenario, setup, scenario.duration_s);
  run.report = load_follow_report(run.trace, scenario, run.alpha_kw);
  return run;
}

struct ArbitrageRun {
  devsim::Scenario scenario;
  engine::ArbitrageMode mode;
  std::vector<TraceRow> trace;
  ArbitrageReport report;
};

inline ArbitrageRun run_arbitrage_test(const devsim::Scenario& scenario, const std::string& log_path = {}) {
  auto setup = engine::engine_setup(scenario.file, scenario.start_tod_s);
  if (!std::holds_alternative<engine::ArbitrageMode>(setup.mode)) {
    setup.mode = engine::ArbitrageMode{.start_tod_s = scenario.start_tod_s};
  }
  setup.config.log_path = log_path;
  ArbitrageRun run{scenario, std::get<engine::ArbitrageMode>(setup.mode), {}, {}};
  run.trace = run_scenario(scenario, setup, scenario.duration_s);
  run.report = arbitrage_report(run.trace, run.mode.tariff, scenario.start_tod_s, scenario.name);
  return run;
}

}  // namespace v2h::bench
