// v2h: simulator, engine, benchmarks and report rendering from one binary.

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "v2h/bench/checks.hpp"
#include "v2h/bench/report.hpp"
#include "v2h/bench/runner.hpp"
#include "v2h/devsim/simulator.hpp"
#include "v2h/engine/api.hpp"
#include "v2h/engine/config.hpp"
#include "v2h/engine/engine.hpp"
#include "v2h/wire/tcp.hpp"

namespace {

using namespace v2h;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// Sleeps until interrupted or `seconds` (if positive) have passed.
void wait_for_interrupt(double seconds) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
  while (!g_interrupted) {
    if (seconds > 0 && std::chrono::steady_clock::now() >= until) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

double local_time_of_day() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  return tm.tm_hour * 3600.0 + tm.tm_min * 60.0 + tm.tm_sec;
}

struct SimArgs {
  std::string scenario = "stepTest";
  double scale = 1.0;
  std::string meter = "127.0.0.1:1502";
  std::string charger = "127.0.0.1:1503";
  double duration_s = 0.0;
};

int cmd_sim(const SimArgs& a) {
  auto scenario = devsim::scenario_load(a.scenario);
  devsim::Simulator sim(scenario);
  auto meter = wire::serve_registers(sim.meter_slave(), wire::Endpoint::parse(a.meter));
  auto charger = wire::serve_registers(sim.charger_slave(), wire::Endpoint::parse(a.charger));
  std::cerr << "simulating " << scenario.name << ": meter on " << meter->endpoint().str() << " (unit "
            << int(wire::meter::kUnitId) << "), charger on " << charger->endpoint().str() << " (unit "
            << int(wire::charger::kUnitId) << "), scale " << a.scale << "\n";
  std::jthread ticker([&](std::stop_token st) { sim.run(st, a.scale); });
  wait_for_interrupt(a.duration_s);
  ticker.request_stop();
  ticker.join();
  std::cerr << "stopped at t=" << sim.now() << " s, soc " << sim.battery().soc_pct << " %\n";
  return 0;
}

struct RunArgs {
  std::string scenario;
  std::string mode;
  std::optional<double> alpha, kw, soc_floor, soc_ceiling, dr_start, dr_end, sample_hz;
  std::string meter = "127.0.0.1:1502";
  std::string charger = "127.0.0.1:1503";
  std::string log_path;
  std::string api_host = "127.0.0.1";
  int api_port = 8080;
  std::string token;
  double duration_s = 0.0;
};

int cmd_run(const RunArgs& a) {
  engine::EngineSetup setup;
  setup.config.start_tod_s = local_time_of_day();
  if (!a.scenario.empty()) {
    const auto sc = devsim::scenario_load(a.scenario);
    setup = engine::engine_setup(sc.file, sc.start_tod_s);
  }
  auto& c = setup.config;
  c.meter = wire::Endpoint::parse(a.meter);
  c.charger = wire::Endpoint::parse(a.charger);
  if (!a.log_path.empty()) c.log_path = a.log_path;
  if (a.alpha) c.alpha_kw = *a.alpha;
  if (a.sample_hz) c.sample_hz = *a.sample_hz;
  if (!a.mode.empty()) {
    const engine::DrEvent dr{a.dr_start.value_or(0.0), a.dr_end.value_or(0.0), a.kw.value_or(0.0)};
    setup.mode = engine::make_mode(a.mode, c, a.kw.value_or(0.0), a.soc_floor.value_or(30.0),
                                   a.soc_ceiling.value_or(90.0), dr);
  }

  wire::TcpRegisterClient meter(c.meter, wire::meter::kUnitId, "meter");
  wire::TcpRegisterClient charger(c.charger, wire::charger::kUnitId, "charger");
  const auto t0 = std::chrono::steady_clock::now();
  engine::Engine eng(c, meter, charger, [t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  try {
    eng.poll_cycle();
  } catch (const wire::DeviceTimeout& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "no device answered; is the simulator running (v2h sim)?\n";
    return 1;
  }
  eng.request_mode(setup.mode);
  auto api = engine::serve_api(eng, a.api_host, a.api_port, a.token);
  std::cerr << "engine running in " << engine::mode_name(setup.mode) << " mode at " << c.sample_hz
            << " Hz; API on http://" << a.api_host << ":" << api->port() << "\n";
  std::jthread loop([&](std::stop_token st) { eng.run(st); });
  wait_for_interrupt(a.duration_s);
  loop.request_stop();
  loop.join();
  api->stop();
  return 0;
}

struct TestArgs {
  std::string kind;
  std::string scenario;
  int trials = 3;
  double dwell_s = 60.0;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::string format = "text";
  std::string log_path;
};

int finish(const std::string& report, const std::vector<bench::Check>& checks, bench::Format format) {
  std::cout << report;
  (format == bench::Format::Text ? std::cout : std::cerr) << bench::render(checks);
  return bench::all_pass(checks) ? 0 : 1;
}

int cmd_test(const TestArgs& a) {
  const auto format = bench::parse_format(a.format);
  auto load = [&](const char* fallback) {
    auto sc = devsim::scenario_load(a.scenario.empty() ? fallback : a.scenario);
    if (a.seed) sc.seed = *a.seed;
    return sc;
  };
  if (a.kind == "step" || a.kind == "sweep") {
    const bool step = a.kind == "step";
    auto plan = step ? bench::StepPlan::step_default() : bench::StepPlan::sweep_default();
    plan.trials = a.trials;
    plan.dwell_s = a.dwell_s;
    const auto sc = load(step ? "stepTest" : "sweepTest");
    bench::StepRunOptions opt;
    opt.log_path = a.log_path;
    const auto rep = step ? bench::run_step_test(plan, sc, opt) : bench::run_sweep_test(plan, sc, opt);
    return finish(bench::render(rep, format), step ? bench::step_checks(rep) : bench::sweep_checks(rep), format);
  }
  if (a.kind == "load-follow") {
    const auto run = bench::run_load_follow_test(load("table3"), a.alpha, a.log_path);
    return finish(bench::render(run.report, format), bench::load_follow_checks(run), format);
  }
  if (a.kind == "arbitrage") {
    const auto run = bench::run_arbitrage_test(load("touDay"), a.log_path);
    const double grace = bench::arbitrage_grace_s(run.scenario.charger);
    return finish(bench::render(run.report, format), bench::arbitrage_checks(run, grace), format);
  }
  throw CLI::ValidationError("test", "unknown test '" + a.kind + "'");
}

struct ReportArgs {
  std::string kind;
  std::string trace_path;
  std::string scenario;
  std::optional<double> alpha;
  std::string format = "text";
};

int cmd_report(const ReportArgs& a) {
  const auto format = bench::parse_format(a.format);
  const auto trace = engine::read_trace(a.trace_path);
  if (a.kind == "step" || a.kind == "sweep") {
    bench::TestReport rep;
    rep.kind = a.kind;
    rep.scenario = a.trace_path;
    rep.rows = bench::analyze_steps(trace);
    if (a.kind == "sweep" && !rep.rows.empty()) rep.rows.erase(rep.rows.begin());
    std::cout << bench::render(rep, format);
    return 0;
  }
  if (a.kind == "load-follow") {
    const auto sc = devsim::scenario_load(a.scenario.empty() ? "table3" : a.scenario);
    const double alpha = a.alpha.value_or(engine::engine_setup(sc.file).config.alpha_kw);
    std::cout << bench::render(bench::load_follow_report(trace, sc, alpha), format);
    return 0;
  }
  if (a.kind == "arbitrage") {
    const auto sc = devsim::scenario_load(a.scenario.empty() ? "touDay" : a.scenario);
    const auto tariff = engine::TariffSchedule::ontario_summer_2022();
    std::cout << bench::render(bench::arbitrage_report(trace, tariff, sc.start_tod_s, a.trace_path), format);
    return 0;
  }
  throw CLI::ValidationError("--kind", "unknown report kind '" + a.kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residential bidirectional EV charger: simulator, control engine and benchmarks"};
  app.require_subcommand(1);

  SimArgs sim;
  auto* s = app.add_subcommand("sim", "serve the simulated meter and charger until interrupted");
  s->add_option("--scenario", sim.scenario, "bundled scenario name or scenario file")->capture_default_str();
  s->add_option("--scale", sim.scale, "simulated seconds per wall second (0 = free-run)")->capture_default_str();
  s->add_option("--meter", sim.meter, "meter listen address")->envname("V2H_METER")->capture_default_str();
  s->add_option("--charger", sim.charger, "charger listen address")->envname("V2H_CHARGER")->capture_default_str();
  s->add_option("--duration", sim.duration_s, "stop after this many wall seconds");

  RunArgs run;
  auto* r = app.add_subcommand("run", "run the control engine and its HTTP API against live devices");
  r->add_option("--scenario", run.scenario, "take [engine] settings from a scenario");
  r->add_option("--mode", run.mode, "idle | manual | zero-export | arbitrage | dr")
      ->check(CLI::IsMember({"idle", "manual", "zero-export", "zero_export", "arbitrage", "dr"}));
  r->add_option("--alpha", run.alpha, "zero-export tolerance in kW");
  r->add_option("--kw", run.kw, "manual setpoint or demand-response reduction in kW");
  r->add_option("--soc-floor", run.soc_floor, "arbitrage SOC floor in %");
  r->add_option("--soc-ceiling", run.soc_ceiling, "arbitrage SOC ceiling in %");
  r->add_option("--dr-start", run.dr_start, "demand-response start, seconds after launch");
  r->add_option("--dr-end", run.dr_end, "demand-response end, seconds after launch");
  r->add_option("--sample-hz", run.sample_hz, "polling rate");
  r->add_option("--meter", run.meter, "meter address")->envname("V2H_METER")->capture_default_str();
  r->add_option("--charger", run.charger, "charger address")->envname("V2H_CHARGER")->capture_default_str();
  r->add_option("--log", run.log_path, "trace log (.csv or .jsonl)")->envname("V2H_LOG");
  r->add_option("--api-host", run.api_host, "API bind address")->capture_default_str();
  r->add_option("--api-port", run.api_port, "API port (0 = any)")->capture_default_str();
  r->add_option("--token", run.token, "require this bearer token on API calls")->envname("V2H_TOKEN");
  r->add_option("--duration", run.duration_s, "stop after this many seconds");

  TestArgs test;
  auto* t = app.add_subcommand("test", "run a benchmark on an embedded simulator and print its report");
  t->add_option("kind", test.kind, "step | sweep | arbitrage | load-follow")
      ->required()
      ->check(CLI::IsMember({"step", "sweep", "arbitrage", "load-follow"}));
  t->add_option("--scenario", test.scenario, "override the bundled scenario");
  t->add_option("--trials", test.trials, "trials to average (step, sweep)")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--dwell", test.dwell_s, "seconds per setpoint (step, sweep)")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--alpha", test.alpha, "zero-export tolerance in kW (load-follow)");
  t->add_option("--seed", test.seed, "override the scenario seed");
  t->add_option("--format", test.format, "text | csv | json")->check(CLI::IsMember({"text", "csv", "json"}))->capture_default_str();
  t->add_option("--log", test.log_path, "write the trace here")->envname("V2H_LOG");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "render a report from a saved trace");
  p->add_option("--kind", rep.kind, "step | sweep | arbitrage | load-follow")
      ->required()
      ->check(CLI::IsMember({"step", "sweep", "arbitrage", "load-follow"}));
  p->add_option("trace", rep.trace_path, "trace file (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
  p->add_option("--scenario", rep.scenario, "scenario the trace came from");
  p->add_option("--alpha", rep.alpha, "zero-export tolerance in kW (load-follow)");
  p->add_option("--format", rep.format, "text | csv | json")->check(CLI::IsMember({"text", "csv", "json"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);
  try {
    if (s->parsed()) return cmd_sim(sim);
    if (r->parsed()) return cmd_run(run);
    if (t->parsed()) return cmd_test(test);
    if (p->parsed()) return cmd_report(rep);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const v2h::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wire::DeviceTimeout& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
