#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "support/properties.hpp"
#include "v2h/engine/config.hpp"
#include "v2h/engine/engine.hpp"

using namespace v2h::engine;

namespace {

constexpr double kHour = 3600.0;

// p_max from the charger's voltage and current limits, written out by hand.
double p_max(double soc) { return std::min(7.4, (350.0 + 0.5 * soc) * 17.0 / 1000.0); }

}  // namespace

TEST(SampleTest, HouseLoadFromNetAndEv) {
  const auto s = Sample::make(0.0, 0.328, -5.86, 85.0);
  EXPECT_NEAR(s.house_load_kw, 6.188, 1e-12);
}

TEST(ZeroExport, UsesPreviousSample) {
  const auto prev = Sample::make(0.0, 0.328, -5.86, 85.0);
  EXPECT_NEAR(zero_export_setpoint(prev, 0.3), -5.888, 1e-12);
  EXPECT_NEAR(zero_export_setpoint(Sample::make(0.0, 2.0, 0.0, 85.0), 0.1), -1.9, 1e-12);
}

TEST(ZeroExport, FixedPointReproducesItself) {
  // with the EV at the commanded value, net power sits at alpha and the law is stationary
  for (double house : {0.5, 1.2, 3.7, 6.0}) {
    const double alpha = 0.1;
    const double ev = alpha - house;
    const auto s = Sample::make(0.0, house + ev, ev, 85.0);
    EXPECT_NEAR(zero_export_setpoint(s, alpha), ev, 1e-12);
    EXPECT_NEAR(s.p_net_kw, alpha, 1e-12);
  }
}

TEST(ZeroExport, AtAlphaWithIdleEvCommandsZero) {
  EXPECT_EQ(zero_export_setpoint(Sample::make(0.0, 0.1, 0.0, 85.0), 0.1), 0.0);
}

TEST(ZeroExport, IdempotentInStaticHouse) {
  // feeding the commanded value back as the measured EV power converges in one step
  for (double house : {0.3, 2.0, 5.0}) {
    const double first = zero_export_setpoint(Sample::make(0.0, house, 0.0, 85.0), 0.1);
    const auto settled = Sample::make(1.0, house + first, first, 85.0);
    EXPECT_NEAR(zero_export_setpoint(settled, 0.1), first, 1e-12);
  }
}

TEST(ZeroExportProperty, NeverBackfeedsBeyondHouse) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> load(0.0, 10.0), ev(-7.0, 7.0), soc(0.0, 100.0), alpha(0.0, 0.5);
  for (int i = 0; i < 20000; ++i) {
    const double l = load(rng), a = alpha(rng), p = ev(rng);
    const auto s = Sample::make(0.0, l + p, p, soc(rng));
    const double sp = zero_export_setpoint(s, a);
    if (l >= a) {
      EXPECT_GE(sp, -(l - a) - 1e-12) << "load " << l << " alpha " << a;
    }
    EXPECT_LE(std::abs(sp), p_max(s.soc_pct) + 1e-12);
  }
}

TEST(SampleTest, AllZeroReads) {
  const auto s = Sample::make(0.0, 0.0, 0.0, 0.0);
  EXPECT_EQ(s.p_net_kw, 0.0);
  EXPECT_EQ(s.p_ev_kw, 0.0);
  EXPECT_EQ(s.house_load_kw, 0.0);
}

TEST(ZeroExport, ClampsToChargerLimit) {
  const auto s = Sample::make(0.0, 9.0, 0.0, 50.0);
  EXPECT_NEAR(zero_export_setpoint(s, 0.1), -p_max(50.0), 1e-12);
}

TEST(Arbitrage, DecisionsByBand) {
  const auto tariff = TariffSchedule::ontario_summer_2022();
  EXPECT_NEAR(arbitrage_decide(20 * kHour, tariff, 40.0, 30.0, 90.0), p_max(40.0), 1e-12);
  EXPECT_NEAR(arbitrage_decide(20 * kHour, tariff, 40.0, 30.0, 90.0), 6.29, 1e-12);
  EXPECT_NEAR(arbitrage_decide(12 * kHour, tariff, 90.0, 30.0, 95.0), -p_max(90.0), 1e-12);
  EXPECT_NEAR(arbitrage_decide(12 * kHour, tariff, 90.0, 30.0, 95.0), -6.715, 1e-12);
  EXPECT_EQ(arbitrage_decide(9 * kHour, tariff, 60.0, 30.0, 90.0), 0.0);
  EXPECT_EQ(arbitrage_decide(18 * kHour, tariff, 60.0, 30.0, 90.0), 0.0);
  EXPECT_EQ(arbitrage_decide(2 * kHour, tariff, 90.0, 30.0, 90.0), 0.0);   // at ceiling
  EXPECT_EQ(arbitrage_decide(13 * kHour, tariff, 30.0, 30.0, 90.0), 0.0);  // at floor
}

TEST(DemandResponse, DispatchWithinEvent) {
  const DrEvent ev{100.0, 200.0, 4.0};
  EXPECT_NEAR(dr_dispatch(150.0, ev, 50.0), -4.0, 1e-12);
  EXPECT_NEAR(dr_dispatch(150.0, DrEvent{100.0, 200.0, 10.0}, 50.0), -6.375, 1e-12);
  EXPECT_EQ(dr_dispatch(99.0, ev, 50.0), 0.0);
  EXPECT_EQ(dr_dispatch(200.0, ev, 50.0), 0.0);
  EXPECT_THROW((DrEvent{5.0, 5.0, 1.0}.validate()), std::invalid_argument);
}

TEST(FreqRegulation, SweepLatenciesAreNotSuitable) {
  const std::vector<double> legs{8.74, 7.32, 8.40, 9.52, 8.90, 9.54};
  const auto a = assess_freq_regulation(legs, 6.0);
  EXPECT_FALSE(a.suitable);
  EXPECT_DOUBLE_EQ(a.p95_s, 9.54);
}

TEST(FreqRegulation, NearestRank) {
  const std::vector<double> fast(20, 2.0);
  EXPECT_TRUE(assess_freq_regulation(fast, 6.0).suitable);
  const std::vector<double> outlier{5, 5, 5, 5, 5, 100};
  EXPECT_EQ(assess_freq_regulation(outlier).p95_s, 100.0);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  EXPECT_EQ(assess_freq_regulation(hundred).p95_s, 95.0);
  EXPECT_THROW(assess_freq_regulation(std::vector<double>{}), std::invalid_argument);
}

TEST(TariffTest, OntarioBands) {
  const auto t = TariffSchedule::ontario_summer_2022();
  EXPECT_EQ(t.band_at(0.0)->label, TariffLabel::OffPeak);
  EXPECT_EQ(t.band_at(7 * kHour)->label, TariffLabel::MidPeak);
  EXPECT_EQ(t.band_at(11 * kHour)->label, TariffLabel::OnPeak);
  EXPECT_EQ(t.band_at(17 * kHour - 1)->label, TariffLabel::OnPeak);
  EXPECT_EQ(t.band_at(19 * kHour)->label, TariffLabel::OffPeak);
  EXPECT_DOUBLE_EQ(t.rate_at(25 * kHour), 0.082);
  EXPECT_DOUBLE_EQ(t.rate_at(-1.0), 0.082);
  for (double s = 0; s < 86400; s += 60) ASSERT_NE(t.band_at(s), nullptr);
}

TEST(TariffTest, Validation) {
  EXPECT_THROW(TariffSchedule({{0, 10, 0.1, TariffLabel::OffPeak}, {5, 20, 0.1, TariffLabel::OnPeak}}),
               std::invalid_argument);
  EXPECT_THROW(TariffSchedule({{0, 10, -0.1, TariffLabel::OffPeak}}), std::invalid_argument);
  EXPECT_THROW(TariffSchedule({{0, 90000, 0.1, TariffLabel::OffPeak}}), std::invalid_argument);
  EXPECT_THROW(TariffSchedule({{80000, 1000, 0.1, TariffLabel::OffPeak}, {500, 2000, 0.1, TariffLabel::OnPeak}}),
               std::invalid_argument);
}

TEST(ModeValidation, Rejects) {
  EXPECT_THROW(validate(ControlMode{ZeroExportMode{-0.1}}), std::invalid_argument);
  EXPECT_THROW(validate(ControlMode{ArbitrageMode{.soc_floor_pct = 90, .soc_ceiling_pct = 30}}),
               std::invalid_argument);
  EXPECT_THROW(validate(ControlMode{ManualMode{std::nan("")}}), std::invalid_argument);
  EngineConfig c;
  c.sample_hz = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ConfigTest, MakeModeAndSetup) {
  EngineConfig c;
  c.alpha_kw = 0.2;
  EXPECT_EQ(mode_name(make_mode("zero-export", c, 0, 30, 90, {})), "zero_export");
  EXPECT_EQ(std::get<ZeroExportMode>(make_mode("zero_export", c, 0, 30, 90, {})).alpha_kw, 0.2);
  EXPECT_THROW(make_mode("turbo", c, 0, 30, 90, {}), std::invalid_argument);

  const auto sc = v2h::devsim::scenario_load("table3");
  const auto setup = engine_setup(sc.file);
  EXPECT_EQ(setup.config.sample_hz, 5.0);
  EXPECT_EQ(setup.config.alpha_kw, 0.1);
  EXPECT_EQ(mode_name(setup.mode), "zero_export");
}

namespace {

// Simulator plus engine over in-process register clients, stepped together.
struct Bench {
  explicit Bench(EngineConfig config = {}, double house_kw = 0.5, bool remote = false)
      : sim(make(house_kw, remote)),
        meter(sim.meter_slave(), "meter"),
        charger(sim.charger_slave(), "charger"),
        eng(config, meter, charger, [this] { return sim.now(); }) {}

  static v2h::devsim::Scenario make(double house_kw, bool remote) {
    auto sc = v2h::testing::flat_scenario(house_kw);
    sc.charger_remote = remote;
    return sc;
  }

  void step() {
    eng.cycle();
    sim.advance(1.0 / eng.config().sample_hz);
  }

  v2h::devsim::Simulator sim;
  v2h::wire::SlaveClient meter;
  v2h::wire::SlaveClient charger;
  Engine eng;
};

}  // namespace

TEST(EngineLoop, PollStampsOneTimestamp) {
  Bench b;
  b.sim.advance(1.0);
  const auto s = b.eng.poll_cycle();
  EXPECT_DOUBLE_EQ(s.t, b.sim.now());
  EXPECT_NEAR(s.p_net_kw, 0.5, 1e-9);
  EXPECT_NEAR(s.soc_pct, 85.0, 1e-9);
  EXPECT_NEAR(s.house_load_kw, 0.5, 1e-9);
}

TEST(EngineLoop, ChatterSuppressed) {
  Bench b;
  b.eng.request_setpoint(2.0);
  for (int i = 0; i < 20; ++i) b.step();
  EXPECT_EQ(b.eng.commands().size(), 1u);
  b.eng.request_setpoint(2.005);
  for (int i = 0; i < 5; ++i) b.step();
  EXPECT_EQ(b.eng.commands().size(), 1u);
  b.eng.request_setpoint(2.5);
  for (int i = 0; i < 5; ++i) b.step();
  EXPECT_EQ(b.eng.commands().size(), 2u);
  EXPECT_EQ(b.eng.commands().back().setpoint_kw, 2.5);
}

TEST(EngineLoop, RemoteDisabledWhenNotTakingControl) {
  EngineConfig c;
  c.take_remote_control = false;
  Bench b(c);
  b.eng.poll_cycle();
  EXPECT_THROW(b.eng.dispatch(1.0), RemoteDisabled);
  b.eng.request_setpoint(1.0);
  b.step();
  EXPECT_NE(b.eng.state().last_error.find("RemoteDisabled"), std::string::npos);
  EXPECT_TRUE(b.eng.commands().empty());
}

TEST(EngineLoop, SetpointRejectedUnderAutomatedMode) {
  Bench b;
  b.eng.request_mode(ArbitrageMode{});
  EXPECT_THROW(b.eng.request_setpoint(1.0), ModeConflict);
  b.eng.request_mode(IdleMode{});
  EXPECT_NO_THROW(b.eng.request_setpoint(1.0));
  EXPECT_THROW(b.eng.request_setpoint(std::nan("")), std::invalid_argument);
}

TEST(EngineLoop, ManualReachesSetpoint) {
  Bench b;
  b.eng.request_setpoint(2.0);
  while (b.sim.now() < 130.0) b.step();
  EXPECT_NEAR(b.sim.charger().p_ev_kw(), 2.0, 1e-9);
  EXPECT_EQ(b.eng.state().mode, "manual");
  EXPECT_EQ(b.eng.trace().rows().back().mode, "manual");
}

TEST(EngineLoop, TraceLogWritten) {
  const auto path = std::filesystem::temp_directory_path() / "v2h_engine_test_trace.jsonl";
  std::filesystem::remove(path);
  {
    EngineConfig c;
    c.log_path = path.string();
    Bench b(c);
    for (int i = 0; i < 10; ++i) b.step();
    b.eng.trace().flush();
  }
  const auto rows = read_trace(path.string());
  EXPECT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows.front().mode, "idle");
  std::filesystem::remove(path);
}

TEST(FailsafeProperty, ZeroAfterTimeouts) {
  const auto out = v2h::testing::failsafe_after_timeouts();
  EXPECT_TRUE(out.dropped_to_idle);
  EXPECT_EQ(out.cycles_to_idle, 3);
  EXPECT_TRUE(out.zero_commanded);
  EXPECT_TRUE(out.output_zero);
}

TEST(FailsafeProperty, ChargerOutageWritesZeroWhenLinkReturns) {
  const auto out = v2h::testing::failsafe_after_timeouts(true);
  EXPECT_TRUE(out.dropped_to_idle);
  EXPECT_EQ(out.cycles_to_idle, 3);
  EXPECT_TRUE(out.zero_commanded);
  EXPECT_TRUE(out.output_zero);
}

TEST(EngineLoop, OneModePerSamplePeriod) {
  Bench b;
  b.eng.request_setpoint(2.0);
  for (int i = 0; i < 3; ++i) b.step();
  b.eng.request_mode(ZeroExportMode{0.1});
  for (int i = 0; i < 3; ++i) b.step();
  b.eng.request_mode(IdleMode{});
  b.eng.request_setpoint(-1.0);
  for (int i = 0; i < 3; ++i) b.step();
  const auto& cmds = b.eng.commands();
  ASSERT_GE(cmds.size(), 3u);
  const double period = 1.0 / b.eng.config().sample_hz;
  for (std::size_t i = 1; i < cmds.size(); ++i) {
    if (cmds[i].mode != cmds[i - 1].mode) {
      EXPECT_GE(cmds[i].sent_at - cmds[i - 1].sent_at, period - 1e-9);
    }
  }
}

TEST(ZeroExportProperty, FixedPointUnderConstantLoad) {
  for (double house : {0.8, 2.0, 4.5}) {
    const auto r = v2h::testing::zero_export_fixed_point(house, 0.1);
    EXPECT_EQ(r.failures, 0) << "house " << house << " worst " << r.worst;
    EXPECT_GT(r.cases, 0);
  }
}
