#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "support/properties.hpp"
#include "v2h/bench/checks.hpp"
#include "v2h/bench/metrics.hpp"
#include "v2h/bench/report.hpp"
#include "v2h/bench/runner.hpp"

using namespace v2h;
using bench::TraceRow;

namespace {

constexpr double kHour = 3600.0;

TraceRow row(double t, double p_net, double p_ev, double soc = 50.0, std::string mode = "manual",
             double sp = 0.0) {
  return {t, p_net, p_ev, soc, std::move(mode), sp};
}

// 10 kWh charged at 5 kW from midnight, 10 kWh discharged at 5 kW from 11:00.
std::vector<TraceRow> ten_and_ten() {
  return {row(0, 5, 5), row(2 * kHour, 0, 0), row(11 * kHour, -5, -5), row(13 * kHour, 0, 0)};
}

}  // namespace

TEST(Revenue, TenKwhEachWay) {
  const auto tariff = engine::TariffSchedule::ontario_summer_2022();
  // 10 kWh * 0.170 $/kWh earned, 10 kWh * 0.082 $/kWh paid
  EXPECT_NEAR(bench::arbitrage_revenue(ten_and_ten(), tariff), 10 * 0.170 - 10 * 0.082, 1e-12);
  EXPECT_NEAR(bench::arbitrage_revenue(ten_and_ten(), tariff), 0.88, 1e-12);
}

TEST(Revenue, FlatTraceEarnsNothing) {
  const auto tariff = engine::TariffSchedule::ontario_summer_2022();
  std::vector<TraceRow> flat;
  for (int i = 0; i <= 24; ++i) flat.push_back(row(i * kHour, 0.3, 0.0));
  EXPECT_EQ(bench::arbitrage_revenue(flat, tariff), 0.0);
  EXPECT_EQ(bench::arbitrage_revenue(std::vector<TraceRow>{}, tariff), 0.0);
}

TEST(Revenue, LinearInPowerAndMonotoneInOnPeakRate) {
  const auto tariff = engine::TariffSchedule::ontario_summer_2022();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> kw(-7.0, 7.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TraceRow> trace, doubled;
    for (int m = 0; m <= 1440; m += 10) {
      const double p = kw(rng);
      trace.push_back(row(m * 60.0, p, p));
      doubled.push_back(row(m * 60.0, 2 * p, 2 * p));
    }
    const double r = bench::arbitrage_revenue(trace, tariff);
    EXPECT_NEAR(bench::arbitrage_revenue(doubled, tariff), 2 * r, 1e-9);
  }
  const auto richer = tariff.with_rate(engine::TariffLabel::OnPeak, 0.25);
  EXPECT_GT(bench::arbitrage_revenue(ten_and_ten(), richer), bench::arbitrage_revenue(ten_and_ten(), tariff));
}

TEST(Revenue, LinearInRates) {
  const auto tariff = engine::TariffSchedule::ontario_summer_2022();
  std::vector<TraceRow> trace;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> kw(-7.0, 7.0);
  for (int m = 0; m <= 1440; m += 15) trace.push_back(row(m * 60.0, 0, kw(rng)));
  const double base = bench::arbitrage_revenue(trace, tariff);
  for (double k : {0.5, 2.0, 3.7}) {
    const auto scaled = tariff.with_rate(engine::TariffLabel::OffPeak, 0.082 * k)
                            .with_rate(engine::TariffLabel::MidPeak, 0.113 * k)
                            .with_rate(engine::TariffLabel::OnPeak, 0.170 * k);
    EXPECT_NEAR(bench::arbitrage_revenue(trace, scaled), k * base, 1e-9);
  }
}

TEST(Revenue, StartTimeOfDayShiftsBands) {
  const auto tariff = engine::TariffSchedule::ontario_summer_2022();
  const std::vector<TraceRow> t{row(0, -1, -1), row(kHour, 0, 0)};
  EXPECT_NEAR(bench::arbitrage_revenue(t, tariff, 0.0), 0.082, 1e-12);
  EXPECT_NEAR(bench::arbitrage_revenue(t, tariff, 12 * kHour), 0.170, 1e-12);
}

TEST(SteadyState, Examples) {
  EXPECT_NEAR(bench::error_vs_target(-3.0, -3.0), 0.0, 1e-12);
  EXPECT_NEAR(bench::error_vs_target(6.29, 7.0), 71.0 / 7.0, 1e-9);  // 10.14 %
  EXPECT_NEAR(bench::error_vs_target(0.002, 0.0), 0.002, 1e-12);
  EXPECT_NEAR(bench::error_vs_target(-0.002, 0.0), 0.002, 1e-12);

  std::vector<TraceRow> t;
  for (int i = 0; i < 10; ++i) t.push_back(row(i, 0, i < 5 ? 1.0 : 3.0));
  EXPECT_NEAR(bench::mean_ev_power(t, 5, 10), 3.0, 1e-12);
  EXPECT_NEAR(bench::steady_state_error(t, 0, 10, 2.0), 0.0, 1e-12);
  EXPECT_THROW(bench::mean_ev_power(t, 20, 30), bench::EmptyWindow);
}

TEST(ResponseTime, FirstSampleInBand) {
  std::vector<TraceRow> t;
  for (int i = 0; i <= 100; ++i) t.push_back(row(i * 0.2, 0, std::min(6.0, std::max(0.0, (i * 0.2 - 5.5) * 4))));
  // 6 kW band is 0.06; first sample >= 5.94 kW is at t = 7.0
  EXPECT_NEAR(bench::response_time(t, 0.0, 6.0, 60.0), 7.0, 1e-9);
  EXPECT_NEAR(bench::response_time(t, 10.0, 6.0, 5.0), 0.0, 1e-12);  // already there
  EXPECT_THROW(bench::response_time(t, 0.0, -6.0, 20.0), bench::NeverReached);
  EXPECT_THROW(bench::response_time(t, 0.0, 6.0, 3.0), bench::NeverReached);
  EXPECT_EQ(bench::default_band(0.0), 0.05);
  EXPECT_EQ(bench::default_band(-7.0), 0.07);
}

TEST(StepAnalysisTest, SplitsAtSetpointChanges) {
  std::vector<TraceRow> t;
  double p = 0.0;
  for (int i = 0; i < 600; ++i) {
    const double time = i * 0.2;
    const double sp = time < 60 ? 3.0 : -2.0;
    const double target = time < 5.5 ? 0.0 : (time < 65.5 ? 3.0 : -2.0);
    p += std::clamp(target - p, -0.8, 0.8);
    t.push_back(row(time, 0, p, 50, "manual", sp));
  }
  const auto rows = bench::analyze_steps(t);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].first);
  EXPECT_EQ(rows[1].from_kw, 3.0);
  EXPECT_EQ(rows[1].setpoint_kw, -2.0);
  EXPECT_NEAR(rows[1].achieved_kw, -2.0, 1e-9);
  EXPECT_NEAR(rows[1].response_time_s, 6.8, 1e-9);
}

TEST(AverageTrials, PerCellMean) {
  bench::StepRow a, b;
  a.setpoint_kw = b.setpoint_kw = 2;
  a.response_time_s = 5;
  b.response_time_s = 7;
  a.error = 0.1;
  b.error = 0.3;
  const auto avg = bench::average_trials({{a}, {b}});
  ASSERT_EQ(avg.size(), 1u);
  EXPECT_DOUBLE_EQ(avg[0].response_time_s, 6.0);
  EXPECT_DOUBLE_EQ(avg[0].error, 0.2);
}

TEST(LoadFollowProperty, AccountingIdentities) {
  const auto sc = devsim::scenario_load("table3");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> house(0.0, 8.0), ev(-7.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TraceRow> t;
    double charged = 0.0;
    const int n = 500;
    for (int i = 0; i < n; ++i) {
      const double h = house(rng), p = ev(rng);
      t.push_back(row(i * 1.0, h + p, p, 50, "zero_export"));
      if (i + 1 < n) charged += std::max(0.0, p) / kHour;
    }
    const auto tot = bench::load_follow_report(t, sc, 0.1).totals;
    EXPECT_NEAR(tot.ev_discharged_kwh, tot.ev_supplied_kwh + tot.exported_kwh, 1e-9);
    EXPECT_NEAR(tot.house_kwh, tot.ev_supplied_kwh + tot.net_kwh - charged, 1e-9);
    EXPECT_LE(tot.ev_supplied_kwh, tot.house_kwh + 1e-12);
  }
}

TEST(LoadFollow, GoldenTrace) {
  const auto trace = engine::read_trace(V2H_SOURCE_DIR "/data/golden/table3_load_follow.csv");
  const auto rep = bench::load_follow_report(trace, devsim::scenario_load("table3"), 0.1);
  EXPECT_NEAR(rep.totals.house_kwh, 6.908, 0.005);
  EXPECT_NEAR(rep.totals.ev_supplied_kwh, 4.374, 0.005);
  EXPECT_NEAR(rep.totals.net_kwh, 2.534, 0.005);
  EXPECT_NEAR(rep.totals.tolerance_kwh, 0.505, 1e-9);
  EXPECT_NEAR(rep.totals.house_kwh, rep.totals.ev_supplied_kwh + rep.totals.net_kwh, 0.001);
  ASSERT_EQ(rep.items.size(), 6u);
  EXPECT_EQ(rep.items.back().name, "base_load");
  EXPECT_NEAR(rep.items.back().energy_kwh, 0.13 * 303 / 60, 1e-9);

  const auto text = bench::render(rep, bench::Format::Text);
  EXPECT_NE(text.find("TOTAL house 6.91 = EV 4.37 + net 2.53 kWh"), std::string::npos) << text;
}

TEST(LoadFollow, AlphaAboveHouseLoadMeansNoCoverage) {
  const auto sc = devsim::scenario_load("table3");
  std::vector<TraceRow> t;
  for (int i = 0; i <= 600; ++i) t.push_back(row(i, 0.2, 0.0, 50, "zero_export"));
  EXPECT_EQ(bench::load_follow_report(t, sc, 0.3).totals.coverage_pct, 0.0);
  EXPECT_EQ(bench::load_follow_report(t, sc, 0.2).totals.coverage_pct, 0.0);
}

TEST(LoadFollow, ScenarioWithoutAppliances) {
  const std::vector<TraceRow> t{row(0, 1, 0), row(1, 1, 0)};
  EXPECT_THROW(bench::load_follow_report(t, devsim::scenario_load("stepTest"), 0.1), bench::ScenarioMismatch);
  EXPECT_THROW(bench::load_follow_report({t.data(), 1}, devsim::scenario_load("table3"), 0.1), bench::EmptyWindow);
}

TEST(Transients, WindowsCoverDryerBursts) {
  const auto sc = devsim::scenario_load("table3");
  const auto w = bench::fast_transient_windows(sc.house, 5.0, 10.0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(w[0].begin, 80 * 60.0, 1e-9);
  EXPECT_LE(w[0].end, (80 + 72) * 60.0 + 10.0 + 1e-9);
  EXPECT_GT(w[0].end, (80 + 71) * 60.0);
}

TEST(Reports, RenderFormats) {
  EXPECT_EQ(bench::parse_format("csv"), bench::Format::Csv);
  EXPECT_THROW(bench::parse_format("xml"), std::invalid_argument);
  bench::TestReport rep;
  rep.kind = "step";
  rep.scenario = "stepTest";
  bench::StepRow r;
  r.setpoint_kw = 2;
  r.achieved_kw = 2;
  r.response_time_s = 5.6;
  rep.rows = {r};
  const auto json_text = bench::render(rep, bench::Format::Json);
  const auto j = nlohmann::json::parse(json_text);
  EXPECT_EQ(j["rows"].size(), 1u);
  EXPECT_NE(bench::render(rep, bench::Format::Csv).find("5.6"), std::string::npos);
}

TEST(Reports, RenderingIsDeterministic) {
  const auto trace = engine::read_trace(V2H_SOURCE_DIR "/data/golden/table3_load_follow.csv");
  const auto sc = devsim::scenario_load("table3");
  for (auto f : {bench::Format::Text, bench::Format::Csv, bench::Format::Json}) {
    EXPECT_EQ(bench::render(bench::load_follow_report(trace, sc, 0.1), f),
              bench::render(bench::load_follow_report(trace, sc, 0.1), f));
  }
}

namespace {

double first_leg_time(const std::vector<double>& setpoints, double ramp, double noise) {
  auto sc = devsim::scenario_load("stepTest");
  sc.charger.ramp_kw_per_s = ramp;
  sc.charger.noise_sigma_kw = noise;
  bench::StepPlan plan;
  plan.setpoints = setpoints;
  plan.trials = 1;
  const auto rep = bench::run_step_test(plan, sc);
  return rep.rows.at(1).response_time_s;
}

}  // namespace

TEST(ResponseTime, NonIncreasingInRamp) {
  double prev = std::numeric_limits<double>::infinity();
  for (double ramp : {2.0, 4.0, 8.0}) {
    const double t = first_leg_time({6, -6}, ramp, 0.0);
    EXPECT_LE(t, prev) << "ramp " << ramp;
    prev = t;
  }
}

TEST(ResponseTime, SmallStepAndFullLeg) {
  const auto sc = devsim::scenario_load("stepTest");
  const double small = first_leg_time({6, 5}, sc.charger.ramp_kw_per_s, sc.charger.noise_sigma_kw);
  EXPECT_GE(small, 5.5);
  EXPECT_LE(small, 6.0);

  bench::StepPlan legs;
  legs.setpoints = {6, -6};
  legs.trials = 1;
  const auto rep = bench::run_sweep_test(legs, devsim::scenario_load("sweepTest"));
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_GE(rep.rows[0].response_time_s, 8.4);
  EXPECT_LE(rep.rows[0].response_time_s, 8.8);
}

TEST(Determinism, SameSeedSameTrace) { EXPECT_TRUE(v2h::testing::deterministic_traces()); }

TEST(Checks, StepChecksFlagBadRows) {
  bench::TestReport rep;
  bench::StepRow first;
  first.first = true;
  first.setpoint_kw = 7;
  first.response_time_s = 109.4;
  first.achieved_kw = 6.375;
  first.error = 8.93;
  bench::StepRow slow = first;
  slow.first = false;
  slow.setpoint_kw = 3;
  slow.achieved_kw = 3;
  slow.error = 0.1;
  slow.response_time_s = 9.0;
  rep.rows = {first, slow};
  const auto checks = bench::step_checks(rep);
  EXPECT_FALSE(bench::all_pass(checks));
  EXPECT_NE(bench::render(checks).find("FAIL step responses"), std::string::npos);
}
