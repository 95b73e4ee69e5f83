#include <fmt/format.h>

#include <filesystem>
#include <random>

#include "doctest.h"
#include "evagg/da_planner.hpp"
#include "toy_instances.hpp"

using namespace evagg;
using evagg::testing::flat_day;

namespace {

const Date kDay = parse_date("2018-03-05");

// n EVs present for the whole operating day.
FleetResponse whole_day_fleet(int n, double arrival_soc, double departure_soc) {
  FleetParams p;
  p.n_ev = n;
  std::vector<EvResponse> rs(static_cast<std::size_t>(n));
  for (auto& r : rs) {
    r.steps[0] = {{}, {6.0}};
    r.steps[1] = {{}, {20.0}};
    r.steps[2] = {{}, {arrival_soc}};
    r.steps[3] = {{}, {departure_soc}};
  }
  return aggregate_fleet(rs, p);
}

// Hand-rolled energy replay of a schedule.
void check_trajectory(const DaPlan& plan, const FleetProfile& fleet, const HourlyEstimate& est,
                      const PlannerParams& params) {
  double e = 0.0;
  for (std::size_t i = 0; i < plan.schedule.size(); ++i) {
    const auto& h = plan.schedule[i];
    const auto& m = est.at(h.hour);
    CHECK(h.p_ch * h.p_dis == doctest::Approx(0.0).epsilon(1e-12));
    e = e - h.departure + fleet.e_arrive(h.hour) + (h.p_ch + h.p_reg * m.regd_down) * params.eta_c -
        (h.p_dis + h.p_reg * m.regd_up) / params.eta_d;
    CHECK(std::abs(e - h.energy) <= 1e-6);
    const double emax = fleet.max_energy(h.hour);
    const double next_departure = i + 1 < plan.schedule.size() ? plan.schedule[i + 1].departure : 0.0;
    CHECK(h.energy >= fleet.e_depart(h.hour + 1) + params.lambda * emax - 1e-6);
    CHECK(h.energy <= (1 - params.lambda) * emax + 1e-6);
    CHECK(h.energy >= next_departure - 1e-6);
    CHECK(h.departure >= fleet.e_depart(h.hour) - 1e-9);
    CHECK(h.departure <= fleet.n_depart(h.hour) * fleet.ev_capacity_mwh + 1e-9);
    CHECK(h.p_reg + std::max(h.p_ch, h.p_dis) <= fleet.max_power(h.hour) + 1e-9);
  }
}

}  // namespace

TEST_CASE("one EV present all day sets power and energy limits") {
  const auto fleet = whole_day_fleet(1, 50, 50);
  const HourlyEstimate est(flat_day(kDay, 30, 20, 1, 2, 0.2, 0.2));
  PlannerParams p;
  p.lambda = 0.0;
  const auto lp = build_da_subproblem(fleet.intervals[0], est, p);
  for (int h = 7; h <= 19; ++h) {
    for (const char* name : {"p_ch", "p_dis", "p_reg"}) {
      const auto& v = lp.variable(*lp.find(fmt::format("{}[{}]", name, h)));
      CHECK(v.upper == doctest::Approx(0.05));
    }
    CHECK(lp.variable(*lp.find(fmt::format("energy[{}]", h))).upper == doctest::Approx(0.05));
  }
  CHECK(lp.binary_count() == 13);
  CHECK(lp.variable_count() == 13 * 8 + 1);
  CHECK(lp.constraint_count() == 13 * 11);
}

TEST_CASE("constraint tally for a two hour toy") {
  FleetParams fp;
  fp.hours = {7, 8};
  fp.n_ev = 1;
  fp.arrival = {6, 0, 6, 7};
  fp.departure = {8, 0, 8, 9};
  EvResponse r;
  r.steps[0] = {{}, {6.0}};
  r.steps[1] = {{}, {9.0}};
  r.steps[2] = {{}, {40.0}};
  r.steps[3] = {{}, {80.0}};
  const auto fleet = aggregate_fleet({r}, fp);
  const HourlyEstimate est(flat_day(kDay, 30, 20, 1, 2, 0.2, 0.2));
  const auto lp = build_da_subproblem(fleet.intervals[0], est, PlannerParams{});
  // Per hour: 2 gates, 2 shared-power limits, 2 aggregate power definitions,
  // the balance, reserve, handover, ceiling and residual rows.
  CHECK(lp.constraint_count() == 2 * 11);
  // Per hour: 3 offers, gate, 2 aggregate powers, energy, departure energy;
  // plus the departure energy of the hour after the last.
  CHECK(lp.variable_count() == 2 * 8 + 1);
  CHECK(lp.binary_count() == 2);
  std::size_t equalities = 0;
  for (const auto& c : lp.constraints()) equalities += c.relation == Relation::equal;
  CHECK(equalities == 2 * 3);
  const auto& last_dep = lp.variable(*lp.find("departure[9]"));
  CHECK(last_dep.lower == doctest::Approx(0.04));
  CHECK(last_dep.upper == doctest::Approx(0.05));
}

TEST_CASE("an empty interval plans nothing") {
  FleetParams p;
  p.n_ev = 0;
  const auto fleet = aggregate_fleet({}, p);
  const HourlyEstimate est(flat_day(kDay, 30, 20, 1, 2, 0.2, 0.2));
  const auto plan = plan_interval(fleet, 1, est, PlannerParams{});
  CHECK(plan.credits() == 0.0);
  for (const auto& h : plan.schedule) {
    CHECK(h.p_ch == 0.0);
    CHECK(h.p_dis == 0.0);
    CHECK(h.p_reg == 0.0);
    CHECK(h.energy == 0.0);
  }
}

TEST_CASE("zero prices never activate") {
  FleetParams fp;
  fp.n_ev = 40;
  fp.seed = 3;
  const auto fleet = generate_fleet(fp);
  const HourlyEstimate est(flat_day(kDay, 0, 0, 0, 0, 0.2, 0.2));
  const auto plan = plan_day(fleet.response, est, PlannerParams{});
  CHECK(plan.profit == doctest::Approx(-1000.0));
  CHECK(plan.incentive == 0.0);
  CHECK(plan.interval == 1);
  CHECK_FALSE(plan.activate);
}

TEST_CASE("flat regulation price earns the full fleet capacity") {
  const auto fleet = whole_day_fleet(200, 50, 50);
  PlannerParams p;
  p.lambda = 0.0;
  SUBCASE("no regulation movement") {
    const HourlyEstimate est(flat_day(kDay, 0, 50, 0, 1, 0.0, 0.0));
    const auto plan = plan_day(fleet, est, p);
    for (const auto& h : plan.schedule) CHECK(h.p_reg == doctest::Approx(10.0));
    CHECK(plan.credit_regulation == doctest::Approx(6500.0));
    CHECK(plan.profit == doctest::Approx(5500.0));
    CHECK(plan.activate);
  }
  SUBCASE("lossless symmetric movement") {
    p.eta_c = p.eta_d = 1.0;
    const HourlyEstimate est(flat_day(kDay, 0, 50, 0, 1, 0.3, 0.3));
    const auto plan = plan_day(fleet, est, p);
    for (const auto& h : plan.schedule) CHECK(h.p_reg == doctest::Approx(10.0));
    CHECK(plan.credit_regulation == doctest::Approx(6500.0));
    CHECK(plan.profit == doctest::Approx(5500.0));
  }
}

TEST_CASE("an extra EV-hour is bought only when it pays") {
  FleetParams fp;
  fp.hours = {7, 8};
  fp.n_ev = 1;
  fp.arrival = {6, 0, 6, 7};
  fp.departure = {8, 0, 8, 9};
  fp.incentive_max = 100.0;
  const HourlyEstimate est(flat_day(kDay, 0, 50, 0, 1, 0.0, 0.0));
  PlannerParams p;
  p.fixed_reward = 0.0;
  p.lambda = 0.0;
  auto make = [&](double threshold) {
    EvResponse r;
    r.steps[0] = {{}, {6.0}};
    r.steps[1] = {{threshold}, {8.0, 9.0}};
    r.steps[2] = {{}, {60.0}};
    r.steps[3] = {{}, {60.0}};
    return aggregate_fleet({r}, fp);
  };
  // One more hour of 0.05 MW at $50/MW-h is worth $2.50.
  const auto costly = make(10.0);
  const auto plan1 = plan_day(costly, est, p);
  CHECK(plan1.interval == 1);
  CHECK(plan1.profit == doctest::Approx(2.5));
  const auto cheap = make(1.0);
  const auto plan2 = plan_day(cheap, est, p);
  CHECK(plan2.interval == 2);
  CHECK(plan2.incentive == 1.0);
  CHECK(plan2.profit == doctest::Approx(4.0));
}

TEST_CASE("interval incentives") {
  FleetParams fp;
  fp.n_ev = 20;
  const auto fleet = generate_fleet(fp);
  const auto& fr = fleet.response;
  CHECK(incentive_from_interval(fr, 1) == 0.0);
  CHECK(incentive_from_interval(fr, fr.interval_count()) == fr.breakpoints.back());
  CHECK_THROWS_AS(incentive_from_interval(fr, 0), std::invalid_argument);
  CHECK_THROWS_AS(incentive_from_interval(fr, fr.interval_count() + 1), std::invalid_argument);
  for (std::size_t w = 1; w <= fr.interval_count(); ++w)
    CHECK(evaluate_at_incentive(fr, incentive_from_interval(fr, w)) == fr.intervals[w - 1]);
}

TEST_CASE("plan_day matches exhaustive enumeration on toy instances") {
  std::mt19937_64 rng(2024);
  int feasible = 0;
  for (int i = 0; i < 60; ++i) {
    const auto toy = evagg::testing::random_toy(rng);
    CHECK(toy.fleet.interval_count() <= 4);
    const auto oracle = evagg::testing::brute_force_plan(toy);
    if (!oracle.feasible) {
      CHECK_THROWS_AS(plan_day(toy.fleet, toy.estimates, toy.planner), PlanningError);
      continue;
    }
    ++feasible;
    const auto plan = plan_day(toy.fleet, toy.estimates, toy.planner);
    CHECK(std::abs(plan.profit - oracle.profit) <= 1e-6);
    check_trajectory(plan, toy.fleet.intervals[plan.interval - 1], toy.estimates, toy.planner);
  }
  CHECK(feasible >= 40);
}

TEST_CASE("schedules replay and never charge and discharge together") {
  SynthConfig sc;
  sc.hours = 24 * 3;
  const auto market = generate_synthetic_market(sc, 4);
  FleetParams fp;
  fp.n_ev = 60;
  fp.seed = 8;
  const auto fleet = generate_fleet(fp);
  for (int d = 0; d < 3; ++d) {
    const Date day = sc.start + std::chrono::days{d};
    const auto slice = market.between(make_hour(day, 0), make_hour(day, 23));
    const HourlyEstimate est(slice.hours());
    PlannerParams p;
    const auto plan = plan_day(fleet.response, est, p);
    REQUIRE(plan.schedule.size() == 13);
    check_trajectory(plan, fleet.response.intervals[plan.interval - 1], est, p);
    CHECK(plan.profit == doctest::Approx(plan.credits() - p.fixed_reward - plan.incentive));
  }
}

TEST_CASE("higher regulation prices never lower the profit") {
  SynthConfig sc;
  sc.hours = 48;
  const auto market = generate_synthetic_market(sc, 9);
  FleetParams fp;
  fp.n_ev = 30;
  fp.seed = 2;
  const auto fleet = generate_fleet(fp);
  std::vector<MarketHour> hours(market.hours().begin(), market.hours().begin() + 24);
  double prev = -std::numeric_limits<double>::infinity();
  for (double k : {1.0, 1.25, 2.0, 4.0}) {
    auto scaled = hours;
    for (auto& h : scaled) h.rmccp *= k;
    const auto plan = plan_day(fleet.response, HourlyEstimate(scaled), PlannerParams{});
    CHECK(plan.profit >= prev - 1e-9);
    prev = plan.profit;
  }
}

TEST_CASE("plan csv round trip") {
  const auto fleet = whole_day_fleet(10, 50, 60);
  const HourlyEstimate est(flat_day(kDay, 20, 30, 2, 2, 0.2, 0.25));
  const auto plan = plan_day(fleet, est, PlannerParams{});
  const auto dir = std::filesystem::temp_directory_path() / "evagg_test_plan";
  std::filesystem::create_directories(dir);
  write_da_plan_csv(plan, dir / "plan.csv");
  const auto back = load_da_plan_csv(dir / "plan.csv");
  CHECK(back.activate == plan.activate);
  CHECK(back.interval == plan.interval);
  CHECK(back.profit == plan.profit);
  CHECK(back.credit_regulation == plan.credit_regulation);
  REQUIRE(back.schedule.size() == 13);
  for (std::size_t i = 0; i < 13; ++i) {
    CHECK(back.schedule[i].hour == plan.schedule[i].hour);
    CHECK(back.schedule[i].p_reg == plan.schedule[i].p_reg);
    CHECK(back.schedule[i].energy == plan.schedule[i].energy);
  }
}
