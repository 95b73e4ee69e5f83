#pragma once

// Small random planning instances and an exhaustive reference planner.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "evagg/da_planner.hpp"

namespace evagg::testing {

struct ToyInstance {
  FleetParams fleet_params;
  std::vector<EvResponse> responses;
  FleetResponse fleet;
  HourlyEstimate estimates;
  PlannerParams planner;
};

inline std::vector<MarketHour> flat_day(Date day, double lmp, double rmccp, double rmpcp, double beta, double up,
                                        double down, double rho = 1.0) {
  std::vector<MarketHour> out;
  for (int h = 0; h < 24; ++h) {
    MarketHour m;
    m.timestamp = make_hour(day, h);
    m.lmp = lmp;
    m.rmccp = rmccp;
    m.rmpcp = rmpcp;
    m.mileage_ratio = beta;
    m.regd_up = up;
    m.regd_down = down;
    m.perf_score = rho;
    out.push_back(m);
  }
  return out;
}

/// At most 3 EVs, 4 operating hours and 4 incentive intervals.
inline ToyInstance random_toy(std::mt19937_64& rng) {
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  ToyInstance t;
  const int hours = pick(1, 4);
  auto& fp = t.fleet_params;
  fp.hours = {7, 6 + hours};
  const int last = fp.hours.last;
  fp.n_ev = pick(1, 3);
  fp.arrival = {6, 0, 6, static_cast<double>(std::max(6, last - 1))};
  fp.departure = {8, 0, 8, static_cast<double>(last + 1)};
  fp.incentive_max = 100.0;

  std::vector<double> pool;
  const int n_thresholds = pick(0, 3);
  for (int k = 0; k < n_thresholds; ++k) pool.push_back(std::round(uni(1.0, 100.0)));
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  for (int i = 0; i < fp.n_ev; ++i) {
    const int a = pick(6, std::max(6, last - 1));
    const int d = pick(std::max(a + 2, 8), last + 1);
    const double sa = pick(25, 95);
    const double sd = pick(60, 100);
    EvResponse r;
    r.steps[0] = {{}, {static_cast<double>(a)}};
    r.steps[1] = {{}, {static_cast<double>(d)}};
    r.steps[2] = {{}, {sa}};
    r.steps[3] = {{}, {sd}};
    if (!pool.empty()) {
      auto step = [&](StepFunction& f, double target) {
        if (target == f.values[0] || pick(0, 1) == 0) return;
        f.thresholds.push_back(pool[static_cast<std::size_t>(pick(0, static_cast<int>(pool.size()) - 1))]);
        f.values.push_back(target);
      };
      step(r.steps[0], std::max(6, a - 1));
      step(r.steps[1], std::min(last + 1, d + 1));
      step(r.steps[2], std::round((sa + 25.0) / 2.0));
      step(r.steps[3], std::round((sd + 60.0) / 2.0));
    }
    t.responses.push_back(r);
  }
  t.fleet = aggregate_fleet(t.responses, fp);

  std::vector<MarketHour> day;
  for (int h = 0; h < 24; ++h) {
    MarketHour m;
    m.timestamp = make_hour(Date{std::chrono::days{17600}}, h);
    m.lmp = uni(-5.0, 60.0);
    m.rmccp = uni(0.0, 60.0);
    m.rmpcp = uni(0.0, 10.0);
    m.mileage_ratio = uni(0.0, 4.0);
    m.regd_up = uni(0.0, 0.5);
    m.regd_down = uni(0.0, 0.5);
    m.perf_score = uni(0.8, 1.0);
    day.push_back(m);
  }
  t.estimates = HourlyEstimate(day);
  t.planner.fixed_reward = uni(0.0, 20.0);
  t.planner.lambda = pick(0, 1) ? 0.05 : 0.0;
  return t;
}

struct BruteForceResult {
  bool feasible = false;
  double profit = -std::numeric_limits<double>::infinity();
  std::size_t interval = 0;
};

/// Every interval, every charge/discharge pattern, one LP each.
inline BruteForceResult brute_force_plan(const ToyInstance& t) {
  BruteForceResult best;
  for (std::size_t w = 1; w <= t.fleet.interval_count(); ++w) {
    const double incentive = w == 1 ? 0.0 : t.fleet.breakpoints[w - 2];
    LinearProgram lp = build_da_subproblem(t.fleet.intervals[w - 1], t.estimates, t.planner);
    std::vector<std::size_t> bins;
    for (std::size_t j = 0; j < lp.variable_count(); ++j)
      if (lp.variable(j).binary) bins.push_back(j);
    for (std::size_t mask = 0; mask < (std::size_t{1} << bins.size()); ++mask) {
      for (std::size_t b = 0; b < bins.size(); ++b) {
        const double v = (mask >> b) & 1u ? 1.0 : 0.0;
        lp.set_bounds(bins[b], v, v);
      }
      const LpSolution s = solve_lp(lp);
      if (!s.optimal()) continue;
      const double profit = s.objective - t.planner.fixed_reward - incentive;
      if (!best.feasible || profit > best.profit + 1e-9) {
        best.feasible = true;
        best.profit = profit;
        best.interval = w;
      }
    }
  }
  return best;
}

}  // namespace evagg::testing
