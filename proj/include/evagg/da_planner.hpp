#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evagg/fleet.hpp"
#include "evagg/market_data.hpp"
#include "evagg/optim.hpp"

namespace evagg {

struct PlannerParams {
  double fixed_reward = 1000.0;  // $ per day
  double lambda = 0.05;          // energy margin as a fraction of fleet capacity
  double eta_c = 0.95;
  double eta_d = 0.95;
  double activation_threshold = 0.0;  // $
  MilpOptions milp;

  void validate() const;
};

/// Expected market conditions keyed by hour of day. perf_score holds the
/// expected performance score.
class HourlyEstimate {
 public:
  HourlyEstimate() = default;
  explicit HourlyEstimate(std::span<const MarketHour> hours);

  const MarketHour& at(int hour) const;
  bool covers(int first, int last) const;

 private:
  std::vector<MarketHour> by_hour_ = std::vector<MarketHour>(24);
  std::vector<bool> present_ = std::vector<bool>(24, false);
};

struct HourPlan {
  int hour = 0;
  double p_ch = 0.0;    // energy market charge offer, MW
  double p_dis = 0.0;   // energy market discharge offer, MW
  double p_reg = 0.0;   // regulation offer, MW
  int delta = 0;        // 1 when charging is allowed
  double agg_ch = 0.0;  // total charging power including regulation, MW
  double agg_dis = 0.0;
  double energy = 0.0;     // fleet energy at the end of the hour, MWh
  double departure = 0.0;  // energy handed to EVs leaving at the start of the hour, MWh
};

struct HourVars {
  int hour = 0;
  std::size_t p_ch, p_dis, p_reg, delta, agg_ch, agg_dis, energy, departure;
};

/// Where a model starts: the first modelled hour, the energy held at the end
/// of the hour before, and the energy committed to EVs leaving at the first hour.
struct ModelStart {
  int hour = 7;
  double energy = 0.0;
  double departure = 0.0;
};

/// Bidding model over consecutive hours with index bookkeeping.
struct AggregatorModel {
  LinearProgram lp;
  std::vector<HourVars> hours;
  std::size_t final_departure = 0;  // departure energy of the hour after the last

  std::vector<HourPlan> schedule(const LpSolution& solution) const;
  double credit_energy(const LpSolution& solution, const HourlyEstimate& estimates) const;
  double credit_regulation(const LpSolution& solution, const HourlyEstimate& estimates) const;
};

AggregatorModel build_aggregator_model(const FleetProfile& fleet, const HourlyEstimate& estimates,
                                       const PlannerParams& params, const ModelStart& start);

LinearProgram build_da_subproblem(const FleetProfile& fleet, const HourlyEstimate& estimates,
                                  const PlannerParams& params);

struct DaPlan {
  bool activate = false;
  std::size_t interval = 1;  // one-based
  double incentive = 0.0;
  double fixed_reward = 0.0;
  double credit_energy = 0.0;
  double credit_regulation = 0.0;
  double profit = 0.0;
  std::vector<HourPlan> schedule;
  std::size_t solved = 0;      // intervals whose model was solved
  std::size_t infeasible = 0;  // intervals excluded as infeasible

  double credits() const { return credit_energy + credit_regulation; }
};

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Best incentive interval by expected profit; ties go to the lowest incentive.
DaPlan plan_day(const FleetResponse& fleet, const HourlyEstimate& estimates, const PlannerParams& params);

/// Plan for one given one-based interval, activated when profitable.
DaPlan plan_interval(const FleetResponse& fleet, std::size_t interval, const HourlyEstimate& estimates,
                     const PlannerParams& params);

/// Lower incentive endpoint of a one-based interval.
double incentive_from_interval(const FleetResponse& fleet, std::size_t interval);

void write_da_plan_csv(const DaPlan& plan, const std::filesystem::path& path);
DaPlan load_da_plan_csv(const std::filesystem::path& path);

}  // namespace evagg
