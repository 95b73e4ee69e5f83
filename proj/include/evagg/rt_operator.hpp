#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "evagg/da_planner.hpp"
#include "evagg/forecast.hpp"
#include "evagg/market_data.hpp"

namespace evagg {

/// Fleet energy entering hour `hour`: held at the end of the previous hour,
/// and the part of it committed to EVs leaving at the start of `hour`.
struct AggregatorState {
  int hour = 7;
  double energy = 0.0;
  double departure = 0.0;

  static AggregatorState initial(const FleetProfile& fleet);
};

/// How the bids for an hour were obtained.
enum class BidSource {
  model,          // bidding model as specified
  relaxed,        // bidding model without the energy margin
  charge_only     // no feasible model: charge what the next departures need
};

std::string_view to_string(BidSource s);

struct HourBid {
  int hour = 0;
  double p_ch = 0.0;
  double p_dis = 0.0;
  double p_reg = 0.0;
  BidSource source = BidSource::model;
  std::vector<HourPlan> plan;  // remaining hours as planned when bidding
};

struct HourSettlement {
  int hour = 0;
  double p_ch = 0.0;
  double p_dis = 0.0;
  double p_reg = 0.0;
  double regd_up = 0.0;  // actual
  double regd_down = 0.0;
  double provisional_energy = 0.0;
  double delta_p_reg = 0.0;  // nonperformance magnitude, MW
  bool clamped = false;      // nonperformance exceeded the regulation offer
  double rho = 1.0;
  double credit_energy = 0.0;
  double credit_regulation = 0.0;
  double energy = 0.0;          // fleet energy at the end of the hour
  double departure_next = 0.0;  // energy handed to EVs leaving next hour
  BidSource source = BidSource::model;
};

/// Bidding model for hours state.hour..last with the hour's own energy limits.
AggregatorModel build_rt_model(const AggregatorState& state, const FleetProfile& fleet,
                               const HourlyEstimate& estimates, const PlannerParams& params);

/// Solves the bidding model, falling back to a margin-free model and then to a
/// plain charging bid when no schedule exists.
HourBid make_bid(const AggregatorState& state, const FleetProfile& fleet, const HourlyEstimate& estimates,
                 const PlannerParams& params);

double performance_score(double p_reg, double delta_p);

HourSettlement settle_hour(const AggregatorState& state, const FleetProfile& fleet, const HourBid& bid,
                           const MarketHour& actual, const PlannerParams& params);

AggregatorState next_state(const HourSettlement& s);

/// Market estimates for the rest of a day, using only data before the first
/// hour requested.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual HourlyEstimate estimate(Hour first, Hour last) = 0;
};

/// Returns the realized market as its own forecast.
class OracleForecaster : public Forecaster {
 public:
  explicit OracleForecaster(const MarketSeries& actual) : actual_(actual) {}
  HourlyEstimate estimate(Hour first, Hour last) override;

 private:
  const MarketSeries& actual_;
};

/// Forecasts from a fitted model and the market history available so far.
class ModelForecaster : public Forecaster {
 public:
  ModelForecaster(const MarketForecaster& model, const MarketSeries& market) : model_(model), market_(market) {}
  HourlyEstimate estimate(Hour first, Hour last) override;

 private:
  const MarketForecaster& model_;
  const MarketSeries& market_;
};

struct DayResult {
  Date day{};
  std::vector<HourSettlement> hours;
  std::vector<HourBid> bids;
  double credit_energy = 0.0;
  double credit_regulation = 0.0;
  double reward = 0.0;  // fixed reward plus incentive
  double profit = 0.0;
  double mean_rho = 1.0;
  int fallback_hours = 0;
  int clamped_hours = 0;

  double credits() const { return credit_energy + credit_regulation; }
};

class OperationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hour-by-hour bidding and settlement of one operating day. `actual` must
/// cover the operating hours of `day`.
DayResult run_day(Date day, const FleetProfile& fleet, Forecaster& forecaster, const MarketSeries& actual,
                  const PlannerParams& params, double reward);

inline constexpr const char* kSettlementCsvHeader =
    "day,hour,p_ch,p_dis,p_reg,delta_p_reg,rho,credit_e,credit_r,e_agg,e_agg_dep_next";

void write_settlement_rows(std::ostream& out, const DayResult& day);
void write_settlement_csv(const std::vector<DayResult>& days, const std::filesystem::path& path);

}  // namespace evagg
