#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evagg/da_planner.hpp"
#include "evagg/fleet.hpp"
#include "evagg/forecast.hpp"
#include "evagg/market_data.hpp"
#include "evagg/rt_operator.hpp"

namespace evagg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ForecastMode {
  rolling,  // refit every operating day on the most recent window
  frozen,   // fit once before the first operating day
  oracle    // realized market data as forecasts
};

std::string_view to_string(ForecastMode m);

struct CampaignConfig {
  std::optional<std::filesystem::path> market_csv;  // synthetic market when empty
  SynthConfig synthetic;
  std::uint64_t market_seed = 1;

  FleetParams fleet;
  PlannerParams planner;
  ForecastConfig forecast;
  ForecastMode mode = ForecastMode::rolling;

  Date first_day = parse_date("2018-01-15");
  Date last_day = parse_date("2018-02-28");
  int training_days = 14;
  std::vector<Date> holidays;
  bool base_case = false;  // activate every day with no incentive and no energy margin

  std::filesystem::path output_dir = "out";

  void validate() const;
};

/// INI-style file: `[section]` headers, `key = value` lines, `#` or `;` comments.
/// Relative paths inside the file resolve against the file's directory.
CampaignConfig load_campaign_config(const std::filesystem::path& path);

/// One date per line as `YYYY-MM-DD`; blank lines and `#` comments are ignored.
std::vector<Date> load_holidays(const std::filesystem::path& path);

/// Working days in the campaign range.
std::vector<Date> operating_days(const CampaignConfig& config);

/// Hour at which the plan for `day` is made and the incentive broadcast.
Hour broadcast_hour(Date day);

inline constexpr int kPlanningHorizon = 27;

MarketSeries load_campaign_market(const CampaignConfig& config);

/// Forecasts shared by the plan for a day and its real-time operation.
class DayForecasts {
 public:
  DayForecasts(const CampaignConfig& config, const MarketSeries& market, Date day,
               std::shared_ptr<const MarketForecaster> frozen = nullptr);

  /// Estimates for the operating hours of the day, as known at the broadcast hour.
  HourlyEstimate planning_estimate() const;
  Forecaster& real_time() { return *rt_; }

 private:
  const CampaignConfig& config_;
  const MarketSeries& market_;
  Date day_;
  std::shared_ptr<const MarketForecaster> model_;
  std::unique_ptr<Forecaster> rt_;
};

std::shared_ptr<const MarketForecaster> fit_forecaster(const CampaignConfig& config, const MarketSeries& market,
                                                       Hour cutoff);

/// Plan for a day under the campaign rules; base-case mode forces the first interval.
DaPlan plan_campaign_day(const CampaignConfig& config, const FleetResponse& fleet, const HourlyEstimate& estimate);

struct DayRow {
  Date day{};
  bool activated = false;
  std::size_t interval = 0;  // 0 when no interval was feasible
  double incentive = 0.0;
  double expected_profit = 0.0;
  double credit_energy = 0.0;
  double credit_regulation = 0.0;
  double ev_reward = 0.0;
  double aggregator_profit = 0.0;
  double mean_rho = 0.0;
  int fallback_hours = 0;
  int clamped_hours = 0;
  std::string note;
};

struct CampaignSummary {
  std::size_t operating_days = 0;
  std::size_t activated_days = 0;
  // Means over activated days.
  double credit_energy = 0.0;
  double credit_regulation = 0.0;
  double credits = 0.0;
  double ev_reward = 0.0;
  double aggregator_profit = 0.0;
  double mean_rho = 0.0;
};

struct CampaignReport {
  std::vector<DayRow> days;
  std::vector<DaPlan> plans;          // one per operating day
  std::vector<DayResult> operations;  // one per activated day

  CampaignSummary summary() const;
};

CampaignReport run_backtest(const CampaignConfig& config);

/// Runs one activated day of a campaign from its plan.
DayResult replay_day(const CampaignConfig& config, const MarketSeries& market, const FleetResponse& fleet,
                     const DaPlan& plan, Date day);

/// Writes report.csv, hourly_offers.csv, performance.csv, settlements.csv and
/// plans/<date>.csv for every day with a feasible plan.
void emit_report(const CampaignReport& report, const std::filesystem::path& dir);

}  // namespace evagg
