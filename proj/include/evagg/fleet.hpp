#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

namespace evagg {

/// Hours in which the aggregator bids; EVs leaving at last + 1 are still served.
struct OperatingHours {
  int first = 7;
  int last = 19;

  int count() const { return last - first + 1; }
  bool operator==(const OperatingHours&) const = default;
};

struct BehaviorDistribution {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct FleetParams {
  int n_ev = 200;
  double ev_power_kw = 50.0;
  double ev_capacity_kwh = 50.0;
  BehaviorDistribution arrival{8.5, 3.0, 6.0, 13.0};  // hour of day
  BehaviorDistribution departure{17.5, 3.0, 13.0, 20.0};
  BehaviorDistribution arrival_soc{75.0, 25.0, 25.0, 95.0};  // percent
  BehaviorDistribution departure_soc{90.0, 10.0, 60.0, 100.0};
  double incentive_max = 1500.0;  // $ per day for the whole fleet
  int steps_per_behavior = 3;
  std::uint64_t seed = 1;
  OperatingHours hours;

  void validate() const;
  double ev_power_mw() const { return ev_power_kw / 1000.0; }
  double ev_capacity_mwh() const { return ev_capacity_kwh / 1000.0; }
};

double sample_truncated_gaussian(double mu, double sigma, double lo, double hi, std::mt19937_64& rng);

/// Hours are the hour of day the event falls in; SOC is in whole percent.
struct EvBaseline {
  int arrival = 0;
  int departure = 0;
  double arrival_soc = 0.0;
  double departure_soc = 0.0;

  bool operator==(const EvBaseline&) const = default;
};

std::vector<EvBaseline> sample_fleet(const FleetParams& params, std::mt19937_64& rng);
std::vector<EvBaseline> sample_fleet(const FleetParams& params);

/// values[k] applies from thresholds[k-1] (0 for k = 0) up to the next threshold.
struct StepFunction {
  std::vector<double> thresholds;
  std::vector<double> values;

  double at(double incentive) const;
  bool operator==(const StepFunction&) const = default;
};

enum class Behavior { arrival, departure, arrival_soc, departure_soc };
inline constexpr std::array<Behavior, 4> kBehaviors = {Behavior::arrival, Behavior::departure,
                                                       Behavior::arrival_soc, Behavior::departure_soc};

struct EvResponse {
  std::array<StepFunction, 4> steps;

  const StepFunction& of(Behavior b) const { return steps[static_cast<std::size_t>(b)]; }
  EvBaseline at(double incentive) const;
  bool operator==(const EvResponse&) const = default;
};

std::vector<EvResponse> build_response_functions(const std::vector<EvBaseline>& baselines, const FleetParams& params,
                                                 std::mt19937_64& rng);

/// Per-hour fleet quantities at one incentive level, indexed from hours.first
/// through hours.last + 1. Energies in MWh.
struct FleetProfile {
  OperatingHours hours;
  double ev_power_mw = 0.0;
  double ev_capacity_mwh = 0.0;
  std::vector<int> arrivals;        // newly available at the hour
  std::vector<int> departures;      // leaving at the start of the hour
  std::vector<int> present;
  std::vector<double> arrival_energy;
  std::vector<double> departure_energy;  // desired

  std::size_t index(int hour) const;
  int n_arrive(int hour) const { return arrivals[index(hour)]; }
  int n_depart(int hour) const { return departures[index(hour)]; }
  int n_present(int hour) const { return present[index(hour)]; }
  double e_arrive(int hour) const { return arrival_energy[index(hour)]; }
  double e_depart(int hour) const { return departure_energy[index(hour)]; }
  double max_power(int hour) const { return n_present(hour) * ev_power_mw; }
  double max_energy(int hour) const { return n_present(hour) * ev_capacity_mwh; }

  bool operator==(const FleetProfile&) const = default;
};

/// Per-hour profile of the given behaviours.
FleetProfile profile_of(const std::vector<EvBaseline>& evs, const FleetParams& params);

struct FleetResponse {
  FleetParams params;
  std::vector<double> breakpoints;         // strictly increasing, all > 0
  std::vector<FleetProfile> intervals;     // breakpoints.size() + 1 entries

  std::size_t interval_count() const { return intervals.size(); }
  /// Zero-based interval containing the incentive.
  std::size_t interval_of(double incentive) const;
  /// Lowest incentive of the zero-based interval.
  double lower_incentive(std::size_t interval) const;
};

FleetResponse aggregate_fleet(const std::vector<EvResponse>& responses, const FleetParams& params);
const FleetProfile& evaluate_at_incentive(const FleetResponse& fleet, double incentive);

/// Samples baselines and responses with params.seed and aggregates them.
struct Fleet {
  FleetParams params;
  std::vector<EvBaseline> baselines;
  std::vector<EvResponse> responses;
  FleetResponse response;
};

Fleet generate_fleet(const FleetParams& params);

void write_fleet_csv(const std::vector<EvResponse>& responses, const std::filesystem::path& path);
std::vector<EvResponse> load_fleet_csv(const std::filesystem::path& path);

}  // namespace evagg
