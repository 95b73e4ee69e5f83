#include "evagg/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

namespace evagg {

namespace {

void check_distribution(const BehaviorDistribution& d, const char* name) {
  if (!(d.min <= d.mean && d.mean <= d.max))
    throw std::invalid_argument(fmt::format("{}: need min <= mean <= max", name));
  if (!(d.std >= 0.0)) throw std::invalid_argument(fmt::format("{}: negative std", name));
}

int hour_floor(double v) { return static_cast<int>(std::floor(v)); }

double percent(double v) { return std::round(v); }

}  // namespace

void FleetParams::validate() const {
  if (n_ev < 0) throw std::invalid_argument("n_ev must be non-negative");
  if (!(ev_power_kw > 0.0) || !(ev_capacity_kwh > 0.0))
    throw std::invalid_argument("EV power and capacity must be positive");
  check_distribution(arrival, "arrival");
  check_distribution(departure, "departure");
  check_distribution(arrival_soc, "arrival_soc");
  check_distribution(departure_soc, "departure_soc");
  if (departure.min < arrival.min) throw std::invalid_argument("departure min earlier than arrival min");
  if (arrival_soc.min < 0.0 || arrival_soc.max > 100.0 || departure_soc.min < 0.0 || departure_soc.max > 100.0)
    throw std::invalid_argument("SOC bounds must lie in [0, 100]");
  if (!(incentive_max > 0.0)) throw std::invalid_argument("incentive_max must be positive");
  if (steps_per_behavior < 0) throw std::invalid_argument("steps_per_behavior must be non-negative");
  if (hours.first > hours.last || hours.first < 1 || hours.last > 22)
    throw std::invalid_argument("bad operating hours");
  if (hour_floor(arrival.min) < 0) throw std::invalid_argument("arrival before midnight");
  if (hour_floor(arrival.max) + 1 > hours.last)
    throw std::invalid_argument("latest arrival must be usable within the operating hours");
  if (hour_floor(departure.max) > hours.last + 1)
    throw std::invalid_argument("latest departure after the end of the operating hours");
  if (hour_floor(departure.min) < hours.first + 1)
    throw std::invalid_argument("earliest departure before the second operating hour");
  if (hour_floor(departure.max) < hour_floor(arrival.max) + 2)
    throw std::invalid_argument("departure range must allow leaving two hours after the latest arrival");
}

double sample_truncated_gaussian(double mu, double sigma, double lo, double hi, std::mt19937_64& rng) {
  if (lo > hi) throw std::invalid_argument("truncated gaussian: lo > hi");
  if (sigma < 0.0) throw std::invalid_argument("truncated gaussian: negative sigma");
  if (sigma == 0.0 || lo == hi) return std::clamp(mu, lo, hi);

  // Sample the side nearer the mean so the cdf difference keeps its precision.
  bool flip = (lo - mu) > 0.0;
  double a = (lo - mu) / sigma;
  double b = (hi - mu) / sigma;
  if (flip) {
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  const boost::math::normal_distribution<double> unit;
  const double fa = boost::math::cdf(unit, a);
  const double fb = boost::math::cdf(unit, b);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double z;
  if (fb - fa <= 0.0) {
    z = a;
  } else {
    const double p = std::clamp(fa + u01(rng) * (fb - fa), fa, fb);
    z = p <= 0.0 ? a : (p >= 1.0 ? b : boost::math::quantile(unit, p));
  }
  z = std::clamp(z, a, b);
  if (flip) z = -z;
  return std::clamp(mu + sigma * z, lo, hi);
}

std::vector<EvBaseline> sample_fleet(const FleetParams& params, std::mt19937_64& rng) {
  params.validate();
  std::vector<EvBaseline> out;
  out.reserve(static_cast<std::size_t>(params.n_ev));
  for (int i = 0; i < params.n_ev; ++i) {
    EvBaseline ev;
    const auto& a = params.arrival;
    ev.arrival = hour_floor(sample_truncated_gaussian(a.mean, a.std, a.min, a.max, rng));
    const auto& d = params.departure;
    const double earliest = std::max(d.min, static_cast<double>(ev.arrival + 2));
    ev.departure = std::max(hour_floor(sample_truncated_gaussian(d.mean, d.std, earliest, d.max, rng)), ev.arrival + 2);
    const auto& sa = params.arrival_soc;
    ev.arrival_soc = percent(sample_truncated_gaussian(sa.mean, sa.std, sa.min, sa.max, rng));
    const auto& sd = params.departure_soc;
    ev.departure_soc = percent(sample_truncated_gaussian(sd.mean, sd.std, sd.min, sd.max, rng));
    out.push_back(ev);
  }
  return out;
}

std::vector<EvBaseline> sample_fleet(const FleetParams& params) {
  std::mt19937_64 rng(params.seed);
  return sample_fleet(params, rng);
}

double StepFunction::at(double incentive) const {
  const auto k = std::upper_bound(thresholds.begin(), thresholds.end(), incentive) - thresholds.begin();
  return values[static_cast<std::size_t>(k)];
}

EvBaseline EvResponse::at(double incentive) const {
  return {static_cast<int>(of(Behavior::arrival).at(incentive)), static_cast<int>(of(Behavior::departure).at(incentive)),
          of(Behavior::arrival_soc).at(incentive), of(Behavior::departure_soc).at(incentive)};
}

namespace {

StepFunction make_steps(double baseline, std::vector<double> targets, std::vector<double> thresholds) {
  StepFunction f;
  f.values.push_back(baseline);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] == f.values.back()) continue;
    if (!f.thresholds.empty() && thresholds[k] == f.thresholds.back()) {
      f.values.back() = targets[k];
      continue;
    }
    f.thresholds.push_back(thresholds[k]);
    f.values.push_back(targets[k]);
  }
  return f;
}

}  // namespace

std::vector<EvResponse> build_response_functions(const std::vector<EvBaseline>& baselines, const FleetParams& params,
                                                 std::mt19937_64& rng) {
  params.validate();
  const int K = params.steps_per_behavior;
  std::uniform_real_distribution<double> u(0.0, params.incentive_max);
  auto draw = [&] {
    std::vector<double> t(static_cast<std::size_t>(K));
    for (double& v : t) v = params.incentive_max - u(rng);  // (0, incentive_max]
    std::sort(t.begin(), t.end());
    return t;
  };

  const int arrival_bound = hour_floor(params.arrival.min);
  const int departure_bound = hour_floor(params.departure.max);
  std::vector<EvResponse> out;
  out.reserve(baselines.size());
  for (const auto& ev : baselines) {
    EvResponse r;
    std::vector<double> arr, dep, soc_a, soc_d;
    for (int k = 1; k <= K; ++k) {
      arr.push_back(std::max(arrival_bound, std::min(ev.arrival, ev.arrival - k)));
      dep.push_back(std::min(departure_bound, std::max(ev.departure, ev.departure + k)));
      const double f = static_cast<double>(k) / K;
      soc_a.push_back(std::min(ev.arrival_soc,
                               percent(ev.arrival_soc - f * (ev.arrival_soc - params.arrival_soc.min))));
      soc_d.push_back(std::min(ev.departure_soc,
                               percent(ev.departure_soc - f * (ev.departure_soc - params.departure_soc.min))));
    }
    r.steps[0] = make_steps(ev.arrival, arr, draw());
    r.steps[1] = make_steps(ev.departure, dep, draw());
    r.steps[2] = make_steps(ev.arrival_soc, soc_a, draw());
    r.steps[3] = make_steps(ev.departure_soc, soc_d, draw());
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t FleetProfile::index(int hour) const {
  if (hour < hours.first || hour > hours.last + 1)
    throw std::out_of_range(fmt::format("hour {} outside fleet profile", hour));
  return static_cast<std::size_t>(hour - hours.first);
}

FleetProfile profile_of(const std::vector<EvBaseline>& evs, const FleetParams& params) {
  FleetProfile p;
  p.hours = params.hours;
  p.ev_power_mw = params.ev_power_mw();
  p.ev_capacity_mwh = params.ev_capacity_mwh();
  const auto n = static_cast<std::size_t>(params.hours.count() + 1);
  p.arrivals.assign(n, 0);
  p.departures.assign(n, 0);
  p.present.assign(n, 0);
  p.arrival_energy.assign(n, 0.0);
  p.departure_energy.assign(n, 0.0);
  const int end = params.hours.last + 1;
  for (const auto& ev : evs) {
    const int avail = std::clamp(ev.arrival + 1, params.hours.first, end);
    const int leave = std::clamp(ev.departure, avail, end);
    p.arrivals[p.index(avail)] += 1;
    p.arrival_energy[p.index(avail)] += ev.arrival_soc / 100.0 * p.ev_capacity_mwh;
    p.departures[p.index(leave)] += 1;
    p.departure_energy[p.index(leave)] += ev.departure_soc / 100.0 * p.ev_capacity_mwh;
  }
  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    count += p.arrivals[i] - p.departures[i];
    p.present[i] = count;
  }
  return p;
}

std::size_t FleetResponse::interval_of(double incentive) const {
  if (!(incentive >= 0.0 && incentive <= params.incentive_max))
    throw std::invalid_argument(fmt::format("incentive {} outside [0, {}]", incentive, params.incentive_max));
  return static_cast<std::size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), incentive) -
                                  breakpoints.begin());
}

double FleetResponse::lower_incentive(std::size_t interval) const {
  if (interval >= intervals.size())
    throw std::invalid_argument(fmt::format("interval {} out of range (have {})", interval, intervals.size()));
  return interval == 0 ? 0.0 : breakpoints[interval - 1];
}

FleetResponse aggregate_fleet(const std::vector<EvResponse>& responses, const FleetParams& params) {
  params.validate();
  FleetResponse out;
  out.params = params;
  for (const auto& r : responses)
    for (const auto& f : r.steps) out.breakpoints.insert(out.breakpoints.end(), f.thresholds.begin(), f.thresholds.end());
  std::sort(out.breakpoints.begin(), out.breakpoints.end());
  out.breakpoints.erase(std::unique(out.breakpoints.begin(), out.breakpoints.end()), out.breakpoints.end());
  if (!out.breakpoints.empty() && (out.breakpoints.front() <= 0.0 || out.breakpoints.back() > params.incentive_max))
    throw std::invalid_argument("response thresholds must lie in (0, incentive_max]");

  std::vector<EvBaseline> evs(responses.size());
  out.intervals.reserve(out.breakpoints.size() + 1);
  for (std::size_t w = 0; w <= out.breakpoints.size(); ++w) {
    const double pi = w == 0 ? 0.0 : out.breakpoints[w - 1];
    for (std::size_t i = 0; i < responses.size(); ++i) evs[i] = responses[i].at(pi);
    out.intervals.push_back(profile_of(evs, params));
  }
  return out;
}

const FleetProfile& evaluate_at_incentive(const FleetResponse& fleet, double incentive) {
  return fleet.intervals[fleet.interval_of(incentive)];
}

Fleet generate_fleet(const FleetParams& params) {
  Fleet f;
  f.params = params;
  std::mt19937_64 rng(params.seed);
  f.baselines = sample_fleet(params, rng);
  f.responses = build_response_functions(f.baselines, params, rng);
  f.response = aggregate_fleet(f.responses, params);
  return f;
}

namespace {

constexpr const char* kFleetHeader = "ev,arrival,departure,arrival_soc,departure_soc";

std::string encode_steps(const StepFunction& f) {
  std::string s;
  for (std::size_t k = 0; k < f.thresholds.size(); ++k) {
    if (k) s += ';';
    s += fmt::format("{:.17g}:{:.17g}", f.thresholds[k], f.values[k + 1]);
  }
  return s;
}

StepFunction decode_steps(double baseline, const std::string& text) {
  StepFunction f;
  f.values.push_back(baseline);
  if (text.empty()) return f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::runtime_error("bad step '" + item + "'");
    f.thresholds.push_back(std::stod(item.substr(0, colon)));
    f.values.push_back(std::stod(item.substr(colon + 1)));
  }
  if (!std::is_sorted(f.thresholds.begin(), f.thresholds.end()) ||
      std::adjacent_find(f.thresholds.begin(), f.thresholds.end()) != f.thresholds.end())
    throw std::runtime_error("step thresholds must be strictly increasing");
  return f;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void write_fleet_csv(const std::vector<EvResponse>& responses, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kFleetHeader << ",arrival_steps,departure_steps,arrival_soc_steps,departure_soc_steps\n";
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    out << i;
    for (const auto& f : r.steps) out << ',' << fmt::format("{:.17g}", f.values.front());
    for (const auto& f : r.steps) out << ',' << encode_steps(f);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<EvResponse> load_fleet_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind(kFleetHeader, 0) != 0) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<EvResponse> out;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 9) throw std::runtime_error(fmt::format("{}: row {}: expected 9 columns", path.string(), row));
    try {
      EvResponse r;
      for (std::size_t b = 0; b < 4; ++b) r.steps[b] = decode_steps(std::stod(cells[1 + b]), cells[5 + b]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}: row {}: {}", path.string(), row, e.what()));
    }
  }
  return out;
}

}  // namespace evagg
