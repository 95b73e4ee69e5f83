#include "evagg/rt_operator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace evagg {

namespace {

constexpr double kEnergyTol = 1e-9;  // MWh
constexpr double kFlatDenominator = 1e-9;

struct HourLimits {
  double start = 0.0;  // energy available once departures leave and arrivals join
  double lb_ch = 0.0, ub_ch = 0.0, lb_dis = 0.0, ub_dis = 0.0;
};

HourLimits hour_limits(const AggregatorState& state, const FleetProfile& fleet, const PlannerParams& params) {
  const int h = state.hour;
  const double emax = fleet.max_energy(h);
  HourLimits l;
  l.start = state.energy + fleet.e_arrive(h) - state.departure;
  const double need = fleet.e_depart(h + 1) + params.lambda * emax;
  const double ceiling = (1.0 - params.lambda) * emax;
  l.lb_ch = std::max(0.0, need - l.start) / params.eta_c;
  l.ub_dis = std::max(0.0, l.start - need) * params.eta_d;
  l.ub_ch = std::max(0.0, ceiling - l.start) / params.eta_c;
  l.lb_dis = std::max(0.0, l.start - ceiling) * params.eta_d;
  return l;
}

}  // namespace

AggregatorState AggregatorState::initial(const FleetProfile& fleet) {
  return {fleet.hours.first, 0.0, fleet.e_depart(fleet.hours.first)};
}

std::string_view to_string(BidSource s) {
  switch (s) {
    case BidSource::model:
      return "model";
    case BidSource::relaxed:
      return "relaxed";
    case BidSource::charge_only:
      return "charge_only";
  }
  return "?";
}

AggregatorModel build_rt_model(const AggregatorState& state, const FleetProfile& fleet,
                               const HourlyEstimate& estimates, const PlannerParams& params) {
  AggregatorModel m =
      build_aggregator_model(fleet, estimates, params, {state.hour, state.energy, state.departure});
  const HourLimits l = hour_limits(state, fleet, params);
  const HourVars& v = m.hours.front();
  const double pmax = fleet.max_power(state.hour);
  m.lp.set_bounds(v.p_ch, l.lb_ch, std::min(pmax, l.ub_ch));
  m.lp.set_bounds(v.p_dis, l.lb_dis, std::min(pmax, l.ub_dis));
  return m;
}

HourBid make_bid(const AggregatorState& state, const FleetProfile& fleet, const HourlyEstimate& estimates,
                 const PlannerParams& params) {
  HourBid bid;
  bid.hour = state.hour;
  for (BidSource source : {BidSource::model, BidSource::relaxed}) {
    PlannerParams p = params;
    if (source == BidSource::relaxed) p.lambda = 0.0;
    const AggregatorModel model = build_rt_model(state, fleet, estimates, p);
    LpSolution s;
    try {
      s = solve_milp(model.lp, p.milp);
    } catch (const NodeLimitError& e) {
      s = e.incumbent();
    }
    if (!s.optimal()) continue;
    bid.plan = model.schedule(s);
    bid.p_ch = bid.plan.front().p_ch;
    bid.p_dis = bid.plan.front().p_dis;
    bid.p_reg = bid.plan.front().p_reg;
    bid.source = source;
    return bid;
  }
  PlannerParams p = params;
  p.lambda = 0.0;
  const HourLimits l = hour_limits(state, fleet, p);
  const double pmax = fleet.max_power(state.hour);
  bid.p_ch = std::min(pmax, l.lb_ch);
  bid.p_dis = bid.p_ch > 0.0 ? 0.0 : std::min(pmax, l.lb_dis);
  bid.p_reg = 0.0;
  bid.source = BidSource::charge_only;
  return bid;
}

double performance_score(double p_reg, double delta_p) {
  if (p_reg < 0.0) throw std::invalid_argument("regulation offer must be non-negative");
  if (p_reg == 0.0) return 1.0;
  return std::clamp(1.0 - std::abs(delta_p) / p_reg, 0.0, 1.0);
}

HourSettlement settle_hour(const AggregatorState& state, const FleetProfile& fleet, const HourBid& bid,
                           const MarketHour& actual, const PlannerParams& params) {
  const int h = state.hour;
  HourSettlement s;
  s.hour = h;
  s.p_ch = bid.p_ch;
  s.p_dis = bid.p_dis;
  s.p_reg = bid.p_reg;
  s.source = bid.source;
  s.regd_up = actual.regd_up;
  s.regd_down = actual.regd_down;

  s.provisional_energy = state.energy - state.departure + fleet.e_arrive(h) +
                         (bid.p_ch + bid.p_reg * actual.regd_down) * params.eta_c -
                         (bid.p_dis + bid.p_reg * actual.regd_up) / params.eta_d;

  const double floor = fleet.e_depart(h + 1);
  const double emax = fleet.max_energy(h);
  double shortfall = 0.0;  // energy the regulation response must give back
  if (s.provisional_energy < floor - kEnergyTol) {
    shortfall = floor - s.provisional_energy;
    s.energy = floor;
  } else if (s.provisional_energy > emax + kEnergyTol) {
    shortfall = s.provisional_energy - emax;
    s.energy = emax;
  } else {
    s.energy = std::clamp(s.provisional_energy, 0.0, emax);
  }

  if (shortfall > 0.0 && bid.p_reg > 0.0) {
    const double denom = std::abs(actual.regd_down * params.eta_c - actual.regd_up / params.eta_d);
    if (denom >= kFlatDenominator) {
      s.delta_p_reg = shortfall / denom;
    } else {
      const double movement = std::max({actual.regd_up, actual.regd_down, kFlatDenominator});
      s.delta_p_reg = bid.p_reg * std::min(1.0, shortfall / (bid.p_reg * movement));
    }
  }
  if (shortfall > 0.0 && s.delta_p_reg > bid.p_reg) s.clamped = true;
  if (shortfall > 0.0 && bid.p_reg == 0.0) s.clamped = true;
  s.delta_p_reg = std::min(s.delta_p_reg, bid.p_reg);

  const double room = (fleet.n_present(h) - fleet.n_depart(h + 1)) * fleet.ev_capacity_mwh;
  if (s.energy - floor > room + kEnergyTol) {
    s.departure_next = floor + (s.energy - floor - room);
  } else {
    s.departure_next = floor;
  }

  s.rho = performance_score(bid.p_reg, s.delta_p_reg);
  s.credit_energy = (bid.p_dis - bid.p_ch) * actual.lmp;
  s.credit_regulation = bid.p_reg * (actual.rmccp + actual.rmpcp * actual.mileage_ratio) * s.rho;
  return s;
}

AggregatorState next_state(const HourSettlement& s) { return {s.hour + 1, s.energy, s.departure_next}; }

HourlyEstimate OracleForecaster::estimate(Hour first, Hour last) {
  const auto slice = actual_.between(first, last);
  return HourlyEstimate(slice.hours());
}

HourlyEstimate ModelForecaster::estimate(Hour first, Hour last) {
  const Hour cutoff = first - std::chrono::hours{1};
  if (!market_.index_of(cutoff)) throw OperationError("no market history before " + format_hour(first));
  const auto history = market_.between(market_.front().timestamp, cutoff);
  const int horizon = static_cast<int>((last - cutoff).count());
  const auto fc = model_.forecast(history, horizon);
  return HourlyEstimate(fc.hours);
}

DayResult run_day(Date day, const FleetProfile& fleet, Forecaster& forecaster, const MarketSeries& actual,
                  const PlannerParams& params, double reward) {
  params.validate();
  DayResult r;
  r.day = day;
  r.reward = reward;
  AggregatorState state = AggregatorState::initial(fleet);
  const Hour last = make_hour(day, fleet.hours.last);
  double rho_sum = 0.0;
  for (int tau = fleet.hours.first; tau <= fleet.hours.last; ++tau) {
    const Hour now = make_hour(day, tau);
    const auto row = actual.index_of(now);
    if (!row) throw OperationError("actual market data missing for " + format_hour(now));
    const HourlyEstimate est = forecaster.estimate(now, last);
    HourBid bid = make_bid(state, fleet, est, params);
    const HourSettlement s = settle_hour(state, fleet, bid, actual[*row], params);
    if (bid.source != BidSource::model) ++r.fallback_hours;
    if (s.clamped) ++r.clamped_hours;
    r.credit_energy += s.credit_energy;
    r.credit_regulation += s.credit_regulation;
    rho_sum += s.rho;
    r.hours.push_back(s);
    r.bids.push_back(std::move(bid));
    state = next_state(s);
  }
  r.mean_rho = r.hours.empty() ? 1.0 : rho_sum / static_cast<double>(r.hours.size());
  r.profit = r.credits() - reward;
  return r;
}

void write_settlement_rows(std::ostream& out, const DayResult& d) {
  for (const auto& s : d.hours)
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       format_date(d.day), s.hour, s.p_ch, s.p_dis, s.p_reg, s.delta_p_reg, s.rho, s.credit_energy,
                       s.credit_regulation, s.energy, s.departure_next);
}

void write_settlement_csv(const std::vector<DayResult>& days, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kSettlementCsvHeader << '\n';
  for (const auto& d : days) write_settlement_rows(out, d);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace evagg
