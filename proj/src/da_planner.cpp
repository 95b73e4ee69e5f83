#include "evagg/da_planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace evagg {

void PlannerParams::validate() const {
  if (!(lambda >= 0.0 && lambda < 0.5)) throw std::invalid_argument("lambda must lie in [0, 0.5)");
  if (!(eta_c > 0.0 && eta_c <= 1.0) || !(eta_d > 0.0 && eta_d <= 1.0))
    throw std::invalid_argument("efficiencies must lie in (0, 1]");
  if (!std::isfinite(fixed_reward) || !std::isfinite(activation_threshold))
    throw std::invalid_argument("rewards must be finite");
}

HourlyEstimate::HourlyEstimate(std::span<const MarketHour> hours) {
  for (const auto& h : hours) {
    const int hod = hour_of_day(h.timestamp);
    by_hour_[static_cast<std::size_t>(hod)] = h;
    present_[static_cast<std::size_t>(hod)] = true;
  }
}

const MarketHour& HourlyEstimate::at(int hour) const {
  if (hour < 0 || hour > 23 || !present_[static_cast<std::size_t>(hour)])
    throw std::out_of_range(fmt::format("no estimate for hour {}", hour));
  return by_hour_[static_cast<std::size_t>(hour)];
}

bool HourlyEstimate::covers(int first, int last) const {
  for (int h = first; h <= last; ++h)
    if (h < 0 || h > 23 || !present_[static_cast<std::size_t>(h)]) return false;
  return true;
}

namespace {

double regulation_price(const MarketHour& m) { return m.perf_score * (m.rmccp + m.rmpcp * m.mileage_ratio); }

std::string var_name(const char* base, int hour) { return fmt::format("{}[{}]", base, hour); }

}  // namespace

AggregatorModel build_aggregator_model(const FleetProfile& fleet, const HourlyEstimate& estimates,
                                       const PlannerParams& params, const ModelStart& start) {
  params.validate();
  const int first = start.hour;
  const int last = fleet.hours.last;
  if (first < fleet.hours.first || first > last)
    throw std::invalid_argument(fmt::format("model start hour {} outside operating hours", first));
  if (!estimates.covers(first, last))
    throw std::invalid_argument(fmt::format("estimates must cover hours {}..{}", first, last));

  const double cap = fleet.ev_capacity_mwh;
  const double lambda = params.lambda;
  AggregatorModel m;
  auto& lp = m.lp;

  for (int h = first; h <= last; ++h) {
    const MarketHour& est = estimates.at(h);
    const double pmax = fleet.max_power(h);
    HourVars v;
    v.hour = h;
    v.p_ch = lp.add_variable(var_name("p_ch", h), 0.0, pmax);
    v.p_dis = lp.add_variable(var_name("p_dis", h), 0.0, pmax);
    v.p_reg = lp.add_variable(var_name("p_reg", h), 0.0, pmax);
    v.delta = lp.add_binary(var_name("delta", h));
    v.agg_ch = lp.add_variable(var_name("agg_ch", h), 0.0, pmax * (1.0 + est.regd_down));
    v.agg_dis = lp.add_variable(var_name("agg_dis", h), 0.0, pmax * (1.0 + est.regd_up));
    v.energy = lp.add_variable(var_name("energy", h), 0.0, fleet.max_energy(h));
    if (h == first) {
      v.departure = lp.add_variable(var_name("departure", h), start.departure, start.departure);
    } else {
      v.departure = lp.add_variable(var_name("departure", h), fleet.e_depart(h), fleet.n_depart(h) * cap);
    }
    lp.set_objective(v.p_ch, -est.lmp);
    lp.set_objective(v.p_dis, est.lmp);
    lp.set_objective(v.p_reg, regulation_price(est));
    m.hours.push_back(v);
  }
  m.final_departure =
      lp.add_variable(var_name("departure", last + 1), fleet.e_depart(last + 1), fleet.n_depart(last + 1) * cap);

  using R = Relation;
  for (std::size_t i = 0; i < m.hours.size(); ++i) {
    const HourVars& v = m.hours[i];
    const int h = v.hour;
    const MarketHour& est = estimates.at(h);
    const double pmax = fleet.max_power(h);
    const double emax = fleet.max_energy(h);
    const std::size_t next_departure = i + 1 < m.hours.size() ? m.hours[i + 1].departure : m.final_departure;

    lp.add_constraint(var_name("ch_gate", h), {{v.p_ch, 1.0}, {v.delta, -pmax}}, R::less_equal, 0.0);
    lp.add_constraint(var_name("dis_gate", h), {{v.p_dis, 1.0}, {v.delta, pmax}}, R::less_equal, pmax);
    lp.add_constraint(var_name("ch_total", h), {{v.p_ch, 1.0}, {v.p_reg, 1.0}}, R::less_equal, pmax);
    lp.add_constraint(var_name("dis_total", h), {{v.p_dis, 1.0}, {v.p_reg, 1.0}}, R::less_equal, pmax);
    lp.add_constraint(var_name("agg_ch", h), {{v.agg_ch, 1.0}, {v.p_ch, -1.0}, {v.p_reg, -est.regd_down}}, R::equal,
                      0.0);
    lp.add_constraint(var_name("agg_dis", h), {{v.agg_dis, 1.0}, {v.p_dis, -1.0}, {v.p_reg, -est.regd_up}}, R::equal,
                      0.0);
    std::vector<Term> balance{{v.energy, 1.0}, {v.departure, 1.0}, {v.agg_ch, -params.eta_c},
                              {v.agg_dis, 1.0 / params.eta_d}};
    double balance_rhs = fleet.e_arrive(h);
    if (i == 0) {
      balance_rhs += start.energy;
    } else {
      balance.push_back({m.hours[i - 1].energy, -1.0});
    }
    lp.add_constraint(var_name("balance", h), std::move(balance), R::equal, balance_rhs);
    lp.add_constraint(var_name("reserve", h), {{v.energy, 1.0}}, R::greater_equal,
                      fleet.e_depart(h + 1) + lambda * emax);
    lp.add_constraint(var_name("handover", h), {{v.energy, 1.0}, {next_departure, -1.0}}, R::greater_equal, 0.0);
    lp.add_constraint(var_name("ceiling", h), {{v.energy, 1.0}}, R::less_equal, (1.0 - lambda) * emax);
    lp.add_constraint(var_name("residual", h), {{v.energy, 1.0}, {next_departure, -1.0}}, R::less_equal,
                      (fleet.n_present(h) - fleet.n_depart(h + 1)) * (1.0 - lambda) * cap);
  }
  return m;
}

LinearProgram build_da_subproblem(const FleetProfile& fleet, const HourlyEstimate& estimates,
                                  const PlannerParams& params) {
  return build_aggregator_model(fleet, estimates, params, {fleet.hours.first, 0.0, fleet.e_depart(fleet.hours.first)})
      .lp;
}

std::vector<HourPlan> AggregatorModel::schedule(const LpSolution& s) const {
  std::vector<HourPlan> out;
  out.reserve(hours.size());
  auto val = [&](std::size_t j) { return std::max(0.0, s.values[j]); };
  for (const auto& v : hours) {
    HourPlan p;
    p.hour = v.hour;
    p.p_ch = val(v.p_ch);
    p.p_dis = val(v.p_dis);
    p.p_reg = val(v.p_reg);
    p.delta = static_cast<int>(std::lround(s.values[v.delta]));
    p.agg_ch = val(v.agg_ch);
    p.agg_dis = val(v.agg_dis);
    p.energy = val(v.energy);
    p.departure = val(v.departure);
    out.push_back(p);
  }
  return out;
}

double AggregatorModel::credit_energy(const LpSolution& s, const HourlyEstimate& estimates) const {
  double total = 0.0;
  for (const auto& v : hours) total += (s.values[v.p_dis] - s.values[v.p_ch]) * estimates.at(v.hour).lmp;
  return total;
}

double AggregatorModel::credit_regulation(const LpSolution& s, const HourlyEstimate& estimates) const {
  double total = 0.0;
  for (const auto& v : hours) total += s.values[v.p_reg] * regulation_price(estimates.at(v.hour));
  return total;
}

double incentive_from_interval(const FleetResponse& fleet, std::size_t interval) {
  if (interval < 1 || interval > fleet.interval_count())
    throw std::invalid_argument(
        fmt::format("interval {} out of range 1..{}", interval, fleet.interval_count()));
  return fleet.lower_incentive(interval - 1);
}

namespace {

// Upper bound on the credits any schedule can earn with this fleet.
double credit_bound(const FleetProfile& fleet, const HourlyEstimate& estimates) {
  double total = 0.0;
  for (int h = fleet.hours.first; h <= fleet.hours.last; ++h) {
    const MarketHour& est = estimates.at(h);
    total += fleet.max_power(h) * std::max({0.0, regulation_price(est), std::abs(est.lmp)});
  }
  return total;
}

struct IntervalResult {
  LpSolution solution;
  AggregatorModel model;
};

IntervalResult solve_interval(const FleetProfile& fleet, const HourlyEstimate& estimates, const PlannerParams& params,
                              double cutoff) {
  IntervalResult r;
  r.model = build_aggregator_model(fleet, estimates, params, {fleet.hours.first, 0.0, fleet.e_depart(fleet.hours.first)});
  MilpOptions opts = params.milp;
  opts.cutoff = cutoff;
  r.solution = solve_milp(r.model.lp, opts);
  return r;
}

DaPlan make_plan(const FleetResponse& fleet, std::size_t interval, const HourlyEstimate& estimates,
                 const PlannerParams& params, const IntervalResult& r) {
  DaPlan plan;
  plan.interval = interval;
  plan.incentive = incentive_from_interval(fleet, interval);
  plan.fixed_reward = params.fixed_reward;
  plan.credit_energy = r.model.credit_energy(r.solution, estimates);
  plan.credit_regulation = r.model.credit_regulation(r.solution, estimates);
  plan.profit = plan.credits() - (plan.fixed_reward + plan.incentive);
  plan.activate = plan.profit > params.activation_threshold;
  plan.schedule = r.model.schedule(r.solution);
  return plan;
}

}  // namespace

DaPlan plan_interval(const FleetResponse& fleet, std::size_t interval, const HourlyEstimate& estimates,
                     const PlannerParams& params) {
  incentive_from_interval(fleet, interval);
  auto r = solve_interval(fleet.intervals[interval - 1], estimates, params,
                          -std::numeric_limits<double>::infinity());
  if (!r.solution.optimal())
    throw PlanningError(fmt::format("interval {} has no feasible schedule ({})", interval, to_string(r.solution.status)));
  DaPlan plan = make_plan(fleet, interval, estimates, params, r);
  plan.solved = 1;
  return plan;
}

DaPlan plan_day(const FleetResponse& fleet, const HourlyEstimate& estimates, const PlannerParams& params) {
  params.validate();
  if (fleet.interval_count() == 0) throw PlanningError("fleet has no incentive intervals");
  std::optional<IntervalResult> best;
  std::size_t best_interval = 0;
  double best_profit = -std::numeric_limits<double>::infinity();
  std::size_t solved = 0, infeasible = 0;
  std::size_t first_infeasible = 0;

  // Visit intervals from the most to the least promising so the search can
  // stop at the first one whose bound cannot beat the incumbent.
  const std::size_t n = fleet.interval_count();
  std::vector<double> bound(n);
  std::vector<std::size_t> order(n);
  for (std::size_t w = 1; w <= n; ++w) {
    bound[w - 1] = credit_bound(fleet.intervals[w - 1], estimates) - params.fixed_reward -
                   incentive_from_interval(fleet, w);
    order[w - 1] = w;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bound[a - 1] > bound[b - 1]; });

  for (std::size_t w : order) {
    if (best && bound[w - 1] < best_profit - kPruneGap) break;
    const double cost = params.fixed_reward + incentive_from_interval(fleet, w);
    const double cutoff = best ? best_profit + cost - 2 * kPruneGap : -std::numeric_limits<double>::infinity();
    auto r = solve_interval(fleet.intervals[w - 1], estimates, params, cutoff);
    ++solved;
    if (r.solution.status == SolveStatus::infeasible) {
      ++infeasible;
      if (!first_infeasible || w < first_infeasible) first_infeasible = w;
      continue;
    }
    if (!r.solution.optimal()) continue;
    const double profit = r.model.credit_energy(r.solution, estimates) +
                          r.model.credit_regulation(r.solution, estimates) - cost;
    const bool better = profit > best_profit + kPruneGap;
    const bool tie_lower = best && std::abs(profit - best_profit) <= kPruneGap && w < best_interval;
    if (!best || better || tie_lower) {
      best_profit = profit;
      best_interval = w;
      best = std::move(r);
    }
  }
  if (!best)
    throw PlanningError(fmt::format("no incentive interval has a feasible schedule (first infeasible: {})",
                                    first_infeasible));
  DaPlan plan = make_plan(fleet, best_interval, estimates, params, *best);
  plan.solved = solved;
  plan.infeasible = infeasible;
  return plan;
}

namespace {
constexpr const char* kPlanHeader = "hour,p_ch,p_dis,p_reg,delta,p_agg_ch,p_agg_dis,e_agg,e_agg_dep";
}

void write_da_plan_csv(const DaPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kPlanHeader << '\n';
  for (const auto& h : plan.schedule)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", h.hour, h.p_ch, h.p_dis,
                       h.p_reg, h.delta, h.agg_ch, h.agg_dis, h.energy, h.departure);
  out << fmt::format("summary,{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", plan.activate ? 1 : 0, plan.interval,
                     plan.incentive, plan.fixed_reward, plan.credit_energy, plan.credit_regulation, plan.profit);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DaPlan load_da_plan_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPlanHeader) throw std::runtime_error(path.string() + ": unexpected header");
  DaPlan plan;
  bool summary = false;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    try {
      if (c.at(0) == "summary") {
        if (c.size() != 8) throw std::runtime_error("summary needs 8 columns");
        plan.activate = std::stoi(c[1]) != 0;
        plan.interval = static_cast<std::size_t>(std::stoul(c[2]));
        plan.incentive = std::stod(c[3]);
        plan.fixed_reward = std::stod(c[4]);
        plan.credit_energy = std::stod(c[5]);
        plan.credit_regulation = std::stod(c[6]);
        plan.profit = std::stod(c[7]);
        summary = true;
        continue;
      }
      if (c.size() != 9) throw std::runtime_error("hour rows need 9 columns");
      HourPlan h;
      h.hour = std::stoi(c[0]);
      h.p_ch = std::stod(c[1]);
      h.p_dis = std::stod(c[2]);
      h.p_reg = std::stod(c[3]);
      h.delta = std::stoi(c[4]);
      h.agg_ch = std::stod(c[5]);
      h.agg_dis = std::stod(c[6]);
      h.energy = std::stod(c[7]);
      h.departure = std::stod(c[8]);
      plan.schedule.push_back(h);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}: row {}: {}", path.string(), row, e.what()));
    }
  }
  if (!summary) throw std::runtime_error(path.string() + ": missing summary row");
  return plan;
}

}  // namespace evagg
