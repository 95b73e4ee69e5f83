#include "evagg/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace evagg {

namespace pt = boost::property_tree;

std::string_view to_string(ForecastMode m) {
  switch (m) {
    case ForecastMode::rolling:
      return "rolling";
    case ForecastMode::frozen:
      return "frozen";
    case ForecastMode::oracle:
      return "oracle";
  }
  return "?";
}

namespace {

constexpr const char* kShapeKeys[] = {"base", "amplitude", "peak_hour", "ar", "noise"};

SeriesShape& shape_of(SynthConfig& c, Field f) {
  switch (f) {
    case Field::lmp: return c.lmp;
    case Field::rmccp: return c.rmccp;
    case Field::rmpcp: return c.rmpcp;
    case Field::mileage_ratio: return c.mileage_ratio;
    case Field::regd_up: return c.regd_up;
    case Field::regd_down: return c.regd_down;
    default: throw ConfigError("no synthetic shape for " + std::string(field_name(f)));
  }
}

double& shape_value(SeriesShape& s, std::string_view key) {
  if (key == "base") return s.base;
  if (key == "amplitude") return s.amplitude;
  if (key == "peak_hour") return s.peak_hour;
  if (key == "ar") return s.ar;
  return s.noise;
}

std::set<std::string> allowed_keys() {
  std::set<std::string> keys = {
      "market.source", "market.csv", "market.seed", "market.start", "market.days", "market.regd_up_per_down",
      "fleet.n_ev", "fleet.ev_power_kw", "fleet.ev_capacity_kwh", "fleet.arrival", "fleet.departure",
      "fleet.arrival_soc", "fleet.departure_soc", "fleet.incentive_max", "fleet.steps_per_behavior",
      "fleet.seed", "fleet.first_hour", "fleet.last_hour",
      "planner.fixed_reward", "planner.lambda", "planner.eta_c", "planner.eta_d",
      "planner.activation_threshold", "planner.node_limit",
      "forecast.mode", "forecast.regd", "forecast.perf_score", "forecast.max_iterations",
      "forecast.max_restarts",
      "campaign.first_day", "campaign.last_day", "campaign.training_days", "campaign.holidays",
      "campaign.base_case", "campaign.output_dir"};
  for (Field f : kForecastFields) {
    keys.insert("forecast." + std::string(field_name(f)));
    for (const char* k : kShapeKeys) keys.insert(fmt::format("market.{}_{}", field_name(f), k));
  }
  return keys;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& target) {
  const auto node = tree.get_optional<std::string>(key);
  if (!node) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (*node == "true" || *node == "1" || *node == "yes") {
        target = true;
      } else if (*node == "false" || *node == "0" || *node == "no") {
        target = false;
      } else {
        throw std::invalid_argument("not a boolean");
      }
    } else {
      target = tree.get<T>(key);
    }
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, *node));
  }
}

BehaviorDistribution parse_distribution(const std::string& key, const std::string& text) {
  std::vector<double> v;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
    }
  }
  if (v.size() != 4) throw ConfigError(key + ": expected mean, std, min, max");
  return {v[0], v[1], v[2], v[3]};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

void CampaignConfig::validate() const {
  try {
    fleet.validate();
    planner.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (first_day > last_day) throw ConfigError("first_day is after last_day");
  if (training_days < 14) throw ConfigError("training window must cover at least 14 days");
  if (!market_csv && synthetic.hours <= 0) throw ConfigError("synthetic market has no hours");
  if (fleet.hours.last > kPlanningHorizon - 8)
    throw ConfigError(fmt::format("fleet.last_hour must be at most {} to lie inside the forecast horizon",
                                  kPlanningHorizon - 8));
  for (const auto& [field, spec] : forecast.specs) {
    try {
      spec.validate();
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("forecast.{}: {}", field_name(field), e.what()));
    }
  }
  if (!(forecast.perf_score >= 0.0 && forecast.perf_score <= 1.0))
    throw ConfigError("forecast.perf_score must lie in [0, 1]");
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  const auto allowed = allowed_keys();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(fmt::format("{}: key outside a section", section));
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!allowed.contains(full)) throw ConfigError(fmt::format("{}: unknown key {}", path.string(), full));
    }
  }

  const auto base = path.parent_path();
  CampaignConfig c;

  const std::string source = tree.get("market.source", std::string("synthetic"));
  if (source == "csv") {
    const auto csv = tree.get_optional<std::string>("market.csv");
    if (!csv) throw ConfigError("market.csv is required when market.source = csv");
    c.market_csv = resolve(base, *csv);
  } else if (source != "synthetic") {
    throw ConfigError("market.source must be synthetic or csv");
  }
  read(tree, "market.seed", c.market_seed);
  if (const auto start = tree.get_optional<std::string>("market.start")) {
    try {
      c.synthetic.start = parse_date(*start);
    } catch (const std::exception&) {
      throw ConfigError("market.start: cannot parse '" + *start + "'");
    }
  }
  int days = c.synthetic.hours / 24;
  read(tree, "market.days", days);
  c.synthetic.hours = days * 24;
  if (tree.get_optional<std::string>("market.regd_up_per_down")) {
    double ratio = 0.0;
    read(tree, "market.regd_up_per_down", ratio);
    c.synthetic.regd_up_per_down = ratio;
  }
  for (Field f : kForecastFields)
    for (const char* k : kShapeKeys)
      read(tree, fmt::format("market.{}_{}", field_name(f), k), shape_value(shape_of(c.synthetic, f), k));

  read(tree, "fleet.n_ev", c.fleet.n_ev);
  read(tree, "fleet.ev_power_kw", c.fleet.ev_power_kw);
  read(tree, "fleet.ev_capacity_kwh", c.fleet.ev_capacity_kwh);
  for (auto [key, target] : {std::pair{"fleet.arrival", &c.fleet.arrival}, std::pair{"fleet.departure", &c.fleet.departure},
                             std::pair{"fleet.arrival_soc", &c.fleet.arrival_soc},
                             std::pair{"fleet.departure_soc", &c.fleet.departure_soc}})
    if (const auto v = tree.get_optional<std::string>(key)) *target = parse_distribution(key, *v);
  read(tree, "fleet.incentive_max", c.fleet.incentive_max);
  read(tree, "fleet.steps_per_behavior", c.fleet.steps_per_behavior);
  read(tree, "fleet.seed", c.fleet.seed);
  read(tree, "fleet.first_hour", c.fleet.hours.first);
  read(tree, "fleet.last_hour", c.fleet.hours.last);

  read(tree, "planner.fixed_reward", c.planner.fixed_reward);
  read(tree, "planner.lambda", c.planner.lambda);
  read(tree, "planner.eta_c", c.planner.eta_c);
  read(tree, "planner.eta_d", c.planner.eta_d);
  read(tree, "planner.activation_threshold", c.planner.activation_threshold);
  read(tree, "planner.node_limit", c.planner.milp.node_limit);

  const std::string mode = tree.get("forecast.mode", std::string("rolling"));
  if (mode == "rolling") {
    c.mode = ForecastMode::rolling;
  } else if (mode == "frozen") {
    c.mode = ForecastMode::frozen;
  } else if (mode == "oracle") {
    c.mode = ForecastMode::oracle;
  } else {
    throw ConfigError("forecast.mode must be rolling, frozen or oracle");
  }
  const std::string regd = tree.get("forecast.regd", std::string("hourly_profile"));
  if (regd == "hourly_profile") {
    c.forecast.regd = RegdEstimator::hourly_profile;
  } else if (regd == "sarima") {
    c.forecast.regd = RegdEstimator::sarima;
  } else {
    throw ConfigError("forecast.regd must be hourly_profile or sarima");
  }
  read(tree, "forecast.perf_score", c.forecast.perf_score);
  read(tree, "forecast.max_iterations", c.forecast.fit.max_iterations);
  read(tree, "forecast.max_restarts", c.forecast.fit.max_restarts);
  for (Field f : kForecastFields) {
    const std::string key = "forecast." + std::string(field_name(f));
    if (const auto v = tree.get_optional<std::string>(key)) {
      try {
        c.forecast.specs[f] = SarimaSpec::parse(*v);
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
      }
    }
  }

  for (auto [key, target] : {std::pair{"campaign.first_day", &c.first_day}, std::pair{"campaign.last_day", &c.last_day}}) {
    if (const auto v = tree.get_optional<std::string>(key)) {
      try {
        *target = parse_date(*v);
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: cannot parse '{}'", key, *v));
      }
    }
  }
  read(tree, "campaign.training_days", c.training_days);
  if (const auto v = tree.get_optional<std::string>("campaign.holidays")) c.holidays = load_holidays(resolve(base, *v));
  read(tree, "campaign.base_case", c.base_case);
  if (const auto v = tree.get_optional<std::string>("campaign.output_dir")) c.output_dir = resolve(base, *v);

  c.validate();
  return c;
}

std::vector<Date> load_holidays(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read holiday list " + path.string());
  std::vector<Date> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    try {
      out.push_back(parse_date(std::string_view(line).substr(a, b - a + 1)));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}:{}: not a date", path.string(), number));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Date> operating_days(const CampaignConfig& config) {
  std::vector<Date> out;
  for (Date d = config.first_day; d <= config.last_day; d += std::chrono::days{1}) {
    if (is_weekend(d)) continue;
    if (std::binary_search(config.holidays.begin(), config.holidays.end(), d)) continue;
    out.push_back(d);
  }
  return out;
}

Hour broadcast_hour(Date day) { return make_hour(day - std::chrono::days{1}, 16); }

MarketSeries load_campaign_market(const CampaignConfig& config) {
  if (config.market_csv) return load_market_csv(*config.market_csv);
  return generate_synthetic_market(config.synthetic, config.market_seed);
}

std::shared_ptr<const MarketForecaster> fit_forecaster(const CampaignConfig& config, const MarketSeries& market,
                                                       Hour cutoff) {
  const Hour start = cutoff - std::chrono::hours{config.training_days * 24 - 1};
  if (!market.covers(start, cutoff))
    throw ConfigError(fmt::format("market data does not cover the training window {} to {}", format_hour(start),
                                  format_hour(cutoff)));
  return std::make_shared<const MarketForecaster>(market.between(start, cutoff), config.forecast);
}

DayForecasts::DayForecasts(const CampaignConfig& config, const MarketSeries& market, Date day,
                           std::shared_ptr<const MarketForecaster> frozen)
    : config_(config), market_(market), day_(day), model_(std::move(frozen)) {
  switch (config.mode) {
    case ForecastMode::oracle:
      rt_ = std::make_unique<OracleForecaster>(market);
      return;
    case ForecastMode::frozen:
      if (!model_) {
        const auto days = operating_days(config);
        if (days.empty()) throw ConfigError("campaign has no operating days");
        model_ = fit_forecaster(config, market, broadcast_hour(days.front()));
      }
      break;
    case ForecastMode::rolling:
      model_ = fit_forecaster(config, market, broadcast_hour(day));
      break;
  }
  rt_ = std::make_unique<ModelForecaster>(*model_, market);
}

HourlyEstimate DayForecasts::planning_estimate() const {
  const auto& hours = config_.fleet.hours;
  if (config_.mode == ForecastMode::oracle) {
    const auto slice = market_.between(make_hour(day_, hours.first), make_hour(day_, hours.last));
    return HourlyEstimate(slice.hours());
  }
  const Hour cutoff = broadcast_hour(day_);
  if (!market_.index_of(cutoff)) throw MarketDataError("no market data at " + format_hour(cutoff));
  const auto history = market_.between(market_.front().timestamp, cutoff);
  const auto fc = model_->forecast(history, kPlanningHorizon);
  std::vector<MarketHour> day_hours;
  for (const auto& h : fc.hours)
    if (date_of(h.timestamp) == day_) day_hours.push_back(h);
  return HourlyEstimate(day_hours);
}

namespace {

PlannerParams campaign_planner(const CampaignConfig& config) {
  PlannerParams p = config.planner;
  if (config.base_case) p.lambda = 0.0;
  return p;
}

}  // namespace

DaPlan plan_campaign_day(const CampaignConfig& config, const FleetResponse& fleet, const HourlyEstimate& estimate) {
  const PlannerParams p = campaign_planner(config);
  if (!config.base_case) return plan_day(fleet, estimate, p);
  DaPlan plan = plan_interval(fleet, 1, estimate, p);
  plan.activate = true;
  return plan;
}

DayResult replay_day(const CampaignConfig& config, const MarketSeries& market, const FleetResponse& fleet,
                     const DaPlan& plan, Date day) {
  if (plan.interval < 1 || plan.interval > fleet.interval_count())
    throw ConfigError(fmt::format("plan interval {} is outside the fleet's {} intervals", plan.interval,
                                  fleet.interval_count()));
  DayForecasts fc(config, market, day);
  return run_day(day, fleet.intervals[plan.interval - 1], fc.real_time(), market, campaign_planner(config),
                 plan.fixed_reward + plan.incentive);
}

CampaignSummary CampaignReport::summary() const {
  CampaignSummary s;
  s.operating_days = days.size();
  for (const auto& d : days) {
    if (!d.activated) continue;
    ++s.activated_days;
    s.credit_energy += d.credit_energy;
    s.credit_regulation += d.credit_regulation;
    s.ev_reward += d.ev_reward;
    s.aggregator_profit += d.aggregator_profit;
    s.mean_rho += d.mean_rho;
  }
  if (s.activated_days > 0) {
    const double n = static_cast<double>(s.activated_days);
    s.credit_energy /= n;
    s.credit_regulation /= n;
    s.ev_reward /= n;
    s.aggregator_profit /= n;
    s.mean_rho /= n;
  }
  s.credits = s.credit_energy + s.credit_regulation;
  return s;
}

CampaignReport run_backtest(const CampaignConfig& config) {
  config.validate();
  const MarketSeries market = load_campaign_market(config);
  const auto days = operating_days(config);
  CampaignReport report;
  if (days.empty()) return report;

  const Hour end = make_hour(days.back(), config.fleet.hours.last);
  if (market.empty() || !market.index_of(end))
    throw MarketDataError("market data does not reach " + format_hour(end));
  const Hour first_cutoff = broadcast_hour(days.front());
  const Hour training_start = first_cutoff - std::chrono::hours{config.training_days * 24 - 1};
  if (!market.covers(training_start, first_cutoff))
    throw ConfigError(fmt::format("market data must start by {} to train before {}", format_hour(training_start),
                                  format_date(days.front())));

  const Fleet fleet = generate_fleet(config.fleet);
  std::shared_ptr<const MarketForecaster> frozen;
  if (config.mode == ForecastMode::frozen) frozen = fit_forecaster(config, market, first_cutoff);
  const PlannerParams params = campaign_planner(config);

  for (Date day : days) {
    DayForecasts fc(config, market, day, frozen);
    DayRow row;
    row.day = day;
    DaPlan plan;
    try {
      plan = plan_campaign_day(config, fleet.response, fc.planning_estimate());
      row.interval = plan.interval;
      row.incentive = plan.incentive;
      row.expected_profit = plan.profit;
    } catch (const PlanningError& e) {
      plan = DaPlan{};
      plan.interval = 0;
      row.note = "no feasible interval";
    }
    if (plan.activate) {
      DayResult r = run_day(day, fleet.response.intervals[plan.interval - 1], fc.real_time(), market, params,
                            plan.fixed_reward + plan.incentive);
      row.activated = true;
      row.credit_energy = r.credit_energy;
      row.credit_regulation = r.credit_regulation;
      row.ev_reward = r.reward;
      row.aggregator_profit = r.profit;
      row.mean_rho = r.mean_rho;
      row.fallback_hours = r.fallback_hours;
      row.clamped_hours = r.clamped_hours;
      report.operations.push_back(std::move(r));
    }
    report.days.push_back(row);
    report.plans.push_back(std::move(plan));
  }
  return report;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string mean_field(double sum, std::size_t n) { return n == 0 ? "" : fmt::format("{:.17g}", sum / static_cast<double>(n)); }

}  // namespace

void emit_report(const CampaignReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  {
    const auto path = dir / "report.csv";
    auto out = open_output(path);
    out << "date,activated,interval,incentive,expected_profit,credit_e,credit_r,ev_reward,aggregator_profit,avg_rho,"
           "fallback_hours,clamped_hours,note\n";
    for (const auto& d : report.days) {
      out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{},{}\n", format_date(d.day),
                         d.activated ? 1 : 0, d.interval, d.incentive, d.expected_profit, d.credit_energy,
                         d.credit_regulation, d.ev_reward, d.aggregator_profit,
                         d.activated ? fmt::format("{:.17g}", d.mean_rho) : "", d.fallback_hours, d.clamped_hours,
                         d.note);
    }
    if (!report.days.empty()) {
      const auto s = report.summary();
      const auto n = s.activated_days;
      auto field = [&](double mean) { return n == 0 ? std::string() : fmt::format("{:.17g}", mean); };
      out << "aggregate,operating_days,activated_days,credit_e,credit_r,credits,ev_reward,aggregator_profit,avg_rho\n";
      out << fmt::format("activated_mean,{},{},{},{},{},{},{},{}\n", s.operating_days, n, field(s.credit_energy),
                         field(s.credit_regulation), field(s.credits), field(s.ev_reward),
                         field(s.aggregator_profit), field(s.mean_rho));
    }
    finish(out, path);
  }

  struct HourTotals {
    double p_ch = 0, p_dis = 0, p_reg = 0, delta_p = 0, rho = 0;
    std::size_t n = 0;
  };
  std::map<int, HourTotals> by_hour;
  for (const auto& d : report.operations) {
    for (const auto& s : d.hours) {
      auto& t = by_hour[s.hour];
      t.p_ch += s.p_ch;
      t.p_dis += s.p_dis;
      t.p_reg += s.p_reg;
      t.delta_p += std::abs(s.delta_p_reg);
      t.rho += s.rho;
      ++t.n;
    }
  }
  {
    const auto path = dir / "hourly_offers.csv";
    auto out = open_output(path);
    out << "hour,p_ch,p_dis,p_reg,days\n";
    for (const auto& [h, t] : by_hour)
      out << fmt::format("{},{},{},{},{}\n", h, mean_field(t.p_ch, t.n), mean_field(t.p_dis, t.n),
                         mean_field(t.p_reg, t.n), t.n);
    finish(out, path);
  }
  {
    const auto path = dir / "performance.csv";
    auto out = open_output(path);
    out << "hour,delta_p_reg,rho,days\n";
    for (const auto& [h, t] : by_hour)
      out << fmt::format("{},{},{},{}\n", h, mean_field(t.delta_p, t.n), mean_field(t.rho, t.n), t.n);
    finish(out, path);
  }
  {
    const auto path = dir / "settlements.csv";
    auto out = open_output(path);
    out << kSettlementCsvHeader << '\n';
    for (const auto& d : report.operations) write_settlement_rows(out, d);
    finish(out, path);
  }
  if (!report.plans.empty()) {
    std::filesystem::create_directories(dir / "plans", ec);
    if (ec) throw std::runtime_error("cannot create " + (dir / "plans").string() + ": " + ec.message());
    for (std::size_t i = 0; i < report.plans.size() && i < report.days.size(); ++i)
      if (report.plans[i].interval > 0)
        write_da_plan_csv(report.plans[i], dir / "plans" / (format_date(report.days[i].day) + ".csv"));
  }
}

}  // namespace evagg
