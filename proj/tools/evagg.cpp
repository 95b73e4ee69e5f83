#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <iostream>
#include <optional>

#include "evagg/backtest.hpp"

using namespace evagg;

namespace {

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
};

CampaignConfig load(const Common& c) {
  CampaignConfig cfg = c.config ? load_campaign_config(*c.config) : CampaignConfig{};
  if (c.seed) {
    cfg.market_seed = *c.seed;
    cfg.fleet.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

Date parse_date_arg(const std::string& text) {
  try {
    return parse_date(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--date", "expected YYYY-MM-DD, got " + text);
  }
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Campaign configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Seed for the synthetic market and the fleet");
}

int simulate(const Common& common, const std::optional<std::string>& out, const std::optional<std::string>& mode,
             bool frozen) {
  CampaignConfig cfg = load(common);
  if (out) cfg.output_dir = *out;
  if (frozen) cfg.mode = ForecastMode::frozen;
  if (mode) {
    if (*mode == "rolling") cfg.mode = ForecastMode::rolling;
    else if (*mode == "frozen") cfg.mode = ForecastMode::frozen;
    else cfg.mode = ForecastMode::oracle;
  }
  const auto report = run_backtest(cfg);
  emit_report(report, cfg.output_dir);
  const auto s = report.summary();
  fmt::print("operating days {}, activated {}\n", s.operating_days, s.activated_days);
  if (s.activated_days > 0)
    fmt::print("mean per activated day: credit ${:.2f} (energy {:.2f}, regulation {:.2f}), EV reward ${:.2f}, "
               "aggregator profit ${:.2f}, score {:.3f}\n",
               s.credits, s.credit_energy, s.credit_regulation, s.ev_reward, s.aggregator_profit, s.mean_rho);
  fmt::print("reports written to {}\n", cfg.output_dir.string());
  return 0;
}

int gen_market(const Common& common, std::optional<int> days, const std::optional<std::string>& start,
               const std::string& out) {
  CampaignConfig cfg = load(common);
  if (days) cfg.synthetic.hours = *days * 24;
  if (start) cfg.synthetic.start = parse_date_arg(*start);
  if (cfg.synthetic.hours <= 0) throw CLI::ValidationError("--days", "must be positive");
  const auto market = generate_synthetic_market(cfg.synthetic, cfg.market_seed);
  write_market_csv(market, out);
  fmt::print("{} hours written to {}\n", market.size(), out);
  return 0;
}

int fit(const Common& common, const std::string& series, const std::optional<std::string>& date, int horizon) {
  const CampaignConfig cfg = load(common);
  const auto field = field_from_name(series);
  if (!field || *field == Field::perf_score) throw CLI::ValidationError("--series", "unknown series " + series);
  const auto market = load_campaign_market(cfg);
  const Hour cutoff = date ? broadcast_hour(parse_date_arg(*date)) : market.back().timestamp;
  const auto model = fit_forecaster(cfg, market, cutoff);
  fmt::print("series {} trained on {} days ending {}\n", series, cfg.training_days, format_hour(cutoff));
  if (const auto* m = model->model(*field)) {
    fmt::print("order {}\n", m->spec.to_string());
    fmt::print("ar {}\nseasonal_ar {}\nma {}\nseasonal_ma {}\n", fmt::join(m->phi, " "),
               fmt::join(m->seasonal_phi, " "), fmt::join(m->theta, " "), fmt::join(m->seasonal_theta, " "));
    fmt::print("mu {:.6g}\nsigma2 {:.6g}\n", m->mu, m->sigma2);
  } else if (const auto failure = model->fit_failure(*field)) {
    fmt::print("fit failed ({}); same hour yesterday used instead\n", *failure);
  } else {
    fmt::print("estimated from the training hourly profile\n");
  }
  const auto history = market.between(market.front().timestamp, cutoff);
  const auto fc = model->forecast(history, horizon);
  fmt::print("timestamp,forecast,actual\n");
  for (const auto& h : fc.hours) {
    const auto row = market.index_of(h.timestamp);
    fmt::print("{},{:.6g},{}\n", format_hour(h.timestamp), h.get(*field),
               row ? fmt::format("{:.6g}", market[*row].get(*field)) : "");
  }
  return 0;
}

int plan(const Common& common, const std::string& date, const std::string& out) {
  const CampaignConfig cfg = load(common);
  const Date day = parse_date_arg(date);
  const auto market = load_campaign_market(cfg);
  const Fleet fleet = generate_fleet(cfg.fleet);
  DayForecasts fc(cfg, market, day);
  const DaPlan p = plan_campaign_day(cfg, fleet.response, fc.planning_estimate());
  write_da_plan_csv(p, out);
  fmt::print("{}: {} interval {} incentive ${:.2f}, expected profit ${:.2f}; plan written to {}\n", date,
             p.activate ? "activate" : "stay idle", p.interval, p.incentive, p.profit, out);
  return 0;
}

int replay(const Common& common, const std::string& date, const std::string& plan_path, const std::string& out) {
  const CampaignConfig cfg = load(common);
  const Date day = parse_date_arg(date);
  const auto market = load_campaign_market(cfg);
  const Fleet fleet = generate_fleet(cfg.fleet);
  const DaPlan p = load_da_plan_csv(plan_path);
  const DayResult r = replay_day(cfg, market, fleet.response, p, day);
  write_settlement_csv({r}, out);
  fmt::print("{}: credit ${:.2f}, profit ${:.2f}, score {:.3f}; settlements written to {}\n", date, r.credits(),
             r.profit, r.mean_rho, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV aggregator bidding simulator"};
  app.require_subcommand(1);
  Common common;

  auto* sim = app.add_subcommand("simulate", "Run a backtest campaign and write its reports");
  add_common(sim, common);
  std::optional<std::string> sim_out, sim_mode;
  bool frozen = false;
  sim->add_option("--out", sim_out, "Output directory (overrides the configuration)");
  sim->add_option("--forecast-mode", sim_mode, "rolling, frozen or oracle")
      ->check(CLI::IsMember({"rolling", "frozen", "oracle"}));
  sim->add_flag("--frozen-forecaster", frozen, "Fit the forecaster once before the first day");

  auto* gen = app.add_subcommand("gen-market", "Write a synthetic market CSV");
  add_common(gen, common);
  std::optional<int> gen_days;
  std::optional<std::string> gen_start;
  std::string gen_out = "market.csv";
  gen->add_option("--days", gen_days, "Number of days")->check(CLI::PositiveNumber);
  gen->add_option("--start", gen_start, "First day, YYYY-MM-DD");
  gen->add_option("--out", gen_out, "Output file")->capture_default_str();

  auto* fit_cmd = app.add_subcommand("fit", "Fit one series and print the model and a forecast");
  add_common(fit_cmd, common);
  std::string fit_series = "lmp";
  std::optional<std::string> fit_date;
  int fit_horizon = kPlanningHorizon;
  fit_cmd->add_option("--series", fit_series, "Market column to fit")->capture_default_str();
  fit_cmd->add_option("--date", fit_date, "Forecast as of 16:00 the day before this date");
  fit_cmd->add_option("--horizon", fit_horizon, "Hours to forecast")->check(CLI::PositiveNumber)->capture_default_str();

  auto* plan_cmd = app.add_subcommand("plan", "Plan one operating day");
  add_common(plan_cmd, common);
  std::string plan_date, plan_out = "plan.csv";
  plan_cmd->add_option("--date", plan_date, "Operating day, YYYY-MM-DD")->required();
  plan_cmd->add_option("--out", plan_out, "Plan CSV")->capture_default_str();

  auto* replay_cmd = app.add_subcommand("replay", "Operate one day from a saved plan");
  add_common(replay_cmd, common);
  std::string replay_date, replay_plan, replay_out = "settlements.csv";
  replay_cmd->add_option("--date", replay_date, "Operating day, YYYY-MM-DD")->required();
  replay_cmd->add_option("--plan", replay_plan, "Plan CSV")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "Settlement CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return simulate(common, sim_out, sim_mode, frozen);
    if (*gen) return gen_market(common, gen_days, gen_start, gen_out);
    if (*fit_cmd) return fit(common, fit_series, fit_date, fit_horizon);
    if (*plan_cmd) return plan(common, plan_date, plan_out);
    if (*replay_cmd) return replay(common, replay_date, replay_plan, replay_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
