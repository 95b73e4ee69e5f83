#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evagg/market_data.hpp"

namespace evagg {

/// Orders of a seasonal ARIMA model, written `(p,d,q)x(P,D,Q)s`.
struct SarimaSpec {
  int p = 0, d = 0, q = 0;
  int P = 0, D = 0, Q = 0;
  int s = 24;

  static SarimaSpec parse(std::string_view text);
  std::string to_string() const;
  void validate() const;

  int differencing_length() const { return d + D * s; }
  int max_ar_lag() const { return p + P * s; }
  int parameter_count() const { return p + P + q + Q + 1; }
  std::size_t min_fit_length() const;

  bool operator==(const SarimaSpec&) const = default;
};

/// AR and MA coefficients follow the `1 - c1 B - c2 B^2 ...` sign convention.
struct SarimaModel {
  SarimaSpec spec;
  std::vector<double> phi;
  std::vector<double> seasonal_phi;
  std::vector<double> theta;
  std::vector<double> seasonal_theta;
  double mu = 0.0;
  double sigma2 = 0.0;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, SarimaModel best) : std::runtime_error(what), best_(std::move(best)) {}
  const SarimaModel& best() const { return best_; }

 private:
  SarimaModel best_;
};

struct FitOptions {
  int max_iterations = 4000;  // per optimizer run
  int max_restarts = 6;
  double simplex_tolerance = 1e-7;
  double restart_tolerance = 1e-10;  // relative objective change that ends restarting
};

std::vector<double> apply_differencing(std::span<const double> values, const SarimaSpec& spec);
/// Rebuilds original-scale values following `history` from their differenced values.
std::vector<double> undo_differencing(std::span<const double> history, std::span<const double> differenced,
                                      const SarimaSpec& spec);

/// One-step residuals of the differenced series; the first max_ar_lag() are zero.
std::vector<double> css_residuals(const SarimaModel& model, std::span<const double> differenced);

SarimaModel fit_sarima(std::span<const double> values, const SarimaSpec& spec, const FitOptions& options = {});
std::vector<double> forecast_steps(const SarimaModel& model, std::span<const double> history, int horizon);

/// True when every AR/MA factor polynomial has all roots outside radius `margin`.
bool polynomial_roots_outside(std::span<const double> coefs, double margin);

enum class RegdEstimator { hourly_profile, sarima };

struct ForecastConfig {
  std::map<Field, SarimaSpec> specs = default_specs();
  RegdEstimator regd = RegdEstimator::hourly_profile;
  double perf_score = 0.95;
  FitOptions fit;

  static std::map<Field, SarimaSpec> default_specs();
};

struct ForecastSeries {
  std::vector<MarketHour> hours;  // perf_score carries the expected performance score
  std::vector<Field> fallback;    // series that fell back to same-hour-yesterday

  bool used_fallback(Field f) const;
};

/// Fits once on a training window and re-forecasts from any later history.
class MarketForecaster {
 public:
  MarketForecaster(const MarketSeries& training, const ForecastConfig& config);

  /// Forecasts the `horizon` hours following history.back().
  ForecastSeries forecast(const MarketSeries& history, int horizon) const;

  /// Null for series estimated without a model or whose fit failed.
  const SarimaModel* model(Field f) const;
  std::optional<PreprocessParams> preprocess(Field f) const;
  std::optional<std::string> fit_failure(Field f) const;

 private:
  struct SeriesFit {
    PreprocessParams params;
    double floor = 0.0;  // lowest clipped training value
    std::optional<SarimaModel> model;
    std::optional<std::string> failure;
  };

  std::vector<double> transform(const SeriesFit& fit, std::span<const double> raw) const;

  ForecastConfig config_;
  std::map<Field, SeriesFit> fits_;
  double regd_profile_up_[24] = {};
  double regd_profile_down_[24] = {};
};

ForecastSeries forecast_market(const MarketSeries& training, const ForecastConfig& config, int horizon);

/// Value observed at the same hour of day on the most recent day available.
std::vector<double> seasonal_naive(std::span<const double> history, int horizon, int period = 24);

}  // namespace evagg
