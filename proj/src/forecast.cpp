#include "evagg/forecast.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace evagg {

namespace {

constexpr double kRootMargin = 1.01;
constexpr double kPenalty = 1e10;

bool read_int(std::string_view& text, int& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{}) return false;
  text.remove_prefix(static_cast<std::size_t>(ptr - text.data()));
  return true;
}

bool expect(std::string_view& text, char c) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (text.empty() || text.front() != c) return false;
  text.remove_prefix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  return true;
}

// Coefficients of (1 - c1 B^step - c2 B^(2 step) ...) as a dense lag polynomial.
std::vector<double> lag_polynomial(std::span<const double> c, int step) {
  std::vector<double> out(c.size() * static_cast<std::size_t>(step) + 1, 0.0);
  out[0] = 1.0;
  for (std::size_t i = 0; i < c.size(); ++i) out[(i + 1) * static_cast<std::size_t>(step)] = -c[i];
  return out;
}

std::vector<double> multiply(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

struct LagTerm {
  std::size_t lag;
  double coef;
};

// w_t = sum ar * w_{t-lag} + mu + e_t + sum ma * e_{t-lag}
struct Recursion {
  std::vector<LagTerm> ar;
  std::vector<LagTerm> ma;
  double mu = 0.0;
};

Recursion recursion_of(const SarimaModel& m) {
  const auto a = multiply(lag_polynomial(m.phi, 1), lag_polynomial(m.seasonal_phi, m.spec.s));
  const auto b = multiply(lag_polynomial(m.theta, 1), lag_polynomial(m.seasonal_theta, m.spec.s));
  Recursion r;
  for (std::size_t k = 1; k < a.size(); ++k)
    if (a[k] != 0.0) r.ar.push_back({k, -a[k]});
  for (std::size_t k = 1; k < b.size(); ++k)
    if (b[k] != 0.0) r.ma.push_back({k, b[k]});
  r.mu = m.mu;
  return r;
}

std::vector<double> residuals(const Recursion& r, std::span<const double> w, std::size_t start) {
  std::vector<double> e(w.size(), 0.0);
  for (std::size_t t = start; t < w.size(); ++t) {
    double v = w[t] - r.mu;
    for (const auto& term : r.ar) v -= term.coef * w[t - term.lag];
    for (const auto& term : r.ma)
      if (term.lag <= t) v -= term.coef * e[t - term.lag];
    e[t] = v;
  }
  return e;
}

std::vector<double> difference_polynomial(const SarimaSpec& spec) {
  std::vector<double> poly{1.0};
  for (int i = 0; i < spec.d; ++i) poly = multiply(poly, {1.0, -1.0});
  std::vector<double> seasonal(static_cast<std::size_t>(spec.s) + 1, 0.0);
  seasonal.front() = 1.0;
  seasonal.back() = -1.0;
  for (int i = 0; i < spec.D; ++i) poly = multiply(poly, seasonal);
  return poly;
}

SarimaModel unpack(const SarimaSpec& spec, const double* x) {
  SarimaModel m;
  m.spec = spec;
  m.phi.assign(x, x + spec.p);
  x += spec.p;
  m.seasonal_phi.assign(x, x + spec.P);
  x += spec.P;
  m.theta.assign(x, x + spec.q);
  x += spec.q;
  m.seasonal_theta.assign(x, x + spec.Q);
  x += spec.Q;
  m.mu = *x;
  return m;
}

// Largest amount by which any factor's root falls inside the margin; 0 when admissible.
double root_violation(const SarimaModel& m) {
  double worst = 0.0;
  for (const auto* c : {&m.phi, &m.seasonal_phi, &m.theta, &m.seasonal_theta}) {
    if (c->empty() || polynomial_roots_outside(*c, kRootMargin)) continue;
    double sum = 0.0;
    for (double v : *c) sum += std::abs(v);
    worst = std::max(worst, sum);
  }
  return worst;
}

struct Objective {
  const SarimaSpec* spec;
  std::span<const double> w;
  std::size_t start;
};

double css_objective(const gsl_vector* x, void* data) {
  const auto* obj = static_cast<const Objective*>(data);
  const auto m = unpack(*obj->spec, gsl_vector_const_ptr(x, 0));
  const double violation = root_violation(m);
  if (violation > 0.0) return kPenalty * (1.0 + violation);
  const auto e = residuals(recursion_of(m), obj->w, obj->start);
  double css = 0.0;
  for (std::size_t t = obj->start; t < e.size(); ++t) css += e[t] * e[t];
  css /= static_cast<double>(e.size() - obj->start);
  return std::isfinite(css) ? css : kPenalty;
}

}  // namespace

SarimaSpec SarimaSpec::parse(std::string_view text) {
  const std::string original(text);
  SarimaSpec spec;
  const bool ok = expect(text, '(') && read_int(text, spec.p) && expect(text, ',') && read_int(text, spec.d) &&
                  expect(text, ',') && read_int(text, spec.q) && expect(text, ')') && expect(text, 'x') &&
                  expect(text, '(') && read_int(text, spec.P) && expect(text, ',') && read_int(text, spec.D) &&
                  expect(text, ',') && read_int(text, spec.Q) && expect(text, ')') && read_int(text, spec.s);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (!ok || !text.empty()) throw std::invalid_argument("bad model orders '" + original + "', expected (p,d,q)x(P,D,Q)s");
  spec.validate();
  return spec;
}

std::string SarimaSpec::to_string() const { return fmt::format("({},{},{})x({},{},{}){}", p, d, q, P, D, Q, s); }

void SarimaSpec::validate() const {
  if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0) throw std::invalid_argument("negative model order");
  if (s < 1) throw std::invalid_argument("seasonal period must be at least 1");
  if (d + D > 2) throw std::invalid_argument("total differencing order above 2");
}

std::size_t SarimaSpec::min_fit_length() const {
  return static_cast<std::size_t>(10 * parameter_count() + differencing_length());
}

std::vector<double> apply_differencing(std::span<const double> values, const SarimaSpec& spec) {
  const auto poly = difference_polynomial(spec);
  const std::size_t lag = poly.size() - 1;
  if (values.size() <= lag)
    throw std::length_error(fmt::format("series of length {} too short to difference {}", values.size(), spec.to_string()));
  std::vector<double> out(values.size() - lag);
  for (std::size_t t = lag; t < values.size(); ++t) {
    double v = 0.0;
    for (std::size_t k = 0; k <= lag; ++k) v += poly[k] * values[t - k];
    out[t - lag] = v;
  }
  return out;
}

std::vector<double> undo_differencing(std::span<const double> history, std::span<const double> differenced,
                                      const SarimaSpec& spec) {
  const auto poly = difference_polynomial(spec);
  const std::size_t lag = poly.size() - 1;
  if (history.size() < lag) throw std::length_error("history too short to undo differencing");
  std::vector<double> y(history.begin(), history.end());
  const std::size_t n = y.size();
  for (double w : differenced) {
    const std::size_t t = y.size();
    double v = w;
    for (std::size_t k = 1; k <= lag; ++k) v -= poly[k] * y[t - k];
    y.push_back(v);
  }
  return {y.begin() + static_cast<std::ptrdiff_t>(n), y.end()};
}

bool polynomial_roots_outside(std::span<const double> coefs, double margin) {
  // Roots of 1 - c1 z - ... - ck z^k lie outside |z| = margin exactly when the
  // companion matrix of the reversed polynomial has spectral radius below 1/margin.
  const auto k = static_cast<Eigen::Index>(coefs.size());
  if (k == 0) return true;
  if (k == 1) return std::abs(coefs[0]) < 1.0 / margin;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) c(0, j) = coefs[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < k; ++i) c(i, i - 1) = 1.0;
  if (!c.allFinite()) return false;
  const Eigen::VectorXcd eig = c.eigenvalues();
  return eig.cwiseAbs().maxCoeff() < 1.0 / margin;
}

std::vector<double> css_residuals(const SarimaModel& model, std::span<const double> differenced) {
  const auto start = static_cast<std::size_t>(model.spec.max_ar_lag());
  if (differenced.size() <= start) throw std::length_error("series shorter than the autoregressive lags");
  return residuals(recursion_of(model), differenced, start);
}

SarimaModel fit_sarima(std::span<const double> values, const SarimaSpec& spec, const FitOptions& options) {
  spec.validate();
  if (values.size() < spec.min_fit_length())
    throw std::length_error(fmt::format("{} needs at least {} observations, got {}", spec.to_string(),
                                        spec.min_fit_length(), values.size()));
  const auto w = apply_differencing(values, spec);
  const auto start = static_cast<std::size_t>(spec.max_ar_lag());
  if (w.size() <= start + 1) throw std::length_error("differenced series shorter than the autoregressive lags");

  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double spread = 0.0;
  for (double v : w) spread = std::max(spread, std::abs(v - mean));

  const auto n = static_cast<std::size_t>(spec.parameter_count());
  std::vector<double> best(n, 0.0);
  best.back() = mean;
  auto model_of = [&](const std::vector<double>& x) {
    auto m = unpack(spec, x.data());
    const auto e = residuals(recursion_of(m), w, start);
    double css = 0.0;
    for (std::size_t t = start; t < e.size(); ++t) css += e[t] * e[t];
    m.sigma2 = css / static_cast<double>(e.size() - start);
    return m;
  };

  if (spread <= 1e-12 * (1.0 + std::abs(mean))) {
    if (spec.parameter_count() == 1) return model_of(best);
    throw FitError("differenced series is constant; " + spec.to_string() + " is not identifiable", model_of(best));
  }

  Objective obj{&spec, w, start};
  gsl_multimin_function fn{&css_objective, n, &obj};
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  const auto old_handler = gsl_set_error_handler_off();

  double best_value = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int restart = 0; restart <= options.max_restarts && !converged; ++restart) {
    for (std::size_t i = 0; i < n; ++i) {
      gsl_vector_set(x, i, best[i]);
      gsl_vector_set(step, i, i + 1 == n ? 0.1 * spread : 0.1);
    }
    gsl_multimin_fminimizer_set(solver, &fn, x, step);
    bool run_converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), options.simplex_tolerance) == GSL_SUCCESS) {
        run_converged = true;
        break;
      }
    }
    const double value = solver->fval;
    const double previous = best_value;
    if (value < best_value) {
      best_value = value;
      for (std::size_t i = 0; i < n; ++i) best[i] = gsl_vector_get(solver->x, i);
    }
    converged = run_converged && std::isfinite(previous) &&
                previous - best_value <= options.restart_tolerance * (std::abs(best_value) + 1e-300);
  }

  gsl_set_error_handler(old_handler);
  gsl_vector_free(step);
  gsl_vector_free(x);
  gsl_multimin_fminimizer_free(solver);

  auto model = model_of(best);
  if (!converged) throw FitError("optimizer did not converge for " + spec.to_string(), model);
  if (best_value >= kPenalty) throw FitError("no admissible parameters found for " + spec.to_string(), model);
  return model;
}

std::vector<double> forecast_steps(const SarimaModel& model, std::span<const double> history, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("forecast horizon must be positive");
  const auto w = apply_differencing(history, model.spec);
  const auto start = static_cast<std::size_t>(model.spec.max_ar_lag());
  if (w.size() < std::max<std::size_t>(start, 1)) throw std::length_error("history too short for the model lags");
  const auto r = recursion_of(model);
  auto e = residuals(r, w, start);
  std::vector<double> ext(w.begin(), w.end());
  for (int h = 0; h < horizon; ++h) {
    const std::size_t t = ext.size();
    double v = r.mu;
    for (const auto& term : r.ar)
      if (term.lag <= t) v += term.coef * ext[t - term.lag];
    for (const auto& term : r.ma)
      if (term.lag <= t) v += term.coef * e[t - term.lag];
    ext.push_back(v);
    e.push_back(0.0);
  }
  const std::span<const double> future(ext.data() + w.size(), static_cast<std::size_t>(horizon));
  return undo_differencing(history, future, model.spec);
}

std::vector<double> seasonal_naive(std::span<const double> history, int horizon, int period) {
  if (horizon <= 0) throw std::invalid_argument("forecast horizon must be positive");
  if (period < 1 || history.size() < static_cast<std::size_t>(period))
    throw std::length_error("history shorter than one season");
  std::vector<double> out;
  const auto n = static_cast<long>(history.size());
  for (long k = 1; k <= horizon; ++k) {
    const long back = period * ((k + period - 1) / period);
    out.push_back(history[static_cast<std::size_t>(n - 1 + k - back)]);
  }
  return out;
}

std::map<Field, SarimaSpec> ForecastConfig::default_specs() {
  const SarimaSpec price{3, 0, 1, 1, 1, 1, 24};
  const SarimaSpec regd{2, 0, 1, 1, 0, 1, 24};
  return {{Field::lmp, price},     {Field::rmccp, price},  {Field::rmpcp, price},
          {Field::mileage_ratio, price}, {Field::regd_up, regd}, {Field::regd_down, regd}};
}

bool ForecastSeries::used_fallback(Field f) const {
  return std::find(fallback.begin(), fallback.end(), f) != fallback.end();
}

namespace {

bool modelled(Field f, const ForecastConfig& cfg) {
  if (f == Field::perf_score) return false;
  if (f == Field::regd_up || f == Field::regd_down) return cfg.regd == RegdEstimator::sarima;
  return true;
}

}  // namespace

MarketForecaster::MarketForecaster(const MarketSeries& training, const ForecastConfig& config) : config_(config) {
  if (training.size() < 14 * 24) throw std::invalid_argument("forecast training needs at least 14 days of data");
  for (Field f : kForecastFields) {
    if (!modelled(f, config_)) continue;
    const auto it = config_.specs.find(f);
    if (it == config_.specs.end())
      throw std::invalid_argument("no model orders configured for " + std::string(field_name(f)));
    SeriesFit fit;
    const auto raw = training.column(f);
    fit.params = fit_preprocess(raw);
    const auto clipped = clip_outliers(raw, fit.params);
    fit.floor = *std::min_element(clipped.begin(), clipped.end());
    try {
      fit.model = fit_sarima(log_transform(clipped, fit.params.log_offset), it->second, config_.fit);
    } catch (const FitError& e) {
      fit.failure = e.what();
    }
    fits_.emplace(f, std::move(fit));
  }

  double count[24] = {};
  for (const auto& h : training.hours()) {
    const auto hod = static_cast<std::size_t>(hour_of_day(h.timestamp));
    regd_profile_up_[hod] += h.regd_up;
    regd_profile_down_[hod] += h.regd_down;
    count[hod] += 1.0;
  }
  for (std::size_t i = 0; i < 24; ++i) {
    regd_profile_up_[i] /= count[i];
    regd_profile_down_[i] /= count[i];
  }
}

const SarimaModel* MarketForecaster::model(Field f) const {
  const auto it = fits_.find(f);
  return it != fits_.end() && it->second.model ? &*it->second.model : nullptr;
}

std::optional<PreprocessParams> MarketForecaster::preprocess(Field f) const {
  const auto it = fits_.find(f);
  if (it == fits_.end()) return std::nullopt;
  return it->second.params;
}

std::optional<std::string> MarketForecaster::fit_failure(Field f) const {
  const auto it = fits_.find(f);
  return it == fits_.end() ? std::nullopt : it->second.failure;
}

std::vector<double> MarketForecaster::transform(const SeriesFit& fit, std::span<const double> raw) const {
  auto clipped = clip_outliers(raw, fit.params);
  for (double& v : clipped) v = std::max(v, fit.floor);
  return log_transform(clipped, fit.params.log_offset);
}

ForecastSeries MarketForecaster::forecast(const MarketSeries& history, int horizon) const {
  if (horizon <= 0) throw std::invalid_argument("forecast horizon must be positive");
  if (history.size() < 48) throw std::invalid_argument("forecast history needs at least 48 hours");
  ForecastSeries out;
  out.hours.resize(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k)
    out.hours[static_cast<std::size_t>(k)].timestamp = history.back().timestamp + std::chrono::hours{k + 1};

  for (Field f : kForecastFields) {
    std::vector<double> values;
    if (modelled(f, config_)) {
      const auto& fit = fits_.at(f);
      const auto raw = history.column(f);
      bool ok = false;
      if (fit.model) {
        try {
          values = inverse_log_transform(forecast_steps(*fit.model, transform(fit, raw), horizon),
                                         fit.params.log_offset);
          ok = std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
        } catch (const std::length_error&) {
          ok = false;
        }
      }
      if (!ok) {
        values = seasonal_naive(raw, horizon);
        out.fallback.push_back(f);
      }
    } else {
      for (const auto& h : out.hours) {
        const auto hod = static_cast<std::size_t>(hour_of_day(h.timestamp));
        values.push_back(f == Field::regd_up ? regd_profile_up_[hod] : regd_profile_down_[hod]);
      }
    }
    for (std::size_t k = 0; k < values.size(); ++k) out.hours[k].set(f, values[k]);
  }

  for (auto& h : out.hours) {
    h.rmccp = std::max(0.0, h.rmccp);
    h.rmpcp = std::max(0.0, h.rmpcp);
    h.mileage_ratio = std::max(0.0, h.mileage_ratio);
    h.regd_up = std::clamp(h.regd_up, 0.0, 1.0);
    h.regd_down = std::clamp(h.regd_down, 0.0, 1.0);
    const double total = h.regd_up + h.regd_down;
    if (total > 1.0) {
      h.regd_up /= total;
      h.regd_down = std::min(h.regd_down / total, 1.0 - h.regd_up);
    }
    h.perf_score = std::clamp(config_.perf_score, 0.0, 1.0);
  }
  return out;
}

ForecastSeries forecast_market(const MarketSeries& training, const ForecastConfig& config, int horizon) {
  return MarketForecaster(training, config).forecast(training, horizon);
}

}  // namespace evagg
