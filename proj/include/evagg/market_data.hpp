#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evagg {

/// Naive local calendar hour (no time zone arithmetic).
using Hour = std::chrono::sys_time<std::chrono::hours>;
using Date = std::chrono::sys_days;

Hour make_hour(Date day, int hour_of_day);
Date date_of(Hour h);
int hour_of_day(Hour h);

/// `YYYY-MM-DDTHH:00`
std::string format_hour(Hour h);
Hour parse_hour(std::string_view text);
/// `YYYY-MM-DD`
std::string format_date(Date d);
Date parse_date(std::string_view text);
bool is_weekend(Date d);

enum class Field { lmp, rmccp, rmpcp, mileage_ratio, regd_up, regd_down, perf_score };

inline constexpr Field kForecastFields[] = {Field::lmp,           Field::rmccp,   Field::rmpcp,
                                            Field::mileage_ratio, Field::regd_up, Field::regd_down};

std::string_view field_name(Field f);
std::optional<Field> field_from_name(std::string_view name);

struct MarketHour {
  Hour timestamp{};
  double lmp = 0.0;            // $/MWh, may be negative
  double rmccp = 0.0;          // $/MW-h
  double rmpcp = 0.0;          // $/MW-h
  double mileage_ratio = 0.0;  // beta
  double regd_up = 0.0;        // fraction of the hour spent moving up
  double regd_down = 0.0;      // fraction of the hour spent moving down
  double perf_score = 1.0;

  double get(Field f) const;
  void set(Field f, double value);
};

class MarketDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws MarketDataError naming the first violated invariant.
void validate_market_hour(const MarketHour& h);

/// Contiguous, strictly hourly sequence of observations.
class MarketSeries {
 public:
  MarketSeries() = default;
  explicit MarketSeries(std::vector<MarketHour> hours);

  std::span<const MarketHour> hours() const { return hours_; }
  std::size_t size() const { return hours_.size(); }
  bool empty() const { return hours_.empty(); }
  const MarketHour& operator[](std::size_t i) const { return hours_[i]; }
  const MarketHour& front() const { return hours_.front(); }
  const MarketHour& back() const { return hours_.back(); }

  std::optional<std::size_t> index_of(Hour h) const;
  bool covers(Hour first, Hour last) const;
  /// Hours in [first, last], both inclusive. Throws if not covered.
  MarketSeries between(Hour first, Hour last) const;
  std::vector<double> column(Field f) const;

 private:
  std::vector<MarketHour> hours_;
};

class LoadError : public MarketDataError {
 public:
  LoadError(std::size_t row, const std::string& what);
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

inline constexpr std::string_view kMarketCsvHeader =
    "timestamp,lmp,rmccp,rmpcp,mileage_ratio,regd_up,regd_down,perf_score";

/// Errors name the data row (first row after the header is 1; header problems are row 0).
MarketSeries load_market_csv(const std::filesystem::path& path);
void write_market_csv(const MarketSeries& series, const std::filesystem::path& path);

struct PreprocessParams {
  double mean = 0.0;
  double std = 0.0;
  double log_offset = 1.0;
};

/// Mean, population standard deviation and log offset of a training window.
PreprocessParams fit_preprocess(std::span<const double> training);

std::vector<double> clip_outliers(std::span<const double> values, const PreprocessParams& params);
std::vector<double> log_transform(std::span<const double> values, double offset);
std::vector<double> inverse_log_transform(std::span<const double> values, double offset);

/// Daily sinusoid plus AR(1) noise for one synthetic quantity.
struct SeriesShape {
  double base = 0.0;
  double amplitude = 0.0;  // half peak-to-trough of the daily cycle
  double peak_hour = 0.0;
  double ar = 0.0;
  double noise = 0.0;      // innovation standard deviation
};

struct SynthConfig {
  Date start = parse_date("2018-01-01");
  int hours = 24 * 60;
  SeriesShape lmp{32.0, 10.0, 17.0, 0.8, 3.0};
  SeriesShape rmccp{28.0, 12.0, 18.0, 0.8, 4.0};
  SeriesShape rmpcp{3.0, 1.0, 18.0, 0.7, 0.5};
  SeriesShape mileage_ratio{3.0, 0.8, 10.0, 0.7, 0.4};
  SeriesShape regd_up{0.30, 0.04, 8.0, 0.6, 0.05};
  SeriesShape regd_down{0.32, 0.04, 20.0, 0.6, 0.05};
  /// When set, regd_up is this multiple of regd_down instead of its own series.
  std::optional<double> regd_up_per_down;
};

MarketSeries generate_synthetic_market(const SynthConfig& config, std::uint64_t seed);

}  // namespace evagg
