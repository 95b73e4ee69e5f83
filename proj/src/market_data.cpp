#include "evagg/market_data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace evagg {

using namespace std::chrono;

Hour make_hour(Date day, int hour_of_day) { return Hour{day.time_since_epoch()} + hours{hour_of_day}; }

Date date_of(Hour h) { return floor<days>(h); }

int hour_of_day(Hour h) { return static_cast<int>((h - date_of(h)).count()); }

std::string format_date(Date d) {
  const year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::string format_hour(Hour h) { return fmt::format("{}T{:02d}:00", format_date(date_of(h)), hour_of_day(h)); }

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<Date> try_parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!all_digits(text.substr(0, 4)) || !all_digits(text.substr(5, 2)) || !all_digits(text.substr(8, 2)))
    return std::nullopt;
  parse_int(text.substr(0, 4), y);
  parse_int(text.substr(5, 2), m);
  parse_int(text.substr(8, 2), d);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::optional<Hour> try_parse_hour(std::string_view text) {
  if (text.size() != 16 || text[10] != 'T' || text.substr(13) != ":00") return std::nullopt;
  const auto d = try_parse_date(text.substr(0, 10));
  int h = 0;
  if (!d || !all_digits(text.substr(11, 2)) || !parse_int(text.substr(11, 2), h) || h > 23) return std::nullopt;
  return make_hour(*d, h);
}

std::optional<double> try_parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

constexpr std::array<std::string_view, 8> kColumns = {"timestamp", "lmp",       "rmccp",     "rmpcp",
                                                      "mileage_ratio", "regd_up", "regd_down", "perf_score"};

}  // namespace

Hour parse_hour(std::string_view text) {
  if (auto h = try_parse_hour(text)) return *h;
  throw std::invalid_argument("bad timestamp '" + std::string(text) + "', expected YYYY-MM-DDTHH:00");
}

Date parse_date(std::string_view text) {
  if (auto d = try_parse_date(text)) return *d;
  throw std::invalid_argument("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
}

bool is_weekend(Date d) {
  const weekday w{d};
  return w == Saturday || w == Sunday;
}

std::string_view field_name(Field f) { return kColumns[static_cast<std::size_t>(f) + 1]; }

std::optional<Field> field_from_name(std::string_view name) {
  for (std::size_t i = 1; i < kColumns.size(); ++i) {
    if (kColumns[i] == name) return static_cast<Field>(i - 1);
  }
  return std::nullopt;
}

double MarketHour::get(Field f) const {
  switch (f) {
    case Field::lmp: return lmp;
    case Field::rmccp: return rmccp;
    case Field::rmpcp: return rmpcp;
    case Field::mileage_ratio: return mileage_ratio;
    case Field::regd_up: return regd_up;
    case Field::regd_down: return regd_down;
    case Field::perf_score: return perf_score;
  }
  return 0.0;
}

void MarketHour::set(Field f, double value) {
  switch (f) {
    case Field::lmp: lmp = value; break;
    case Field::rmccp: rmccp = value; break;
    case Field::rmpcp: rmpcp = value; break;
    case Field::mileage_ratio: mileage_ratio = value; break;
    case Field::regd_up: regd_up = value; break;
    case Field::regd_down: regd_down = value; break;
    case Field::perf_score: perf_score = value; break;
  }
}

void validate_market_hour(const MarketHour& h) {
  for (std::size_t i = 0; i < 7; ++i) {
    const auto f = static_cast<Field>(i);
    if (!std::isfinite(h.get(f))) throw MarketDataError(fmt::format("{} is not finite", field_name(f)));
  }
  if (h.rmccp < 0.0) throw MarketDataError("rmccp is negative");
  if (h.rmpcp < 0.0) throw MarketDataError("rmpcp is negative");
  if (h.mileage_ratio < 0.0) throw MarketDataError("mileage_ratio is negative");
  if (h.regd_up < 0.0 || h.regd_up > 1.0) throw MarketDataError("regd_up outside [0,1]");
  if (h.regd_down < 0.0 || h.regd_down > 1.0) throw MarketDataError("regd_down outside [0,1]");
  if (h.regd_up + h.regd_down > 1.0 + 1e-12)
    throw MarketDataError(fmt::format("regd_up + regd_down = {} exceeds 1", h.regd_up + h.regd_down));
  if (h.perf_score < 0.0 || h.perf_score > 1.0) throw MarketDataError("perf_score outside [0,1]");
}

MarketSeries::MarketSeries(std::vector<MarketHour> hours) : hours_(std::move(hours)) {
  for (std::size_t i = 0; i < hours_.size(); ++i) {
    validate_market_hour(hours_[i]);
    if (i > 0 && hours_[i].timestamp != hours_[i - 1].timestamp + 1h)
      throw MarketDataError("series is not contiguous at " + format_hour(hours_[i].timestamp));
  }
}

std::optional<std::size_t> MarketSeries::index_of(Hour h) const {
  if (hours_.empty() || h < hours_.front().timestamp || h > hours_.back().timestamp) return std::nullopt;
  return static_cast<std::size_t>((h - hours_.front().timestamp).count());
}

bool MarketSeries::covers(Hour first, Hour last) const {
  return first <= last && index_of(first).has_value() && index_of(last).has_value();
}

MarketSeries MarketSeries::between(Hour first, Hour last) const {
  if (!covers(first, last))
    throw MarketDataError("market data does not cover " + format_hour(first) + " .. " + format_hour(last));
  MarketSeries out;
  out.hours_.assign(hours_.begin() + static_cast<std::ptrdiff_t>(*index_of(first)),
                    hours_.begin() + static_cast<std::ptrdiff_t>(*index_of(last)) + 1);
  return out;
}

std::vector<double> MarketSeries::column(Field f) const {
  std::vector<double> out;
  out.reserve(hours_.size());
  for (const auto& h : hours_) out.push_back(h.get(f));
  return out;
}

LoadError::LoadError(std::size_t row, const std::string& what)
    : MarketDataError(fmt::format("row {}: {}", row, what)), row_(row) {}

MarketSeries load_market_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MarketDataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw LoadError(0, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i >= header.size() || header[i] != kColumns[i])
      throw LoadError(0, fmt::format("missing column '{}' (header must be '{}')", kColumns[i], kMarketCsvHeader));
  }
  if (header.size() != kColumns.size()) throw LoadError(0, "unexpected extra columns in header");

  struct Row {
    std::size_t number;
    MarketHour hour;
  };
  std::vector<Row> rows;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++number;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() < 7 || cells.size() > 8)
      throw LoadError(number, fmt::format("expected 8 columns, found {}", cells.size()));
    Row row{number, {}};
    const auto ts = try_parse_hour(cells[0]);
    if (!ts) throw LoadError(number, "bad timestamp '" + std::string(cells[0]) + "'");
    row.hour.timestamp = *ts;
    for (std::size_t c = 1; c < 7; ++c) {
      const auto v = try_parse_double(cells[c]);
      if (!v) throw LoadError(number, fmt::format("non-numeric {} '{}'", kColumns[c], cells[c]));
      row.hour.set(static_cast<Field>(c - 1), *v);
    }
    if (cells.size() == 8 && cells[7].find_first_not_of(" \t") != std::string_view::npos) {
      const auto v = try_parse_double(cells[7]);
      if (!v) throw LoadError(number, fmt::format("non-numeric perf_score '{}'", cells[7]));
      row.hour.perf_score = *v;
    }
    try {
      validate_market_hour(row.hour);
    } catch (const MarketDataError& e) {
      throw LoadError(number, e.what());
    }
    rows.push_back(row);
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.hour.timestamp < b.hour.timestamp; });
  std::vector<MarketHour> hours;
  hours.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const auto prev = rows[i - 1].hour.timestamp;
      const auto cur = rows[i].hour.timestamp;
      if (cur == prev) throw LoadError(rows[i].number, "duplicate hour " + format_hour(cur));
      if (cur != prev + 1h)
        throw LoadError(rows[i].number, "gap: " + format_hour(prev + 1h) + " is missing");
    }
    hours.push_back(rows[i].hour);
  }
  return MarketSeries(std::move(hours));
}

void write_market_csv(const MarketSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MarketDataError("cannot write " + path.string());
  out << kMarketCsvHeader << '\n';
  for (const auto& h : series.hours()) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", format_hour(h.timestamp),
                       h.lmp, h.rmccp, h.rmpcp, h.mileage_ratio, h.regd_up, h.regd_down, h.perf_score);
  }
  if (!out) throw MarketDataError("write failed for " + path.string());
}

PreprocessParams fit_preprocess(std::span<const double> training) {
  if (training.empty()) throw std::invalid_argument("empty training window");
  PreprocessParams p;
  double sum = 0.0;
  for (double v : training) sum += v;
  p.mean = sum / static_cast<double>(training.size());
  double ss = 0.0;
  for (double v : training) ss += (v - p.mean) * (v - p.mean);
  p.std = std::sqrt(ss / static_cast<double>(training.size()));
  const auto clipped = clip_outliers(training, p);
  const double lowest = *std::min_element(clipped.begin(), clipped.end());
  p.log_offset = std::max(0.0, -lowest) + 1.0;
  return p;
}

std::vector<double> clip_outliers(std::span<const double> values, const PreprocessParams& params) {
  if (params.std < 0.0) throw std::invalid_argument("negative standard deviation");
  const double lo = params.mean - 3.0 * params.std;
  const double hi = params.mean + 3.0 * params.std;
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  return out;
}

// ln(v + c) written through log1p so that small v survive the round trip.
std::vector<double> log_transform(std::span<const double> values, double offset) {
  if (!(offset > 0.0)) {
    for (double v : values)
      if (!(v + offset > 0.0)) throw std::domain_error(fmt::format("log of non-positive value {}", v + offset));
    std::vector<double> out;
    for (double v : values) out.push_back(std::log(v + offset));
    return out;
  }
  const double log_c = std::log(offset);
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!(v + offset > 0.0)) throw std::domain_error(fmt::format("log of non-positive value {}", v + offset));
    out.push_back(std::log1p(v / offset) + log_c);
  }
  return out;
}

std::vector<double> inverse_log_transform(std::span<const double> values, double offset) {
  std::vector<double> out;
  out.reserve(values.size());
  if (!(offset > 0.0)) {
    for (double v : values) out.push_back(std::exp(v) - offset);
    return out;
  }
  const double log_c = std::log(offset);
  for (double v : values) out.push_back(offset * std::expm1(v - log_c));
  return out;
}

namespace {

class ShapeProcess {
 public:
  explicit ShapeProcess(const SeriesShape& shape) : shape_(shape) {
    for (int h = 0; h < 24; ++h) {
      profile_[static_cast<std::size_t>(h)] =
          shape.base + shape.amplitude * std::cos(2.0 * std::numbers::pi * (h - shape.peak_hour) / 24.0);
    }
  }

  double next(int hour, std::mt19937_64& rng) {
    if (shape_.noise > 0.0) {
      std::normal_distribution<double> eps(0.0, shape_.noise);
      state_ = shape_.ar * state_ + eps(rng);
    }
    return profile_[static_cast<std::size_t>(hour)] + state_;
  }

 private:
  SeriesShape shape_;
  std::array<double, 24> profile_{};
  double state_ = 0.0;
};

}  // namespace

MarketSeries generate_synthetic_market(const SynthConfig& config, std::uint64_t seed) {
  if (config.hours < 48) throw std::invalid_argument("synthetic horizon must be at least 48 hours");
  if (config.regd_up_per_down && !(*config.regd_up_per_down >= 0.0))
    throw std::invalid_argument("regd_up_per_down must be non-negative");
  std::mt19937_64 rng(seed);
  ShapeProcess lmp(config.lmp), rmccp(config.rmccp), rmpcp(config.rmpcp), mileage(config.mileage_ratio),
      up(config.regd_up), down(config.regd_down);

  std::vector<MarketHour> rows;
  rows.reserve(static_cast<std::size_t>(config.hours));
  const Hour first = make_hour(config.start, 0);
  for (int i = 0; i < config.hours; ++i) {
    MarketHour m;
    m.timestamp = first + hours{i};
    const int h = hour_of_day(m.timestamp);
    m.lmp = lmp.next(h, rng);
    m.rmccp = std::max(0.0, rmccp.next(h, rng));
    m.rmpcp = std::max(0.0, rmpcp.next(h, rng));
    m.mileage_ratio = std::max(0.0, mileage.next(h, rng));
    m.regd_up = std::clamp(up.next(h, rng), 0.0, 1.0);
    m.regd_down = std::clamp(down.next(h, rng), 0.0, 1.0);
    if (config.regd_up_per_down) m.regd_up = std::clamp(*config.regd_up_per_down * m.regd_down, 0.0, 1.0);
    const double total = m.regd_up + m.regd_down;
    if (total > 1.0) {
      m.regd_up /= total;
      m.regd_down = std::min(m.regd_down / total, 1.0 - m.regd_up);
    }
    m.perf_score = 1.0;
    rows.push_back(m);
  }
  return MarketSeries(std::move(rows));
}

}  // namespace evagg
