#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "evagg/market_data.hpp"

using namespace evagg;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "evagg_test_market";
  fs::create_directories(dir);
  return dir / name;
}

std::string csv_row(const std::string& ts, double up = 0.3, double down = 0.3) {
  return ts + ",30,20,2,3," + std::to_string(up) + "," + std::to_string(down) + ",1\n";
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

// Lag-k sample autocorrelation.
double acf(const std::vector<double>& x, std::size_t lag) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i + lag < x.size()) num += (x[i] - mean) * (x[i + lag] - mean);
  }
  return num / den;
}

}  // namespace

TEST_CASE("calendar helpers") {
  const Hour h = parse_hour("2018-02-26T16:00");
  CHECK(format_hour(h) == "2018-02-26T16:00");
  CHECK(hour_of_day(h) == 16);
  CHECK(format_date(date_of(h)) == "2018-02-26");
  CHECK_FALSE(is_weekend(parse_date("2018-02-26")));
  CHECK(is_weekend(parse_date("2018-03-03")));
  CHECK(is_weekend(parse_date("2018-03-04")));
  CHECK(format_hour(make_hour(parse_date("2018-12-31"), 23) + std::chrono::hours{1}) == "2019-01-01T00:00");
  CHECK_THROWS_AS(parse_hour("2018-02-26 16:00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_hour("2018-02-30T01:00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_hour("2018-02-26T24:00"), std::invalid_argument);
}

TEST_CASE("load a well-formed day") {
  const auto path = temp_file("ok.csv");
  std::string text(kMarketCsvHeader);
  text += "\n";
  for (int h = 0; h < 24; ++h) text += csv_row(format_hour(make_hour(parse_date("2018-03-01"), h)));
  write_text(path, text);
  const auto s = load_market_csv(path);
  CHECK(s.size() == 24);
  CHECK(s[5].lmp == 30.0);
  CHECK(hour_of_day(s.back().timestamp) == 23);
}

TEST_CASE("empty perf_score defaults to one and rows are sorted") {
  const auto path = temp_file("unsorted.csv");
  std::string text(kMarketCsvHeader);
  text += "\n2018-03-01T01:00,1,2,3,4,0.1,0.2,\n2018-03-01T00:00,1,2,3,4,0.1,0.2,0.5\n";
  write_text(path, text);
  const auto s = load_market_csv(path);
  REQUIRE(s.size() == 2);
  CHECK(s[0].perf_score == 0.5);
  CHECK(s[1].perf_score == 1.0);
}

TEST_CASE("a missing hour is reported at the row after the gap") {
  const auto path = temp_file("gap.csv");
  std::string text(kMarketCsvHeader);
  text += "\n";
  for (int h = 0; h < 24; ++h) {
    if (h == 5) continue;
    text += csv_row(format_hour(make_hour(parse_date("2018-03-01"), h)));
  }
  write_text(path, text);
  try {
    (void)load_market_csv(path);
    FAIL("expected a gap error");
  } catch (const LoadError& e) {
    CHECK(e.row() == 6);
    CHECK(std::string(e.what()).find("gap") != std::string::npos);
  }
}

TEST_CASE("load errors") {
  const auto path = temp_file("bad.csv");
  const std::string header(kMarketCsvHeader);

  write_text(path, header + "\n" + csv_row("2018-03-01T00:00", 0.7, 0.5));
  CHECK_THROWS_AS(load_market_csv(path), LoadError);

  write_text(path, "timestamp,lmp,rmccp,rmpcp,mileage_ratio,regd_up,perf_score\n");
  CHECK_THROWS_AS(load_market_csv(path), LoadError);

  write_text(path, header + "\n2018-03-01T00:00,abc,1,1,1,0.1,0.1,1\n");
  try {
    (void)load_market_csv(path);
    FAIL("expected an error");
  } catch (const LoadError& e) {
    CHECK(e.row() == 1);
  }

  write_text(path, header + "\n" + csv_row("2018-03-01T00:00") + csv_row("2018-03-01T00:00"));
  CHECK_THROWS_AS(load_market_csv(path), LoadError);

  write_text(path, header + "\n2018-03-01T00:00,1,-1,1,1,0.1,0.1,1\n");
  CHECK_THROWS_AS(load_market_csv(path), LoadError);

  CHECK_THROWS_AS(load_market_csv(temp_file("does_not_exist.csv")), MarketDataError);
}

TEST_CASE("csv round trip is exact") {
  SynthConfig cfg;
  cfg.hours = 72;
  const auto s = generate_synthetic_market(cfg, 11);
  const auto path = temp_file("roundtrip.csv");
  write_market_csv(s, path);
  const auto back = load_market_csv(path);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (auto f : kForecastFields) CHECK(back[i].get(f) == s[i].get(f));
    CHECK(back[i].timestamp == s[i].timestamp);
  }
}

TEST_CASE("series slicing") {
  SynthConfig cfg;
  cfg.hours = 96;
  const auto s = generate_synthetic_market(cfg, 1);
  const Hour a = make_hour(cfg.start + std::chrono::days{1}, 7);
  const Hour b = make_hour(cfg.start + std::chrono::days{1}, 19);
  const auto day = s.between(a, b);
  CHECK(day.size() == 13);
  CHECK(day.front().timestamp == a);
  CHECK_THROWS_AS(s.between(a, b + std::chrono::hours{1000}), MarketDataError);
}

TEST_CASE("clip examples") {
  CHECK(clip_outliers(std::vector<double>{5, 5, 5}, {5.0, 0.0, 1.0}) == std::vector<double>{5, 5, 5});
  const auto out = clip_outliers(std::vector<double>{20.0, -20.0, 11.0}, {10.0, 2.0, 1.0});
  CHECK(out[0] == 16.0);
  CHECK(out[1] == 4.0);
  CHECK(out[2] == 11.0);
  CHECK_THROWS_AS(clip_outliers(std::vector<double>{1.0}, {0.0, -1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("clip is bounded, idempotent and monotone") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> spike(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(50), y(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = 10.0 * noise(rng) + (spike(rng) < 0.05 ? 500.0 : 0.0);
      y[i] = x[i] + std::abs(noise(rng));
    }
    const auto p = fit_preprocess(x);
    const auto cx = clip_outliers(x, p);
    const auto cy = clip_outliers(y, p);
    CHECK(clip_outliers(cx, p) == cx);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(cx[i] >= p.mean - 3 * p.std);
      CHECK(cx[i] <= p.mean + 3 * p.std);
      CHECK(cx[i] <= cy[i]);
    }
  }
}

TEST_CASE("preprocess parameters") {
  const std::vector<double> x{-3.0, 1.0, 2.0};
  const auto p = fit_preprocess(x);
  CHECK(p.mean == doctest::Approx(0.0));
  CHECK(p.std == doctest::Approx(std::sqrt(14.0 / 3.0)));
  CHECK(p.log_offset == doctest::Approx(4.0));
  CHECK(fit_preprocess(std::vector<double>{2.0, 3.0}).log_offset == 1.0);
  CHECK_THROWS_AS(fit_preprocess(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("log transform examples") {
  CHECK(log_transform(std::vector<double>{0.0}, 1.0)[0] == 0.0);
  CHECK(log_transform(std::vector<double>{std::numbers::e - 1.0}, 1.0)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(inverse_log_transform(std::vector<double>{0.0}, 1.0)[0] == 0.0);
  CHECK(inverse_log_transform(std::vector<double>{1.0}, 1.0)[0] ==
        doctest::Approx(std::numbers::e - 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(log_transform(std::vector<double>{-2.0}, 1.0), std::domain_error);
}

TEST_CASE("log round trip") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  std::uniform_real_distribution<double> off(1.0, 50.0);
  std::vector<double> x(10000);
  for (double& v : x) v = u(rng);
  x[0] = 0.0;
  x[1] = 1e-9;
  for (double c : {1.0, off(rng)}) {
    const auto back = inverse_log_transform(log_transform(x, c), c);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (c != 1.0 && x[i] < 1.0) continue;
      CHECK(std::abs(back[i] - x[i]) <= 1e-12 * std::max(std::abs(x[i]), 1e-300));
    }
  }
}

TEST_CASE("synthetic market invariants and determinism") {
  SynthConfig cfg;
  const auto a = generate_synthetic_market(cfg, 42);
  const auto b = generate_synthetic_market(cfg, 42);
  REQUIRE(a.size() == 1440);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (auto f : kForecastFields) CHECK(a[i].get(f) == b[i].get(f));
    CHECK_NOTHROW(validate_market_hour(a[i]));
  }
  const auto c = generate_synthetic_market(cfg, 43);
  CHECK(a[100].lmp != c[100].lmp);

  cfg.hours = 47;
  CHECK_THROWS_AS(generate_synthetic_market(cfg, 1), std::invalid_argument);
}

TEST_CASE("noise-free synthetic market is exactly periodic") {
  SynthConfig cfg;
  cfg.hours = 24 * 5;
  for (SeriesShape* s : {&cfg.lmp, &cfg.rmccp, &cfg.rmpcp, &cfg.mileage_ratio, &cfg.regd_up, &cfg.regd_down})
    s->noise = 0.0;
  const auto s = generate_synthetic_market(cfg, 3);
  for (std::size_t i = 0; i + 24 < s.size(); ++i)
    for (auto f : kForecastFields) CHECK(s[i].get(f) == s[i + 24].get(f));
}

TEST_CASE("synthetic LMP has daily autocorrelation") {
  SynthConfig cfg;
  cfg.hours = 24 * 30;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = generate_synthetic_market(cfg, seed);
    CHECK(acf(s.column(Field::lmp), 24) > 0.5);
  }
}
