#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sariwatch/detection.hpp"

using namespace sariwatch;

namespace {

TimeSeries series(const std::vector<double>& xs, const std::string& region = "SP") {
  return TimeSeries({region, Measure::cases},
                    Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size())));
}

// y_i - mean(y_{i-p+1..i}) for i = p..n, written out directly.
std::vector<double> naive_noise(const std::vector<double>& y, std::size_t p) {
  std::vector<double> out;
  for (std::size_t i = p; i <= y.size(); ++i) {
    std::vector<double> window(y.begin() + static_cast<long>(i - p), y.begin() + static_cast<long>(i));
    out.push_back(y[i - 1] - oracle::mean(window));
  }
  return out;
}

std::vector<double> level_shift(std::mt19937_64& gen, int before, int after, double jump) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y;
  for (int k = 0; k < before + after; ++k) y.push_back(100.0 + (k >= before ? jump : 0.0) + noise(gen));
  return y;
}

}  // namespace

TEST_CASE("adaptive normalization: constant series has no anomalies") {
  CHECK(adaptive_normalization(series(std::vector<double>(120, 9.0)), 30).anomalies.empty());
}

TEST_CASE("adaptive normalization finds a single spike on a seasonal series") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> noise(0.0, 5.0);
  std::vector<double> y;
  for (int i = 1; i <= 520; ++i) {
    y.push_back(200.0 + 20.0 * std::sin(2.0 * std::numbers::pi * i / 52.0) + noise(gen));
  }
  const std::size_t p = 8;
  const auto clean = naive_noise(y, p);
  const double sigma = std::sqrt([&] {
    const double mu = oracle::mean(clean);
    double ss = 0.0;
    for (double e : clean) ss += (e - mu) * (e - mu);
    return ss / static_cast<double>(clean.size() - 1);
  }());

  const Index spike = 301;
  y[spike - 1] += 10.0 * sigma;

  const auto eps = naive_noise(y, p);
  std::vector<Index> expected;
  for (long k : oracle::fence_outliers(eps, 3.0)) expected.push_back(static_cast<Index>(k) + static_cast<Index>(p));
  REQUIRE(expected == std::vector<Index>{spike});

  const auto detail = adaptive_normalization_detail(series(y), static_cast<Index>(p));
  CHECK(detail.events.anomalies == expected);
  CHECK(detail.events.change_points.empty());
  REQUIRE(detail.noise.values.size() == static_cast<Index>(eps.size()));
  for (std::size_t k = 0; k < eps.size(); ++k) {
    CHECK(detail.noise.values(static_cast<Index>(k)) == doctest::Approx(eps[k]).epsilon(1e-12));
  }
}

TEST_CASE("adaptive normalization edge lengths") {
  CHECK(adaptive_normalization(series({1, 5, 2, 8}), 4).anomalies.empty());
  CHECK_THROWS_AS(adaptive_normalization(series({1, 5, 2}), 4), BoundsError);
}

TEST_CASE("change finder: constant series gives no events and zero scores") {
  const auto r = change_finder_detail(series(std::vector<double>(100, 42.0)), 4, 30);
  CHECK(r.events.anomalies.empty());
  CHECK(r.events.change_points.empty());
  CHECK(r.scores.values.maxCoeff() == 0.0);
  CHECK(r.scores.first == 30);
  CHECK(r.smoothed.first == 33);
}

TEST_CASE("change finder scores vanish on an affine series") {
  std::vector<double> y;
  for (int i = 1; i <= 150; ++i) y.push_back(3.0 + 2.0 * i);
  for (Index m : {2, 7, 30}) {
    const auto r = change_finder_detail(series(y), 4, m);
    for (Index k = 0; k < r.scores.values.size(); ++k) CHECK(r.scores.values(k) == 0.0);
  }
}

TEST_CASE("change finder scores match normal-equation OLS residuals") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  std::vector<double> y(120);
  for (double& v : y) v = u(gen);
  const Index m = 30;
  const auto r = change_finder_detail(series(y), 6, m);
  for (Index i = m; i <= 120; ++i) {
    const std::vector<double> window(y.begin() + (i - m), y.begin() + i);
    const double res = oracle::ols_last_residual(window);
    CHECK(r.scores.values(i - m) == doctest::Approx(res * res).epsilon(1e-9));
  }
  // smoothed scores are the 6-term simple average of the raw scores
  for (Index k = 0; k < r.smoothed.values.size(); ++k) {
    CHECK(r.smoothed.values(k) ==
          doctest::Approx(r.scores.values.segment(k, 6).mean()).epsilon(1e-12));
  }
}

TEST_CASE("change finder locates a level shift within p weeks") {
  const Index p = 4;
  const Index m = 30;
  const int before = 200;
  const Index shift = before + 1;  // first shifted week
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed);
    const auto y = level_shift(gen, before, 100, 50.0);
    const auto events = change_finder(series(y), p, m);
    const bool near = std::any_of(events.change_points.begin(), events.change_points.end(),
                                  [&](Index i) { return i >= shift - p && i <= shift + p; });
    hits += near;
  }
  CHECK(hits >= 95);
}

TEST_CASE("detectors are invariant under adding a constant") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> draw(0, 40);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> y(160);
    for (double& v : y) v = draw(gen);
    for (std::size_t k = 100; k < y.size(); ++k) y[k] += 60;
    std::vector<double> z = y;
    for (double& v : z) v += 1000;

    const auto a = change_finder(series(y), 4, 30);
    const auto b = change_finder(series(z), 4, 30);
    CHECK(a.anomalies == b.anomalies);
    CHECK(a.change_points == b.change_points);
    CHECK(adaptive_normalization(series(y), 10).anomalies ==
          adaptive_normalization(series(z), 10).anomalies);
  }
}

TEST_CASE("change finder outputs are deterministic, sorted and disjoint") {
  std::mt19937_64 gen(8);
  const auto y = level_shift(gen, 150, 80, 40.0);
  const auto a = change_finder_detail(series(y), 4, 30);
  const auto b = change_finder_detail(series(y), 4, 30);
  CHECK(a.events.anomalies == b.events.anomalies);
  CHECK(a.events.change_points == b.events.change_points);
  CHECK(std::is_sorted(a.events.change_points.begin(), a.events.change_points.end()));
  CHECK(std::is_sorted(a.events.anomalies.begin(), a.events.anomalies.end()));
  for (Index i : a.events.anomalies) {
    CHECK_FALSE(std::binary_search(a.events.change_points.begin(), a.events.change_points.end(), i));
  }
  CHECK(a.events.change_points == collapse_runs(a.raw_change_points));
}

TEST_CASE("change finder needs m + p observations") {
  CHECK_THROWS_AS(change_finder(series(std::vector<double>(33, 1.0)), 4, 30), BoundsError);
  CHECK_NOTHROW(change_finder(series(std::vector<double>(34, 1.0)), 4, 30));
  CHECK_THROWS_AS(change_finder(series(std::vector<double>(34, 1.0)), 4, 1), BoundsError);
}

TEST_CASE("collapse_runs keeps the first index of each run") {
  CHECK(collapse_runs({}).empty());
  CHECK(collapse_runs({4, 5, 6, 9, 11, 12}) == std::vector<Index>{4, 9, 11});
}

TEST_CASE("consolidate_events keeps both kinds separately") {
  const SeriesLabel label{"RJ", Measure::deaths};
  EventSet an{label, {}, {}, 30, 0};
  EventSet cf{label, {}, {}, 30, 30};
  CHECK(consolidate_events(an, cf).anomalies.empty());
  CHECK(consolidate_events(an, cf).change_points.empty());

  an.anomalies = {5};
  cf.change_points = {5};
  auto merged = consolidate_events(an, cf);
  CHECK(merged.anomalies == std::vector<Index>{5});
  CHECK(merged.change_points == std::vector<Index>{5});

  an.anomalies = {3};
  cf.change_points = {7};
  merged = consolidate_events(an, cf);
  CHECK(merged.anomalies == std::vector<Index>{3});
  CHECK(merged.change_points == std::vector<Index>{7});
  CHECK(merged.label == label);

  cf.label.region = "SP";
  CHECK_THROWS_AS(consolidate_events(an, cf), DomainError);
}
