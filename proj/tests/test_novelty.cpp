#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sariwatch/novelty.hpp"

using namespace sariwatch;

namespace {

constexpr Index kSeason = 52;

TimeSeries series(const std::vector<double>& xs) {
  return TimeSeries({"AM", Measure::cases},
                    Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size())));
}

// One season of values repeated n times, so every seasonal predecessor agrees.
std::vector<double> tiled(Index n, std::uint64_t seed = 3) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> draw(200, 600);
  std::vector<double> season(kSeason);
  for (double& v : season) v = draw(gen);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = season[k % kSeason];
  return y;
}

Eigen::VectorXd vec(const std::vector<double>& xs) {
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size()));
}

NoiseSummary fixed_noise(double mean, double lo, double hi) {
  NoiseSummary n;
  n.mean = mean;
  n.ci.mean = mean;
  n.ci.lo = lo;
  n.ci.hi = hi;
  return n;
}

}  // namespace

TEST_CASE("baseline of a constant series is the constant") {
  const auto y = series(std::vector<double>(300, 12.5));
  const auto b = build_baseline(y, 4, kSeason, {209, 300});
  CHECK(b.predicted.size() == 92);
  for (Index i = 209; i <= 300; ++i) CHECK(b.at(i) == 12.5);
}

TEST_CASE("baseline weights the four seasonal predecessors 0.216, 0.36, 0.6, 1") {
  std::vector<double> y(260, 10.0);
  y[52 - 1] = 1;
  y[104 - 1] = 2;
  y[156 - 1] = 3;
  y[208 - 1] = 4;
  const auto b = build_baseline(series(y), 4, kSeason, {260, 260});
  const double by_hand = (0.216 * 1 + 0.36 * 2 + 0.6 * 3 + 1.0 * 4) / 2.176;
  CHECK(by_hand == doctest::Approx(3.0956).epsilon(1e-4));
  CHECK(b.at(260) == doctest::Approx(by_hand).epsilon(1e-14));
  CHECK(b.at(260) == doctest::Approx(oracle::exponential_average({1, 2, 3, 4})).epsilon(1e-14));
}

TEST_CASE("baseline needs p seasons of history") {
  const auto y = series(std::vector<double>(300, 1.0));
  CHECK_THROWS_WITH_AS(build_baseline(y, 4, kSeason, {208, 300}), doctest::Contains("208"), BoundsError);
  CHECK_THROWS_AS(build_baseline(y, 4, kSeason, {209, 301}), BoundsError);
  CHECK_THROWS_AS(build_baseline(y, 4, kSeason, {209, 300}).at(208), BoundsError);
}

TEST_CASE("default noise window covers four seasons before t") {
  CHECK(default_noise_window(584, 4, 52) == IndexRange{376, 583});
  // clipped to the first week with a baseline
  CHECK(default_noise_window(300, 4, 52) == IndexRange{209, 299});
}

TEST_CASE("pre-novelty noise") {
  const Index t = 400;
  SUBCASE("series equal to its baseline has zero noise") {
    const auto y = series(tiled(450));
    const auto b = build_baseline(y, 4, kSeason, {209, 450});
    const auto n = pre_novelty_noise(y, b, default_noise_window(t, 4, kSeason), t, {});
    CHECK(n.residuals.cwiseAbs().maxCoeff() == 0.0);
    CHECK(n.mean == 0.0);
    CHECK(n.ci.lo == 0.0);
    CHECK(n.ci.hi == 0.0);
  }
  SUBCASE("injected N(2, 1) residuals are recovered") {
    auto values = tiled(450);
    std::mt19937_64 gen(17);
    const auto injected = oracle::normal_sample(gen, 50, 2.0, 1.0);
    for (Index k = 0; k < 50; ++k) values[static_cast<std::size_t>(t - 50 + k - 1)] += injected[static_cast<std::size_t>(k)];
    const auto y = series(values);
    const auto b = build_baseline(y, 4, kSeason, {209, 450});
    const auto n = pre_novelty_noise(y, b, {t - 50, t - 1}, t, {1000, 0.95, 1});
    for (Index k = 0; k < 50; ++k) CHECK(n.residuals(k) == doctest::Approx(injected[static_cast<std::size_t>(k)]));
    CHECK(n.mean == doctest::Approx(oracle::mean(injected)));
    CHECK(std::abs(n.mean - 2.0) < 0.5);
    CHECK(n.ci.lo <= n.mean + 1e-9);
    CHECK(n.mean <= n.ci.hi + 1e-9);
  }
  SUBCASE("window errors") {
    const auto y = series(tiled(450));
    const auto b = build_baseline(y, 4, kSeason, {209, 450});
    CHECK_THROWS_AS(pre_novelty_noise(y, b, {t - 1, t - 1}, t, {}), DomainError);
    CHECK_THROWS_AS(pre_novelty_noise(y, b, {t - 10, t}, t, {}), DomainError);
    CHECK_THROWS_AS(pre_novelty_noise(y, b, {t, t - 1}, t, {}), DomainError);
  }
}

TEST_CASE("novelty is observed minus baseline minus mean noise, unclamped") {
  const Index t = 420;
  auto values = tiled(450);
  const auto y0 = series(values);
  const auto b0 = build_baseline(y0, 4, kSeason, {209, 450});
  CHECK(novelty_series(y0, b0, 0.0, t).cwiseAbs().maxCoeff() == 0.0);

  for (Index i = t; i <= 450; ++i) values[static_cast<std::size_t>(i - 1)] += 100;
  const auto y1 = series(values);
  const auto b1 = build_baseline(y1, 4, kSeason, {209, 450});
  const Eigen::VectorXd eta = novelty_series(y1, b1, 0.0, t);
  CHECK(eta.size() == 31);
  for (Index k = 0; k < eta.size(); ++k) CHECK(eta(k) == 100.0);

  // a noise mean above the added novelty leaves negative values in place
  CHECK(novelty_series(y1, b1, 150.0, t).maxCoeff() == -50.0);
}

TEST_CASE("under-reporting arithmetic") {
  SUBCASE("one-week cumulative goldens") {
    const auto am = under_report(vec({3824}), vec({2165}));
    CHECK(am.cur(0) == 1659.0);
    REQUIRE(am.rate);
    CHECK(std::abs(*am.rate - 0.766) <= 0.0005);

    const auto mg = under_report(vec({3553}), vec({484}));
    REQUIRE(mg.rate);
    CHECK(std::abs(*mg.rate - 6.341) <= 0.0005);
  }
  SUBCASE("novelty equal to reported gives zero") {
    const auto r = under_report(vec({5, 9, 0, 14}), vec({5, 9, 0, 14}));
    REQUIRE(r.rate);
    CHECK(*r.rate == 0.0);
    CHECK(r.sub.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("no reported observations leaves the rate undefined") {
    const auto r = under_report(vec({10, 20, 30}), vec({0, 0, 0}));
    CHECK_FALSE(r.rate.has_value());
    CHECK(std::isnan(r.tx(2)));
    CHECK(r.cum_novelty == 60.0);
    CHECK(r.cur(2) == 60.0);
  }
  SUBCASE("tx stays NaN until the first reported week") {
    const auto r = under_report(vec({10, 20, 30}), vec({0, 4, 6}));
    CHECK(std::isnan(r.tx(0)));
    CHECK(r.tx(1) == doctest::Approx((10 + 20 - 4) / 4.0));
    CHECK(*r.rate == doctest::Approx((60 - 10) / 10.0));
  }
  SUBCASE("length mismatch and empty windows") {
    CHECK_THROWS_AS(under_report(vec({1, 2}), vec({1})), DomainError);
    CHECK_THROWS_AS(under_report(Eigen::VectorXd(), Eigen::VectorXd()), DomainError);
  }
}

TEST_CASE("cur telescopes and tx is scale invariant") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> draw(-50.0, 400.0);
  std::uniform_real_distribution<double> reported(0.0, 200.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + trial % 12;
    Eigen::VectorXd eta(n);
    Eigen::VectorXd cov(n);
    for (Index k = 0; k < n; ++k) {
      eta(k) = draw(gen);
      cov(k) = reported(gen);
    }
    const auto r = under_report(eta, cov);
    CHECK(r.cur(0) == r.sub(0));
    for (Index k = 1; k < n; ++k) CHECK(r.cur(k) - r.cur(k - 1) == doctest::Approx(r.sub(k)));
    CHECK(r.cur(n - 1) == doctest::Approx(r.cum_novelty - r.cum_reported));

    const double lambda = 0.25 + trial;
    const auto scaled = under_report((lambda * eta).eval(), (lambda * cov).eval());
    CHECK(*scaled.rate == doctest::Approx(*r.rate).epsilon(1e-12));
  }
}

TEST_CASE("rate margin from the noise interval endpoints") {
  const Index t = 420;
  auto values = tiled(450);
  for (Index i = t; i <= 450; ++i) values[static_cast<std::size_t>(i - 1)] += 300;
  const auto y = series(values);
  const auto b = build_baseline(y, 4, kSeason, {209, 450});
  const Eigen::VectorXd cov = Eigen::VectorXd::Constant(31, 100.0);

  const auto flat = rate_with_margin(y, b, fixed_noise(4.0, 4.0, 4.0), cov, t);
  REQUIRE(flat.rate);
  CHECK(*flat.rate == doctest::Approx((31 * (300 - 4.0) - 3100) / 3100.0));
  CHECK(flat.margin == 0.0);

  double previous = 0.0;
  for (double delta : {0.5, 1.0, 2.0, 8.0}) {
    const auto r = rate_with_margin(y, b, fixed_noise(4.0, 4.0 - delta, 4.0 + delta), cov, t);
    CHECK(*r.rate == *flat.rate);
    // each endpoint moves cumulative novelty by delta per week
    CHECK(r.margin == doctest::Approx(delta * 31 / 3100.0));
    CHECK(r.margin > previous);
    previous = r.margin;
  }

  const auto none = rate_with_margin(y, b, fixed_noise(4.0, 3.0, 5.0), Eigen::VectorXd::Zero(31), t);
  CHECK_FALSE(none.rate.has_value());
  CHECK(none.margin == 0.0);
}

TEST_CASE("significance gates") {
  SUBCASE("novelty equal to the mean noise fails the novelty gate with p = 1") {
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(7, 3.5);
    const Eigen::VectorXd cov = Eigen::VectorXd::Constant(7, 1.0);
    const auto g = significance_gates(eta, fixed_noise(3.5, 3.0, 4.0), cov, 100, {});
    CHECK(g.novelty.p_value == 1.0);
    CHECK_FALSE(g.novelty_significant);
  }
  SUBCASE("novelty equal to reported fails the under-reporting gate") {
    const Eigen::VectorXd eta = vec({50, 60, 70, 80, 90, 100, 110});
    const auto g = significance_gates(eta, fixed_noise(0.0, -1.0, 1.0), eta, 100, {});
    CHECK(g.underreport.p_value == 1.0);
    CHECK_FALSE(g.underreport_significant);
    // seven strictly positive differences: 2/128 two-sided
    CHECK(g.novelty.p_value == 2.0 / 128.0);
    CHECK(g.novelty_significant);
  }
  SUBCASE("paired form pairs each week with the residual one season earlier") {
    const Index t = 300;
    NoiseSummary noise = fixed_noise(0.0, 0.0, 0.0);
    noise.window = {240, 299};
    noise.residuals = Eigen::VectorXd::Zero(60);
    for (Index k = 0; k < 60; ++k) noise.residuals(k) = static_cast<double>(k % 5);
    const Eigen::VectorXd eta = vec({1, 2, 3, 4, 5, 6, 7, 8});
    GateOptions opts;
    opts.noise_form = NoiseGateForm::paired;
    opts.s = 52;
    const auto g = significance_gates(eta, noise, Eigen::VectorXd::Zero(8), t, opts);

    std::vector<double> lagged;
    for (Index k = 0; k < 8; ++k) lagged.push_back(noise.at(t + k - 52));
    const std::vector<double> e(eta.data(), eta.data() + 8);
    CHECK(g.novelty.p_value == doctest::Approx(oracle::wilcoxon_two_sided_bruteforce(e, lagged)));

    opts.s = 80;  // reaches before the noise window
    CHECK_THROWS_AS(significance_gates(eta, noise, Eigen::VectorXd::Zero(8), t, opts), BoundsError);
  }
}

TEST_CASE("estimate_novelty end to end on a seasonal series with an outbreak") {
  const Index n = 460;
  const Index t = 440;
  auto values = tiled(n, 9);
  std::mt19937_64 gen(2);
  const auto noise = oracle::normal_sample(gen, static_cast<std::size_t>(n), 0.0, 3.0);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = std::round(values[k] + noise[k]);
  std::vector<double> reported(values.size(), 0.0);
  for (Index i = t; i <= n; ++i) {
    const double outbreak = 40.0 * static_cast<double>(i - t + 1);
    values[static_cast<std::size_t>(i - 1)] += outbreak;
    reported[static_cast<std::size_t>(i - 1)] = std::round(outbreak / 4.0);
  }
  NoveltyConfig config;
  config.t = t;
  const auto r = estimate_novelty(series(values), series(reported), config);

  CHECK(r.baseline.range == IndexRange{t - 4 * kSeason, n});
  CHECK(r.noise.window == IndexRange{t - 4 * kSeason, t - 1});
  REQUIRE(r.weeks.size() == 21);
  for (const auto& w : r.weeks) {
    // closure: observed = baseline + novelty + mean noise
    CHECK(w.observed - w.baseline - w.novelty - r.noise.mean == doctest::Approx(0.0).epsilon(1e-9));
  }
  CHECK(r.weeks.back().cur == doctest::Approx(r.cum_novelty - r.cum_reported));
  CHECK(r.gates.novelty_significant);
  CHECK(r.gates.underreport_significant);
  CHECK(r.withheld == Withheld::none);
  REQUIRE(r.rate());
  CHECK(*r.rate() == doctest::Approx(3.0).epsilon(0.05));
  CHECK(r.margin > 0.0);

  SUBCASE("deterministic") {
    const auto again = estimate_novelty(series(values), series(reported), config);
    CHECK(*again.rate() == *r.rate());
    CHECK(again.margin == r.margin);
  }
  SUBCASE("scaling every count leaves the rate unchanged") {
    auto y3 = values;
    auto c3 = reported;
    for (double& v : y3) v *= 3;
    for (double& v : c3) v *= 3;
    const auto scaled = estimate_novelty(series(y3), series(c3), config);
    CHECK(*scaled.raw_rate == doctest::Approx(*r.raw_rate).epsilon(1e-12));
    CHECK(scaled.margin == doctest::Approx(r.margin).epsilon(1e-9));
  }
  SUBCASE("no reported observations") {
    const auto none = estimate_novelty(series(values), series(std::vector<double>(values.size(), 0.0)), config);
    CHECK(none.withheld == Withheld::no_reported);
    CHECK_FALSE(none.raw_rate.has_value());
    CHECK_FALSE(none.rate().has_value());
  }
  SUBCASE("no outbreak: novelty gate withholds the rate") {
    const auto flat = tiled(n, 9);
    std::vector<double> cov(flat.size(), 0.0);
    cov.back() = 5;
    const auto quiet = estimate_novelty(series(flat), series(cov), config);
    CHECK(quiet.withheld == Withheld::no_novelty);
    CHECK_FALSE(quiet.rate().has_value());
    CHECK(withheld_code(quiet.withheld) == "°");
  }
  SUBCASE("parameter errors") {
    NoveltyConfig bad = config;
    bad.t = n + 1;
    CHECK_THROWS_AS(estimate_novelty(series(values), series(reported), bad), BoundsError);
    CHECK_THROWS_AS(estimate_novelty(series(values), series(std::vector<double>(10, 0.0)), config),
                    DomainError);
  }
}

TEST_CASE("withheld codes") {
  CHECK(withheld_code(Withheld::none).empty());
  CHECK(withheld_code(Withheld::no_underreport) == "•");
  CHECK(withheld_code(Withheld::no_reported) == "no-reported");
}
