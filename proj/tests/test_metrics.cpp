#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stmgnn/baselines.hpp"
#include "stmgnn/count_distributions.hpp"
#include "stmgnn/errors.hpp"
#include "stmgnn/metrics.hpp"
#include "stmgnn/rng.hpp"
#include "support/oracles.hpp"

using namespace stmgnn;

TEST_CASE("mae hand examples") {
  CHECK(mae({0.5, 1.5}, {0.0, 2.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mae({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK_THROWS_AS(mae({}, {}), UsageError);
}

TEST_CASE("interval construction from head quantiles") {
  const auto [lo1, hi1] = interval({{0.6, 0.5, 1.0}}, HeadKind::Zinb);
  CHECK(lo1[0] == 0.0);
  CHECK(hi1[0] == 1.0);

  // Near-certain zero collapses the interval.
  const auto [lo2, hi2] = interval({{1.0 - kProbClamp, 0.5, 1.0}}, HeadKind::Zinb);
  CHECK(lo2[0] == 0.0);
  CHECK(hi2[0] == 0.0);

  std::mt19937 gen(19);
  std::uniform_real_distribution<double> up(0.05, 0.95);
  std::uniform_real_distribution<double> ur(0.2, 8.0);
  std::vector<std::vector<double>> cells;
  for (int i = 0; i < 50; ++i) {
    cells.push_back({up(gen), up(gen), ur(gen)});
  }
  const auto [lower, upper] = interval(cells, HeadKind::Zinb);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(lower[i] <= upper[i]);
}

TEST_CASE("picp hand examples and monotonicity") {
  CHECK(picp({0, 0, 0}, {1, 1, 1}, {0, 1, 2}) == doctest::Approx(2.0 / 3.0));
  CHECK(picp({0, 0, 0}, {1e18, 1e18, 1e18}, {0, 5, 900}) == 1.0);

  // Widening intervals cannot reduce coverage and strictly raises the width.
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<double> lo, hi, actual;
  for (int i = 0; i < 40; ++i) {
    const double a = u(gen), b = u(gen);
    lo.push_back(std::min(a, b));
    hi.push_back(std::max(a, b));
    actual.push_back(u(gen));
  }
  std::vector<double> lo2 = lo, hi2 = hi;
  for (auto& v : lo2) v -= 0.5;
  for (auto& v : hi2) v += 0.5;
  CHECK(picp(lo2, hi2, actual) >= picp(lo, hi, actual));
  CHECK(mpiw(lo2, hi2) > mpiw(lo, hi));
}

TEST_CASE("mpiw hand examples") {
  CHECK(mpiw({0, 0}, {1, 1}) == 1.0);
  CHECK(mpiw({2, 3, 4}, {2, 3, 4}) == 0.0);
  CHECK_THROWS_AS(mpiw({1}, {0}), UsageError);
}

TEST_CASE("kl divergence: zero, log 2, and the histogram oracle") {
  // Model average PMF equal to the empirical histogram: KL = 0.
  const std::vector<double> actual{0, 0, 1, 2};
  auto matching = [&](std::size_t, long long y) {
    if (y == 0) return 0.5;
    if (y == 1) return 0.25;
    if (y == 2) return 0.25;
    return 0.0;
  };
  CHECK(kl_divergence(actual, matching, 2) == doctest::Approx(0.0).epsilon(1e-15));

  // Point mass at zero against a model with P(0) = 0.5: log 2.
  const std::vector<double> zeros{0, 0, 0};
  auto half = [](std::size_t, long long y) { return y == 0 ? 0.5 : 0.5; };
  CHECK(kl_divergence(zeros, half, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Random small case against an independent histogram computation.
  std::mt19937 gen(29);
  std::uniform_int_distribution<int> uy(0, 5);
  std::vector<double> acts;
  std::vector<ZinbParams> params;
  for (int i = 0; i < 30; ++i) {
    acts.push_back(uy(gen));
    params.push_back({std::uniform_real_distribution<double>(0.1, 0.9)(gen),
                      std::uniform_real_distribution<double>(0.1, 0.9)(gen),
                      std::uniform_real_distribution<double>(0.5, 4.0)(gen)});
  }
  const long long y_star = 9;
  const double got = kl_divergence(
      acts,
      [&](std::size_t i, long long y) { return zinb_pmf(y, params[i]); }, y_star);

  std::vector<double> emp(y_star + 1, 0.0), model(y_star + 1, 0.0);
  for (double a : acts) emp[static_cast<std::size_t>(a)] += 1.0 / acts.size();
  for (long long y = 0; y <= y_star; ++y) {
    for (const auto& p : params) {
      model[y] += oracles::zinb_term(y, p.pi, p.p, p.r) / params.size();
    }
  }
  double want = 0.0;
  for (long long y = 0; y <= y_star; ++y) {
    if (emp[y] > 0.0) want += emp[y] * std::log(emp[y] / std::max(model[y], 1e-12));
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got >= 0.0);
}

TEST_CASE("discrete scores and the half-up boundary") {
  // Perfect rounded predictions with both classes present.
  const DiscreteScores perfect = discrete_scores({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0});
  CHECK(perfect.true_zero_rate.has_value());
  CHECK(*perfect.true_zero_rate == 1.0);
  CHECK(perfect.f1 == 1.0);

  // The all-zero predictor: full true-zero rate, zero F1.
  const DiscreteScores collapsed = discrete_scores({0.0, 0.1, 0.2}, {0.0, 1.0, 3.0});
  CHECK(*collapsed.true_zero_rate == 1.0);
  CHECK(collapsed.f1 == 0.0);

  // Hand example from the rounding rule.
  const DiscreteScores hand = discrete_scores({0.4, 0.6, 1.2}, {0.0, 1.0, 1.0});
  CHECK(*hand.true_zero_rate == 1.0);
  CHECK(hand.f1 == 1.0);

  // 0.5 rounds up.
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(0.49999) == 0);
  CHECK(round_half_up(1.5) == 2);
  CHECK(round_half_up(-0.2) == 0);

  // No zero cells: the true-zero rate is reported absent.
  const DiscreteScores no_zero = discrete_scores({1.0, 2.0}, {1.0, 2.0});
  CHECK_FALSE(no_zero.true_zero_rate.has_value());
}

TEST_CASE("historical value baseline") {
  DTensor3 window(2, 3, 1);
  for (int n = 0; n < 2; ++n)
    for (int t = 0; t < 3; ++t) window(n, t, 0) = 10 * n + t;
  const DTensor3 pred = historical_value(window, 2);
  for (int n = 0; n < 2; ++n)
    for (int q = 0; q < 2; ++q) CHECK(pred(n, q, 0) == 10 * n + 2);

  // Constant series: prediction equals the constant.
  DTensor3 constant(1, 4, 2);
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 2; ++c) constant(0, t, c) = 3.0;
  const DTensor3 cpred = historical_value(constant, 1);
  CHECK(cpred(0, 0, 0) == 3.0);
  CHECK(cpred(0, 0, 1) == 3.0);

  // Last day all zeros: all-zero prediction.
  DTensor3 zeros_last(1, 2, 1);
  zeros_last(0, 0, 0) = 5.0;
  zeros_last(0, 1, 0) = 0.0;
  CHECK(historical_value(zeros_last, 1)(0, 0, 0) == 0.0);
}

TEST_CASE("weekday mean baseline") {
  DTensor3 window(1, 14, 1);
  for (int t = 0; t < 14; ++t) window(0, t, 0) = t % 7;  // weekly pattern
  const DTensor3 pred = weekday_mean_value(window, 7, 0);
  for (int q = 0; q < 7; ++q) {
    CHECK(pred(0, q, 0) == doctest::Approx((14 + q) % 7).epsilon(1e-12));
  }
}

TEST_CASE("point-model evaluation omits interval scores") {
  const std::vector<double> actual{0, 0, 1, 2, 0, 3};
  const MetricsReport perfect = evaluate_point_model(actual, actual);
  CHECK(perfect.mae == 0.0);
  CHECK_FALSE(perfect.picp.has_value());
  CHECK_FALSE(perfect.mpiw.has_value());
  CHECK(perfect.kl_divergence == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(perfect.f1 == 1.0);
  CHECK(*perfect.true_zero_rate == 1.0);

  // KL against the brute-force histogram oracle.
  const std::vector<double> pred{0.2, 1.4, 1.0, 1.9, 0.0, 2.6};
  const MetricsReport rep = evaluate_point_model(pred, actual);
  std::vector<double> emp(4, 0.0), model(4, 0.0);
  for (double a : actual) emp[static_cast<std::size_t>(a)] += 1.0 / actual.size();
  for (double p : pred) {
    const long long r = std::max<long long>(0, round_half_up(p));
    model[static_cast<std::size_t>(std::min<long long>(r, 3))] += 1.0 / pred.size();
  }
  double want = 0.0;
  for (std::size_t y = 0; y < 4; ++y) {
    if (emp[y] > 0.0) want += emp[y] * std::log(emp[y] / std::max(model[y], 1e-12));
  }
  CHECK(rep.kl_divergence == doctest::Approx(want).epsilon(1e-12));

  // On i.i.d. synthetic draws persistence cannot beat the constant-mean
  // predictor in expectation.
  std::mt19937 gen(31);
  RngStream rng(3, "synth");
  const ZinbParams q{0.4, 0.5, 2.0};
  std::vector<double> series;
  for (int i = 0; i < 4000; ++i) {
    series.push_back(static_cast<double>(zinb_sample(q, rng)));
  }
  std::vector<double> hv_pred, mean_pred, target;
  const double mean = zinb_mean(q);
  for (std::size_t i = 1; i < series.size(); ++i) {
    hv_pred.push_back(series[i - 1]);
    mean_pred.push_back(mean);
    target.push_back(series[i]);
  }
  CHECK(mae(hv_pred, target) >= mae(mean_pred, target));
}
