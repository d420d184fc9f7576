// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "edgeshard/errors.hpp"
#include "edgeshard/rng.hpp"
#include "edgeshard/tail_analysis.hpp"

using namespace edgeshard;

namespace {

// Exact mean of the k-th smallest of n iid Pareto(x_m, alpha) draws.
double pareto_order_stat(double x_m, double a, double n, double k) {
  return x_m * std::exp(std::lgamma(n + 1) - std::lgamma(n - k + 1) + std::lgamma(n - k + 1 - 1 / a) -
                        std::lgamma(n + 1 - 1 / a));
}

}  // namespace

TEST_CASE("harmonic numbers") {
  CHECK(harmonic_number(1) == 1);
  CHECK(harmonic_number(4) == doctest::Approx(25.0 / 12));
  CHECK(harmonic_number(100) == doctest::Approx(5.187377517639621));
  // Exact and asymptotic branches meet smoothly.
  const double below = harmonic_number(1000000), above = harmonic_number(1000001);
  CHECK(above - below == doctest::Approx(1.0 / 1000001).epsilon(1e-4));
}

TEST_CASE("expected maxima") {
  CHECK(expected_max_pareto(1, 3, 100) == doctest::Approx(1.5 * std::cbrt(100.0)));
  CHECK(expected_max_pareto(1, 3, 100) == doctest::Approx(6.9).epsilon(0.02));
  CHECK(expected_max_pareto(1, 3, 1000) == doctest::Approx(14.9).epsilon(0.02));
  CHECK(expected_max_pareto(2, 3, 1) == doctest::Approx(3));
  CHECK_THROWS_AS(expected_max_pareto(1, 1, 10), ConfigError);
  for (std::uint64_t D = 1; D < 2000; D = D * 3 + 1) {
    CHECK(expected_max_pareto(1, 2.5, D + 1) > expected_max_pareto(1, 2.5, D));
    CHECK(expected_max_pareto(1, 2.6, D) < expected_max_pareto(1, 2.5, D));
  }
  CHECK(expected_max_exponential(1, 100) == doctest::Approx(5.2).epsilon(0.01));
  CHECK(expected_max_exponential(2, 1) == 0.5);
  const double mc = mc_expected_order_stat(TailModel::exponential(1), 100, 100, 100000, 3);
  CHECK(mc == doctest::Approx(expected_max_exponential(1, 100)).epsilon(0.02));
}

TEST_CASE("order statistic estimator") {
  CHECK(mc_expected_order_stat(TailModel::constant(0.25), 7, 3, 10, 1) == 0.25);
  // Minimum of r Pareto(1, a) draws is Pareto(1, r a).
  CHECK(mc_expected_order_stat(TailModel::pareto(1, 2), 3, 1, 400000, 5) == doctest::Approx(6.0 / 5).epsilon(0.02));
  CHECK(mc_expected_order_stat(TailModel::pareto(1, 3), 5, 3, 400000, 6) ==
        doctest::Approx(pareto_order_stat(1, 3, 5, 3)).epsilon(0.02));
  // Thread count does not change the answer.
  const auto m = TailModel::pareto(0.5, 2.5);
  CHECK(mc_expected_order_stat(m, 9, 4, 20001, 8, 1) == mc_expected_order_stat(m, 9, 4, 20001, 8, 4));
  CHECK(mc_expected_order_stat(m, 9, 4, 20001, 8) != mc_expected_order_stat(m, 9, 4, 20001, 9));
  double prev = 0;
  for (std::uint64_t k = 1; k <= 6; ++k) {
    const double v = mc_expected_order_stat(m, 6, k, 50000, 2);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(mc_expected_order_stat(m, 3, 4, 10, 1), ConfigError);
  CHECK_THROWS_AS(mc_expected_order_stat(m, 3, 0, 10, 1), ConfigError);
}

TEST_CASE("conditional value at risk") {
  CHECK(cvar_pareto(1, 2, 0.05) == doctest::Approx(2 / std::sqrt(0.05)));
  CHECK(cvar_pareto(1, 2, 0.05) == doctest::Approx(8.944).epsilon(1e-3));
  CHECK(cvar_pareto(2, 4, 1) == doctest::Approx(8.0 / 3));
  for (double b = 0.05; b < 1; b += 0.1) CHECK(cvar_pareto(1, 3, b + 0.05) < cvar_pareto(1, 3, b));
  CHECK_THROWS_AS(cvar_pareto(1, 0.9, 0.1), ConfigError);

  Rng rng(17);
  std::vector<double> s(1000000);
  for (auto& x : s) x = sample_latency(TailModel::pareto(1, 2), rng);
  const auto r = risk_adjusted_plan_cost(s, {0.05, 0});
  CHECK(r.cvar == doctest::Approx(cvar_pareto(1, 2, 0.05)).epsilon(0.05));
  CHECK(r.mean_plus_lambda_std == r.mean);
  CHECK(r.cvar >= r.mean);

  const auto c = risk_adjusted_plan_cost(std::vector<double>(10, 3.5), {0.1, 2});
  CHECK(c.mean == 3.5);
  CHECK(c.cvar == 3.5);
  CHECK(c.mean_plus_lambda_std == 3.5);
  CHECK(risk_adjusted_plan_cost({1, 2, 3, 4}, {0.5, 1}).cvar == 3.5);
  CHECK(risk_adjusted_plan_cost({1, 3}, {0.5, 1}).mean_plus_lambda_std == 3);
  CHECK_THROWS_AS(risk_adjusted_plan_cost({}, {}), ConfigError);
  CHECK_THROWS_AS(risk_adjusted_plan_cost({1}, {0, 0}), ConfigError);
}

TEST_CASE("replication and coding") {
  const auto one = replication_expected_min(1, 3, 1, 200000, 4);
  CHECK(one.closed_form == doctest::Approx(1.5));
  CHECK(one.mc_truth == doctest::Approx(1.5).epsilon(0.02));

  const auto two = replication_expected_min(1, 2, 2, 400000, 4);
  CHECK(two.mc_truth == doctest::Approx(4.0 / 3).epsilon(0.02));
  CHECK(two.closed_form == doctest::Approx(4.0 / 3 / std::sqrt(2.0)));
  CHECK(two.relative_gap() > 0.2);
  CHECK_THROWS_AS(replication_expected_min(1, 0.4, 2), ConfigError);

  CHECK(optimal_replication(6, 3, 2).raw == doctest::Approx(1));
  CHECK(optimal_replication(6, 3, 2).rounded == 1);
  const auto r = optimal_replication(10, 1, 2);
  CHECK(r.rounded >= 2);
  CHECK(r.rounded <= 4);
  CHECK(optimal_replication(20, 1, 2).raw > r.raw);
  CHECK(optimal_replication(0.01, 1, 2).rounded == 1);

  const auto single = coded_order_stat_formula(1, 3, 1, 1, 200000, 2);
  CHECK(single.mc_truth == doctest::Approx(1.5).epsilon(0.02));
  const auto coded = coded_order_stat_formula(1, 3, 3, 2, 400000, 2);
  CHECK(coded.mc_truth == doctest::Approx(pareto_order_stat(1, 3, 3, 2)).epsilon(0.02));
  CHECK(pareto_order_stat(1, 3, 3, 2) == doctest::Approx(1.35));
  CHECK(coded.closed_form ==
        doctest::Approx(6 * std::tgamma(2.0 / 3) / std::tgamma(7.0 / 3)));
  CHECK(coded.relative_gap() > 1);
  CHECK(coded_order_stat_formula(1, 3, 3, 3, 50000, 2).mc_truth > coded_order_stat_formula(1, 3, 3, 1, 50000, 2).mc_truth);
  // Large n stays finite through log-gamma.
  CHECK(std::isfinite(coded_order_stat_formula(1, 2, 5000, 4999, 10, 1).closed_form));
  CHECK_THROWS_AS(coded_order_stat_formula(1, 1, 3, 2), ConfigError);
}

TEST_CASE("heterogeneity and scaling formulas") {
  CHECK(hetero_makespan_expectation(10, 0, 50, Granularity::fine) == 10);
  const double p100 = hetero_makespan_expectation(1, 0.5, 100, Granularity::fine) - 1;
  const double p400 = hetero_makespan_expectation(1, 0.5, 400, Granularity::fine) - 1;
  CHECK(p400 == doctest::Approx(p100 / 2));
  const double coarse = hetero_makespan_expectation(1, 0.5, 100, Granularity::coarse) - 1;
  CHECK(coarse / p100 == doctest::Approx(10));
  CHECK_THROWS_AS(hetero_makespan_expectation(1, -0.1, 4, Granularity::fine), ConfigError);

  CHECK(optimal_device_count(50, 5, 10, 2) == doctest::Approx(1));
  CHECK(optimal_device_count(8e6, 1, 1, 2) / optimal_device_count(1e6, 1, 1, 2) == doctest::Approx(4));
  CHECK(optimal_device_count(1e6, 1, 1, 3) > optimal_device_count(1e6, 1, 1, 2));

  CHECK(asymmetry_tail_gain(3, 2, 2) == doctest::Approx(3));
  CHECK(asymmetry_tail_gain(2, 1.5, 3) == doctest::Approx(std::pow(2.0, 4.0 / 3)));
  CHECK(asymmetry_tail_gain(2, 1.5, 3) == doctest::Approx(2.52).epsilon(1e-3));
  CHECK(asymmetry_tail_gain(1.5, 1.2, 4) > 1.5);

  const auto homo = sample_fleet(HeterogeneityProfile::homogeneous(5e12, 50e6, 8e6, 4e9), 10, 1);
  CHECK(heterogeneity_stats(homo).cv == 0);
  const auto mixed = heterogeneity_stats(sample_fleet(HeterogeneityProfile::mixed(), 200, 1));
  CHECK(mixed.cv > 0);
  CHECK(mixed.std_flops == doctest::Approx(mixed.cv * mixed.mean_flops));
}

TEST_CASE("tail table") {
  const auto rows = tail_table(2000, 1);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].distribution == "exponential");
  CHECK(rows[1].distribution == "pareto_3");
  CHECK(rows[3].distribution == "pareto_1.5");
  CHECK(rows[4].devices == 1000);
  for (const auto& r : rows) CHECK(r.mc_multiple > 0);
  CHECK(tail_table(0, 1)[2].mc_multiple == 0);
  CHECK(tail_table(0, 1)[2].expected_max_multiple == doctest::Approx(20));
}
