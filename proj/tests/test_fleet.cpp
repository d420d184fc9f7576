// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "edgeshard/errors.hpp"
#include "edgeshard/fleet.hpp"

using namespace edgeshard;

namespace {

bool same_fleet(const FleetSpec& a, const FleetSpec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.devices[i], &y = b.devices[i];
    if (x.id != y.id || x.flops != y.flops || x.ul_bw != y.ul_bw || x.dl_bw != y.dl_bw ||
        x.mem_capacity != y.mem_capacity)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("homogeneous profile yields identical devices") {
  const auto fleet = sample_fleet(HeterogeneityProfile::homogeneous(1e12, 50e6, 8e6, 1e9), 4, 7);
  REQUIRE(fleet.size() == 4);
  for (const auto& d : fleet.devices) {
    CHECK(d.flops == fleet.devices[0].flops);
    CHECK(d.dl_bw == fleet.devices[0].dl_bw);
    CHECK(d.ul_bw == fleet.devices[0].ul_bw);
  }
}

TEST_CASE("default profile ranges and DL/UL asymmetry") {
  const auto fleet = sample_fleet(HeterogeneityProfile::mixed(), 1000, 3);
  double ratio = 0;
  for (const auto& d : fleet.devices) {
    CHECK(d.dl_bw >= 10e6);
    CHECK(d.dl_bw <= 100e6);
    CHECK(d.ul_bw >= 5e6);
    CHECK(d.ul_bw <= 10e6);
    const bool phone = d.flops <= 7e12;
    CHECK((phone ? d.flops >= 5e12 : (d.flops >= 10e12 && d.flops <= 27e12)));
    ratio += d.dl_bw / d.ul_bw;
  }
  ratio /= 1000;
  CHECK(ratio >= 2);
  CHECK(ratio <= 10);
}

TEST_CASE("sampling is a pure function of the seed") {
  const auto p = HeterogeneityProfile::mixed();
  CHECK(same_fleet(sample_fleet(p, 1000, 1), sample_fleet(p, 1000, 1)));
  CHECK_FALSE(same_fleet(sample_fleet(p, 1000, 1), sample_fleet(p, 1000, 2)));
  CHECK_THROWS_AS(sample_fleet(p, 0, 1), ConfigError);
}

TEST_CASE("straggler injection") {
  const auto fleet = sample_fleet(HeterogeneityProfile::mixed(), 32, 9);
  CHECK(same_fleet(inject_stragglers(fleet, 0.0, 10, 1), fleet));
  const auto slow = inject_stragglers(fleet, 0.25, 10, 1);
  REQUIRE(slow.size() == 32);
  int changed = 0;
  for (std::size_t i = 0; i < 32; ++i) {
    CHECK(slow.devices[i].id == fleet.devices[i].id);
    if (slow.devices[i].flops != fleet.devices[i].flops) {
      ++changed;
      CHECK(slow.devices[i].flops == doctest::Approx(fleet.devices[i].flops / 10));
      CHECK(slow.devices[i].ul_bw == doctest::Approx(fleet.devices[i].ul_bw / 10));
      CHECK(slow.devices[i].dl_bw == doctest::Approx(fleet.devices[i].dl_bw / 10));
    }
  }
  CHECK(changed == 8);
  CHECK(straggler_ids(fleet, 0.25, 1) == straggler_ids(fleet, 0.25, 1));
  CHECK(same_fleet(inject_stragglers(fleet, 0.25, 10, 1), slow));
  CHECK_THROWS_AS(inject_stragglers(fleet, 1.5, 10, 1), ConfigError);
  CHECK_THROWS_AS(inject_stragglers(fleet, 0.5, 0.5, 1), ConfigError);
}

TEST_CASE("latency samplers") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) CHECK(sample_latency(TailModel::constant(0.01), rng) == 0.01);

  const int n = 1000000;
  Rng r2(2024);
  double sum = 0, below = 1e9;
  for (int i = 0; i < n; ++i) {
    const double x = sample_latency(TailModel::pareto(1, 2), r2);
    sum += x;
    below = std::min(below, x);
  }
  // Mean x_m*alpha/(alpha-1) = 2.
  CHECK(sum / n == doctest::Approx(2.0).epsilon(0.02));
  CHECK(below >= 1.0);

  Rng r3(77);
  int over = 0;
  for (int i = 0; i < n; ++i) over += sample_latency(TailModel::pareto(1, 3), r3) > 2.0;
  // (1/2)^3.
  CHECK(static_cast<double>(over) / n == doctest::Approx(0.125).epsilon(0.08));

  // CCDF at several points for alpha = 1.5.
  Rng r4(5);
  std::vector<double> xs = {1.5, 3, 10};
  std::vector<int> hits(xs.size(), 0);
  for (int i = 0; i < n; ++i) {
    const double v = sample_latency(TailModel::pareto(1, 1.5), r4);
    for (std::size_t j = 0; j < xs.size(); ++j) hits[j] += v > xs[j];
  }
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double expected = std::pow(1 / xs[j], 1.5);
    const double se = std::sqrt(expected * (1 - expected) / n);
    CHECK(std::abs(static_cast<double>(hits[j]) / n - expected) < 5 * se);
  }

  Rng r5(8);
  double esum = 0;
  for (int i = 0; i < n; ++i) esum += sample_latency(TailModel::exponential(4), r5);
  CHECK(esum / n == doctest::Approx(0.25).epsilon(0.01));

  CHECK_THROWS_AS(TailModel::pareto(0, 2).validate(), ConfigError);
  CHECK_FALSE(TailModel::pareto(1, 1).has_finite_mean());
}

TEST_CASE("PS fair share") {
  FleetSpec f = sample_fleet(HeterogeneityProfile::homogeneous(1e12, 100, 10, 1e9), 4, 0);
  f.ps.aggregate_bw = 1000;
  for (double r : effective_dl_bandwidth(f)) CHECK(r == 100);
  f.ps.aggregate_bw = 200;
  for (double r : effective_dl_bandwidth(f)) CHECK(r == 50);
  f.devices[0].dl_bw = 10;
  const auto r = effective_dl_bandwidth(f);
  CHECK(r[0] == 10);
  CHECK(r[1] == doctest::Approx(190.0 / 3));
}

TEST_CASE("churn trace parsing and validation") {
  DeviceSpec tmpl;
  tmpl.flops = 5e12;
  tmpl.ul_bw = 5e6;
  tmpl.dl_bw = 50e6;
  tmpl.mem_capacity = 1e9;
  const auto trace = parse_churn_trace(
      "# comment\n0.5 3 fail\n\n1.0 100 join flops=2e12 mem=4e9\n", tmpl);
  REQUIRE(trace.events.size() == 2);
  CHECK(trace.events[0].kind == ChurnEvent::Kind::fail);
  CHECK(trace.events[0].device_id == 3);
  CHECK(trace.events[1].joined.flops == 2e12);
  CHECK(trace.events[1].joined.mem_capacity == 4e9);
  CHECK(trace.events[1].joined.ul_bw == 5e6);
  const auto fleet = sample_fleet(HeterogeneityProfile::mixed(), 8, 1);
  CHECK_NOTHROW(trace.validate(fleet));
  CHECK_THROWS_AS(parse_churn_trace("1 2 explode\n", tmpl), ConfigError);
  CHECK_THROWS_AS(parse_churn_trace("1 2 fail\n0.5 3 fail\n", tmpl).validate(fleet), ConfigError);
  CHECK_THROWS_AS(parse_churn_trace("1 2 fail\n2 2 fail\n", tmpl).validate(fleet), ConfigError);
  CHECK_THROWS_AS(parse_churn_trace("1 4 join\n", tmpl).validate(fleet), ConfigError);
}
