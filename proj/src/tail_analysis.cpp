// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/tail_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"
#include "edgeshard/rng.hpp"

namespace edgeshard {

namespace {

constexpr std::uint64_t kExactHarmonicLimit = 1000000;
constexpr std::uint64_t kShards = 64;
constexpr double kEulerGamma = 0.57721566490153286061;

void require_finite_mean(double alpha) {
  if (!(alpha > 1)) throw ConfigError("alpha", fmt::format("{} <= 1: the Pareto mean diverges", alpha));
}

double pareto_mean(double x_m, double alpha) { return x_m * alpha / (alpha - 1); }

}  // namespace

HeterogeneityStats heterogeneity_stats(const FleetSpec& fleet) {
  fleet.validate();
  HeterogeneityStats s;
  const double n = static_cast<double>(fleet.size());
  for (const auto& d : fleet.devices) s.mean_flops += d.flops / n;
  double var = 0;
  for (const auto& d : fleet.devices) var += (d.flops - s.mean_flops) * (d.flops - s.mean_flops) / n;
  s.std_flops = std::sqrt(var);
  s.cv = s.std_flops / s.mean_flops;
  return s;
}

void RiskParams::validate() const {
  if (!(beta > 0 && beta <= 1)) throw ConfigError("risk.beta", "must be in (0, 1]");
  if (!(lambda >= 0)) throw ConfigError("risk.lambda", "must be >= 0");
}

double harmonic_number(std::uint64_t n) {
  if (n <= kExactHarmonicLimit) {
    // Smallest terms first.
    double h = 0;
    for (std::uint64_t i = n; i >= 1; --i) h += 1.0 / static_cast<double>(i);
    return h;
  }
  const double x = static_cast<double>(n);
  return std::log(x) + kEulerGamma + 1 / (2 * x) - 1 / (12 * x * x);
}

double expected_max_pareto(double x_m, double alpha, std::uint64_t D) {
  require_finite_mean(alpha);
  if (D == 0) throw ConfigError("devices", "must be >= 1");
  if (!(x_m > 0)) throw ConfigError("x_m", "must be > 0");
  return pareto_mean(x_m, alpha) * std::pow(static_cast<double>(D), 1 / alpha);
}

double expected_max_exponential(double rate, std::uint64_t D) {
  if (!(rate > 0)) throw ConfigError("rate", "must be > 0");
  if (D == 0) throw ConfigError("devices", "must be >= 1");
  return harmonic_number(D) / rate;
}

double mc_expected_order_stat(const TailModel& model, std::uint64_t D, std::uint64_t k, std::uint64_t samples,
                              std::uint64_t seed, unsigned jobs) {
  model.validate();
  if (D == 0) throw ConfigError("devices", "must be >= 1");
  if (k < 1 || k > D) throw ConfigError("k", fmt::format("{} outside [1, {}]", k, D));
  if (samples == 0) throw ConfigError("samples", "must be >= 1");
  if (model.kind == TailModel::Kind::deterministic) return model.value;

  const std::uint64_t shards = std::min(kShards, samples);
  std::vector<double> sums(shards, 0.0);
  auto run_shard = [&](std::uint64_t s) {
    const std::uint64_t n = samples / shards + (s < samples % shards ? 1 : 0);
    Rng rng(derive_seed(seed, s));
    std::vector<double> draw(D);
    double sum = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      for (auto& x : draw) x = sample_latency(model, rng);
      if (k == D) {
        sum += *std::max_element(draw.begin(), draw.end());
      } else if (k == 1) {
        sum += *std::min_element(draw.begin(), draw.end());
      } else {
        std::nth_element(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(k - 1), draw.end());
        sum += draw[k - 1];
      }
    }
    sums[s] = sum;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(shards)));
  if (workers == 1) {
    for (std::uint64_t s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t s = w; s < shards; s += workers) run_shard(s);
      });
    }
    for (auto& t : pool) t.join();
  }
  // Fixed summation order keeps the result independent of `jobs`.
  double total = 0;
  for (double s : sums) total += s;
  return total / static_cast<double>(samples);
}

double cvar_pareto(double x_m, double alpha, double beta) {
  require_finite_mean(alpha);
  if (!(beta > 0 && beta <= 1)) throw ConfigError("beta", "must be in (0, 1]");
  return x_m / std::pow(beta, 1 / alpha) * alpha / (alpha - 1);
}

double FormulaVsMc::relative_gap() const { return std::abs(closed_form - mc_truth) / mc_truth; }

FormulaVsMc replication_expected_min(double x_m, double alpha, std::uint64_t r, std::uint64_t samples,
                                     std::uint64_t seed, unsigned jobs) {
  if (r == 0) throw ConfigError("replicas", "must be >= 1");
  const double ra = static_cast<double>(r) * alpha;
  if (!(ra > 1)) throw ConfigError("replicas", "r*alpha must exceed 1");
  FormulaVsMc out;
  out.closed_form = x_m * ra / (ra - 1) * std::pow(static_cast<double>(r), -1 / alpha);
  out.mc_truth = mc_expected_order_stat(TailModel::pareto(x_m, alpha), r, 1, samples, seed, jobs);
  return out;
}

Redundancy optimal_replication(double c_comm, double c_tail, double alpha) {
  if (!(c_comm > 0) || !(c_tail > 0)) throw ConfigError("costs", "must be > 0");
  if (!(alpha > 0)) throw ConfigError("alpha", "must be > 0");
  Redundancy r;
  r.raw = std::pow(c_comm / (c_tail * alpha), alpha / (alpha + 1));
  r.rounded = static_cast<std::uint64_t>(std::max(1.0, std::round(r.raw)));
  return r;
}

FormulaVsMc coded_order_stat_formula(double x_m, double alpha, std::uint64_t n, std::uint64_t k,
                                     std::uint64_t samples, std::uint64_t seed, unsigned jobs) {
  require_finite_mean(alpha);
  if (k < 1 || k > n) throw ConfigError("k", fmt::format("{} outside [1, {}]", k, n));
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  // All gamma arguments are positive under alpha > 1 and 1 <= k <= n.
  const double log_ratio = std::lgamma(nd + 1) + std::lgamma(1 - 1 / alpha) - std::lgamma(nd - kd + 1 + 1 / alpha) -
                           std::lgamma(kd);
  FormulaVsMc out;
  out.closed_form = x_m * std::exp(log_ratio);
  out.mc_truth = mc_expected_order_stat(TailModel::pareto(x_m, alpha), n, k, samples, seed, jobs);
  return out;
}

double balance_gain(Granularity g, std::uint64_t D) {
  if (D == 0) throw ConfigError("devices", "must be >= 1");
  return g == Granularity::fine ? 1 / std::sqrt(static_cast<double>(D)) : 1.0;
}

double hetero_makespan_expectation(double t_homo, double cv, std::uint64_t D, Granularity g) {
  if (!(cv >= 0)) throw ConfigError("cv", "must be >= 0");
  return t_homo * (1 + cv * cv / 2 * balance_gain(g, D));
}

double optimal_device_count(double w_gemm, double l_median, double w_d, double alpha) {
  if (!(w_gemm > 0) || !(l_median > 0) || !(w_d > 0)) throw ConfigError("inputs", "must be > 0");
  if (!(alpha > 0)) throw ConfigError("alpha", "must be > 0");
  return std::pow(w_gemm / (l_median * w_d), alpha / (alpha + 1));
}

RiskReport risk_adjusted_plan_cost(std::vector<double> samples, const RiskParams& params) {
  params.validate();
  if (samples.empty()) throw ConfigError("samples", "must be nonempty");
  const double n = static_cast<double>(samples.size());
  RiskReport r;
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0;
  for (double x : samples) var += (x - r.mean) * (x - r.mean) / n;
  r.mean_plus_lambda_std = r.mean + params.lambda * std::sqrt(var);
  const auto worst = static_cast<std::size_t>(std::ceil(params.beta * n - 1e-9));
  const std::size_t count = std::clamp<std::size_t>(worst, 1, samples.size());
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(count - 1), samples.end(),
                   std::greater<>());
  r.cvar = std::accumulate(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(count), 0.0) /
           static_cast<double>(count);
  // Constant inputs must give exactly the constant back.
  if (r.cvar < r.mean) r.cvar = r.mean;
  return r;
}

double asymmetry_tail_gain(double gamma, double alpha_u, double alpha_d) {
  if (!(gamma > 0)) throw ConfigError("gamma", "must be > 0");
  if (!(alpha_u > 0) || !(alpha_d > 0)) throw ConfigError("alpha", "must be > 0");
  return std::pow(gamma, 1 + 1 / alpha_u - 1 / alpha_d);
}

std::vector<TailTableRow> tail_table(std::uint64_t mc_samples, std::uint64_t seed, unsigned jobs) {
  std::vector<TailTableRow> rows;
  std::uint64_t stream = 0;
  for (std::uint64_t D : {100u, 1000u}) {
    TailTableRow e{"exponential", D, expected_max_exponential(1, D), 0};
    if (mc_samples) e.mc_multiple = mc_expected_order_stat(TailModel::exponential(1), D, D, mc_samples,
                                                           derive_seed(seed, stream), jobs);
    ++stream;
    rows.push_back(e);
    for (double a : {3.0, 2.0, 1.5}) {
      TailTableRow p{fmt::format("pareto_{}", a), D, expected_max_pareto(1, a, D), 0};
      if (mc_samples) p.mc_multiple = mc_expected_order_stat(TailModel::pareto(1, a), D, D, mc_samples,
                                                             derive_seed(seed, stream), jobs);
      ++stream;
      rows.push_back(p);
    }
  }
  return rows;
}

}  // namespace edgeshard
