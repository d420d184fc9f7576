// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed forms and Monte-Carlo estimators for heavy-tailed barrier costs,
// replication, coded computation and heterogeneous makespans.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeshard/fleet.hpp"

namespace edgeshard {

struct HeterogeneityStats {
  double mean_flops = 0;
  double std_flops = 0;
  double cv = 0;
};

HeterogeneityStats heterogeneity_stats(const FleetSpec& fleet);

struct RiskParams {
  double beta = 0.05;
  double lambda = 0;

  void validate() const;
};

/// H_D exactly up to 10^6 terms, ln D + gamma + 1/(2D) - 1/(12D^2) beyond.
double harmonic_number(std::uint64_t n);

/// x_m * alpha/(alpha-1) * D^(1/alpha); alpha <= 1 throws.
double expected_max_pareto(double x_m, double alpha, std::uint64_t D);
/// H_D / rate.
double expected_max_exponential(double rate, std::uint64_t D);

/// Monte-Carlo mean of the k-th smallest of D draws. Samples are split into
/// fixed seed-derived shards, so `jobs` only changes wall time.
double mc_expected_order_stat(const TailModel& model, std::uint64_t D, std::uint64_t k, std::uint64_t samples,
                              std::uint64_t seed, unsigned jobs = 1);

double cvar_pareto(double x_m, double alpha, double beta);

struct FormulaVsMc {
  double closed_form = 0;
  double mc_truth = 0;

  double relative_gap() const;
};

/// Printed r-way replication formula next to the MC minimum of r draws.
FormulaVsMc replication_expected_min(double x_m, double alpha, std::uint64_t r, std::uint64_t samples = 1000000,
                                     std::uint64_t seed = 1, unsigned jobs = 1);

struct Redundancy {
  double raw = 0;
  std::uint64_t rounded = 1;
};

Redundancy optimal_replication(double c_comm, double c_tail, double alpha);

/// Printed gamma-ratio expression (log-gamma) next to the MC k-th of n.
FormulaVsMc coded_order_stat_formula(double x_m, double alpha, std::uint64_t n, std::uint64_t k,
                                     std::uint64_t samples = 1000000, std::uint64_t seed = 1, unsigned jobs = 1);

enum class Granularity { fine, coarse };

double balance_gain(Granularity g, std::uint64_t D);
double hetero_makespan_expectation(double t_homo, double cv, std::uint64_t D, Granularity g);

double optimal_device_count(double w_gemm, double l_median, double w_d, double alpha);

struct RiskReport {
  double mean = 0;
  double cvar = 0;  // mean of the worst ceil(beta*N) samples
  double mean_plus_lambda_std = 0;  // population standard deviation
};

RiskReport risk_adjusted_plan_cost(std::vector<double> runtime_samples, const RiskParams& params);

double asymmetry_tail_gain(double gamma, double alpha_u, double alpha_d);

struct TailTableRow {
  std::string distribution;  // "exponential" or "pareto_<alpha>"
  std::uint64_t devices = 0;
  double expected_max_multiple = 0;  // closed form, in units of the scale
  double mc_multiple = 0;            // 0 when not sampled
};

/// Expected maxima for exponential and Pareto(3, 2, 1.5) at D = 100 and 1000.
/// mc_samples = 0 skips the Monte-Carlo column.
std::vector<TailTableRow> tail_table(std::uint64_t mc_samples, std::uint64_t seed, unsigned jobs = 1);

}  // namespace edgeshard
