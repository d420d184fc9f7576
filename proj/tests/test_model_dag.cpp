// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "edgeshard/errors.hpp"
#include "edgeshard/model_dag.hpp"

using namespace edgeshard;

namespace {

ModelConfig llama(std::uint64_t L, std::uint64_t h, std::uint64_t H, std::uint64_t a) {
  ModelConfig m;
  m.num_layers = L;
  m.hidden_dim = h;
  m.intermediate_dim = H;
  m.num_heads = a;
  m.vocab_size = 32000;
  return m;
}
const ModelConfig k7b = llama(32, 4096, 11008, 32);
const ModelConfig k13b = llama(40, 5120, 13824, 40);
const ModelConfig k70b = llama(80, 8192, 28672, 64);

TrainConfig train(std::uint64_t B, std::uint64_t s, std::uint64_t mb = 1) { return {B, s, mb}; }

const GemmNode* find_node(const GemmDag& dag, OpKind op, Pass pass, std::uint32_t layer = 0) {
  for (const auto& n : dag.nodes)
    if (n.op == op && n.pass == pass && n.layer == layer) return &n;
  return nullptr;
}

// Independent count: per token and layer, forward GEMMs cost 2 * (weights)
// plus 4*s*h for the two attention products; backward doubles forward.
double flops_closed_form(const ModelConfig& m, const TrainConfig& t) {
  const double h = m.hidden_dim, H = m.intermediate_dim, s = t.seq_len, B = t.batch_size;
  const double weights = 4 * h * h + (m.gated_mlp ? 3 : 2) * h * H;
  const double fwd = 2 * B * s * weights + 4 * B * s * s * h;
  return 3 * fwd * m.num_layers;
}

}  // namespace

TEST_CASE("projection, score and MLP shapes for the 7B layer") {
  const auto dag = build_gemm_dag(k7b, train(128, 1024));
  const auto* qkv = find_node(dag, OpKind::qkv_proj, Pass::forward);
  const auto* score = find_node(dag, OpKind::attn_score, Pass::forward);
  const auto* up = find_node(dag, OpKind::mlp_up, Pass::forward);
  REQUIRE(qkv);
  REQUIRE(score);
  REQUIRE(up);
  CHECK(qkv->m == 1024);
  CHECK(qkv->n_inner == 4096);
  CHECK(qkv->q == 4096);
  CHECK(qkv->count == 128 * 3);
  CHECK(score->m == 1024);
  CHECK(score->n_inner == 128);
  CHECK(score->q == 1024);
  CHECK(score->count == 128 * 32);
  CHECK(up->m == 1024);
  CHECK(up->n_inner == 4096);
  CHECK(up->q == 11008);
  CHECK(up->count == 128);
}

TEST_CASE("unit model has unit GEMMs and the minimal level count") {
  ModelConfig m = llama(1, 1, 1, 1);
  m.vocab_size = 0;
  const auto dag = build_gemm_dag(m, train(1, 1));
  for (const auto& n : dag.nodes) {
    CHECK(n.m == 1);
    CHECK(n.n_inner == 1);
    CHECK(n.q == 1);
  }
  // qkv, score, context, o, up|gate, down forward; the same six stages backward.
  CHECK(dag.num_levels() == 12);
  std::set<OpKind> fwd;
  for (const auto& n : dag.nodes)
    if (n.pass == Pass::forward) fwd.insert(n.op);
  CHECK(fwd.size() == 7);
  double instances = 0;
  for (const auto& n : dag.nodes) instances += static_cast<double>(n.count);
  CHECK(gemm_flops(dag) == 2.0 * instances);
}

TEST_CASE("single GEMM flops") {
  GemmNode n;
  CHECK(n.flops() == 2.0);
}

TEST_CASE("gemm flops match an independent closed form") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    ModelConfig m;
    m.num_heads = 1 + rng() % 4;
    m.hidden_dim = m.num_heads * (1 + rng() % 8);
    m.intermediate_dim = 1 + rng() % 40;
    m.num_layers = 1 + rng() % 3;
    m.gated_mlp = rng() % 2;
    TrainConfig t{1 + rng() % 4, 1 + rng() % 9, 1};
    t.batch_size *= (t.microbatch_size = 1 + rng() % 2);
    const auto dag = build_gemm_dag(m, t);
    double direct = 0;
    for (const auto& n : dag.nodes) direct += 2.0 * n.m * n.n_inner * n.q * n.count;
    CHECK(gemm_flops(dag) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(gemm_flops(dag) == doctest::Approx(flops_closed_form(m, t)).epsilon(1e-12));
  }
}

TEST_CASE("GEMM share of total flops") {
  // Non-GEMM share from the published TFLOP table: 0.038/5.651, 0.048/9.816, 0.083/27.179.
  const std::vector<std::pair<ModelConfig, double>> cases = {
      {k7b, 0.038 / (5.613 + 0.038)}, {k13b, 0.048 / (9.768 + 0.048)}, {k70b, 0.083 / (27.096 + 0.083)}};
  for (const auto& [m, reference_share] : cases) {
    const auto t = train(128, 1024);
    const auto dag = build_gemm_dag(m, t);
    const auto f = total_flops(dag, m, t);
    CHECK(f.gemm_fraction() > 0.99);
    CHECK(1 - f.gemm_fraction() == doctest::Approx(reference_share).epsilon(0.15));
  }
}

TEST_CASE("flops are additive over homogeneous layers") {
  ModelConfig one = k7b;
  one.num_layers = 1;
  const auto t = train(4, 64);
  CHECK(gemm_flops(build_gemm_dag(k7b, t)) ==
        doctest::Approx(32 * gemm_flops(build_gemm_dag(one, t))).epsilon(1e-12));
}

TEST_CASE("parameter count") {
  CHECK(parameter_count(k7b) == doctest::Approx(6.74e9).epsilon(0.005));
  CHECK(parameter_count(k13b) == doctest::Approx(13.0e9).epsilon(0.02));
  ModelConfig unit = llama(1, 1, 1, 1);
  unit.vocab_size = 0;
  CHECK(parameter_count(unit) == 7);
  // Monotone in each dimension.
  auto bump = [](ModelConfig m, int field) {
    if (field == 0) ++m.num_layers;
    if (field == 1) m.hidden_dim += m.num_heads;
    if (field == 2) ++m.intermediate_dim;
    if (field == 3) ++m.vocab_size;
    return m;
  };
  for (int field = 0; field < 4; ++field) CHECK(parameter_count(bump(k7b, field)) > parameter_count(k7b));
}

TEST_CASE("memory requirements against the published totals") {
  const auto mem = memory_requirements(k7b, train(128, 1024));
  CHECK(mem.parameter_bytes == doctest::Approx(12e9).epsilon(0.20));
  CHECK(mem.optimizer_bytes > 48e9 / 2);
  CHECK(mem.optimizer_bytes < 48e9 * 2);
  CHECK(mem.activation_bytes > 731e9 / 2);
  CHECK(mem.activation_bytes < 731e9 * 2);
  CHECK(mem.total_bytes == doctest::Approx(mem.parameter_bytes + mem.gradient_bytes + mem.optimizer_bytes +
                                           mem.activation_bytes));
  const auto one = memory_requirements(k7b, train(1, 1024));
  const double h = 4096, H = 11008, a = 32, s = 1024;
  CHECK(one.activation_bytes == doctest::Approx(32 * s * (18 * h + 4 * H + 2 * a * s)));
  CHECK(mem.activation_bytes == doctest::Approx(128 * one.activation_bytes));
}

TEST_CASE("invalid configs are rejected with the field name") {
  ModelConfig bad = k7b;
  bad.num_heads = 3;
  try {
    build_gemm_dag(bad, train(1, 1));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "model.hidden_dim");
  }
  CHECK_THROWS_AS(build_gemm_dag(k7b, train(0, 1)), ConfigError);
  CHECK_THROWS_AS(memory_requirements(k7b, train(0, 1)), ConfigError);
  CHECK_THROWS_AS(build_gemm_dag(k7b, train(3, 1, 2)), ConfigError);
}

TEST_CASE("level partition and backward transposition hold on random configs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    ModelConfig m;
    m.num_heads = 1 + rng() % 3;
    m.hidden_dim = m.num_heads * (1 + rng() % 4);
    m.intermediate_dim = 1 + rng() % 9;
    m.num_layers = 1 + rng() % 4;
    m.gated_mlp = rng() % 2;
    m.include_lm_head = rng() % 2;
    m.vocab_size = 5;
    const auto dag = build_gemm_dag(m, train(2, 3));
    CHECK(check_dag(dag).empty());
    for (auto [u, v] : dag.edges) CHECK(dag.nodes[u].level != dag.nodes[v].level);

    std::uint32_t last_fwd = 0, first_bwd = ~0u;
    for (const auto& n : dag.nodes) {
      if (n.pass == Pass::forward) {
        last_fwd = std::max(last_fwd, n.level);
        const auto* dx = find_node(dag, n.op, Pass::backward_input, n.layer);
        const auto* dw = find_node(dag, n.op, Pass::backward_weight, n.layer);
        REQUIRE(dx);
        REQUIRE(dw);
        CHECK((dx->m == n.m && dx->n_inner == n.q && dx->q == n.n_inner));
        CHECK((dw->m == n.n_inner && dw->n_inner == n.m && dw->q == n.q));
        CHECK(dx->count == n.count);
      } else {
        first_bwd = std::min(first_bwd, n.level);
      }
    }
    CHECK(last_fwd < first_bwd);
  }
}

TEST_CASE("dag table golden file") {
  ModelConfig m = llama(1, 4, 8, 2);
  m.vocab_size = 0;
  const std::string table = dag_table(build_gemm_dag(m, train(2, 3)));
  std::ifstream in(std::string(EDGESHARD_GOLDEN_DIR) + "/dag_tiny.txt");
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(table == buf.str());
}
