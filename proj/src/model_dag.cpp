// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/model_dag.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

void ModelConfig::validate() const {
  auto positive = [](std::uint64_t v, const char* field) {
    if (v == 0) throw ConfigError(field, "must be >= 1");
  };
  positive(num_layers, "model.num_layers");
  positive(hidden_dim, "model.hidden_dim");
  positive(intermediate_dim, "model.intermediate_dim");
  positive(num_heads, "model.num_heads");
  positive(dtype_bytes, "model.dtype_bytes");
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("model.hidden_dim",
                      fmt::format("{} is not divisible by num_heads {}", hidden_dim, num_heads));
  }
  if (include_lm_head && vocab_size == 0) {
    throw ConfigError("model.vocab_size", "must be >= 1 when include_lm_head is set");
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
  if (seq_len == 0) throw ConfigError("train.seq_len", "must be >= 1");
  if (microbatch_size == 0) throw ConfigError("train.microbatch_size", "must be >= 1");
  if (batch_size % microbatch_size != 0) {
    throw ConfigError("train.batch_size",
                      fmt::format("{} is not divisible by microbatch_size {}", batch_size,
                                  microbatch_size));
  }
}

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::qkv_proj: return "qkv_proj";
    case OpKind::attn_score: return "attn_score";
    case OpKind::attn_context: return "attn_context";
    case OpKind::o_proj: return "o_proj";
    case OpKind::mlp_up: return "mlp_up";
    case OpKind::mlp_gate: return "mlp_gate";
    case OpKind::mlp_down: return "mlp_down";
    case OpKind::lm_head: return "lm_head";
  }
  return "?";
}

std::string kind_name(OpKind op, Pass pass) {
  std::string base(to_string(op));
  switch (pass) {
    case Pass::forward: return base;
    case Pass::backward_input: return base + ".dgrad";
    case Pass::backward_weight: return base + ".wgrad";
  }
  return base;
}

bool has_per_instance_operands(OpKind op) {
  return op == OpKind::attn_score || op == OpKind::attn_context;
}

namespace {

struct ForwardShape {
  OpKind op;
  std::uint64_t m, k, n, count;
};

// Forward GEMMs of one transformer layer grouped by dependency stage.
std::vector<std::vector<ForwardShape>> layer_stages(const ModelConfig& model,
                                                    const TrainConfig& train) {
  const std::uint64_t h = model.hidden_dim;
  const std::uint64_t ff = model.intermediate_dim;
  const std::uint64_t head_dim = h / model.num_heads;
  const std::uint64_t s = train.seq_len;
  const std::uint64_t rows = train.microbatch_size * s;
  const std::uint64_t mbs = train.num_microbatches();
  const std::uint64_t seq_heads = train.batch_size * model.num_heads;

  std::vector<std::vector<ForwardShape>> stages;
  stages.push_back({{OpKind::qkv_proj, rows, h, h, mbs * 3}});
  stages.push_back({{OpKind::attn_score, s, head_dim, s, seq_heads}});
  stages.push_back({{OpKind::attn_context, s, s, head_dim, seq_heads}});
  stages.push_back({{OpKind::o_proj, rows, h, h, mbs}});
  if (model.gated_mlp) {
    stages.push_back({{OpKind::mlp_up, rows, h, ff, mbs}, {OpKind::mlp_gate, rows, h, ff, mbs}});
  } else {
    stages.push_back({{OpKind::mlp_up, rows, h, ff, mbs}});
  }
  stages.push_back({{OpKind::mlp_down, rows, ff, h, mbs}});
  return stages;
}

}  // namespace

GemmDag build_gemm_dag(const ModelConfig& model, const TrainConfig& train) {
  model.validate();
  train.validate();

  GemmDag dag;
  dag.layers = model.num_layers;
  auto add = [&](std::uint32_t layer, OpKind op, Pass pass, std::uint64_t m, std::uint64_t k,
                 std::uint64_t n, std::uint64_t count) {
    GemmNode node;
    node.id = static_cast<NodeId>(dag.nodes.size());
    node.layer = layer;
    node.op = op;
    node.pass = pass;
    node.m = m;
    node.n_inner = k;
    node.q = n;
    node.count = count;
    dag.nodes.push_back(node);
    return node.id;
  };
  auto connect = [&](const std::vector<NodeId>& from, const std::vector<NodeId>& to) {
    for (NodeId u : from)
      for (NodeId v : to) dag.edges.emplace_back(u, v);
  };

  const auto stages = layer_stages(model, train);
  // Forward stage outputs, kept so weight-gradient nodes can depend on their inputs.
  struct StageRecord {
    std::uint32_t layer;
    std::vector<ForwardShape> shapes;
    std::vector<NodeId> ids;
  };
  std::vector<StageRecord> forward;
  std::vector<NodeId> previous;

  for (std::uint32_t layer = 0; layer < model.num_layers; ++layer) {
    for (const auto& stage : stages) {
      StageRecord rec{layer, stage, {}};
      for (const auto& g : stage) rec.ids.push_back(add(layer, g.op, Pass::forward, g.m, g.k, g.n, g.count));
      connect(previous, rec.ids);
      previous = rec.ids;
      forward.push_back(std::move(rec));
    }
  }
  if (model.include_lm_head) {
    const std::uint64_t rows = train.microbatch_size * train.seq_len;
    StageRecord rec{static_cast<std::uint32_t>(model.num_layers),
                    {{OpKind::lm_head, rows, model.hidden_dim, model.vocab_size,
                      train.num_microbatches()}},
                    {}};
    const auto& g = rec.shapes.front();
    rec.ids.push_back(add(rec.layer, g.op, Pass::forward, g.m, g.k, g.n, g.count));
    connect(previous, rec.ids);
    previous = rec.ids;
    forward.push_back(std::move(rec));
  }

  // Backward mirrors the forward stages in reverse. Each forward GEMM (M,K)x(K,N)
  // yields dX = dY W^T with shape (M,N)x(N,K) and dW = X^T dY with (K,M)x(M,N).
  std::vector<NodeId> upstream = previous;  // producers of the incoming gradient
  for (std::size_t idx = forward.size(); idx-- > 0;) {
    const auto& rec = forward[idx];
    std::vector<NodeId> dgrads;
    std::vector<NodeId> stage_ids;
    for (const auto& g : rec.shapes) {
      NodeId dx = add(rec.layer, g.op, Pass::backward_input, g.m, g.n, g.k, g.count);
      NodeId dw = add(rec.layer, g.op, Pass::backward_weight, g.k, g.m, g.n, g.count);
      dgrads.push_back(dx);
      stage_ids.push_back(dx);
      stage_ids.push_back(dw);
    }
    connect(upstream, stage_ids);
    // dW also reads the forward input of this stage.
    if (idx > 0) {
      for (std::size_t j = 0; j < rec.shapes.size(); ++j) connect(forward[idx - 1].ids, {stage_ids[2 * j + 1]});
    }
    upstream = dgrads;
  }

  // Levels by longest path from the batch root.
  const std::size_t count = dag.nodes.size();
  std::vector<std::vector<NodeId>> succ(count);
  std::vector<std::size_t> indeg(count, 0);
  for (auto [u, v] : dag.edges) {
    succ[u].push_back(v);
    ++indeg[v];
  }
  std::vector<std::uint32_t> level(count, 0);
  std::queue<NodeId> ready;
  for (NodeId v = 0; v < count; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    NodeId u = ready.front();
    ready.pop();
    ++visited;
    for (NodeId v : succ[u]) {
      level[v] = std::max(level[v], level[u] + 1);
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (visited != count) throw std::logic_error("GEMM DAG contains a cycle");

  std::uint32_t depth = 0;
  for (NodeId v = 0; v < count; ++v) {
    dag.nodes[v].level = level[v];
    depth = std::max(depth, level[v]);
  }
  dag.levels.assign(count ? depth + 1 : 0, {});
  for (NodeId v = 0; v < count; ++v) dag.levels[level[v]].push_back(v);
  return dag;
}

double gemm_flops(const GemmDag& dag) {
  double total = 0;
  for (const auto& node : dag.nodes) total += node.flops();
  return total;
}

FlopSummary total_flops(const GemmDag& dag, const ModelConfig& model, const TrainConfig& train) {
  FlopSummary out;
  out.gemm_flops = gemm_flops(dag);
  out.nongemm_flops_estimate = kNonGemmFlopsPerHidden * static_cast<double>(train.batch_size) *
                               static_cast<double>(train.seq_len) *
                               static_cast<double>(model.hidden_dim) *
                               static_cast<double>(model.num_layers);
  return out;
}

std::uint64_t layer_parameter_count(const ModelConfig& model) {
  const std::uint64_t h = model.hidden_dim;
  const std::uint64_t mlp_mats = model.gated_mlp ? 3 : 2;
  return 4 * h * h + mlp_mats * h * model.intermediate_dim;
}

std::uint64_t parameter_count(const ModelConfig& model) {
  return model.num_layers * layer_parameter_count(model) + 2 * model.vocab_size * model.hidden_dim;
}

MemoryBreakdown memory_requirements(const ModelConfig& model, const TrainConfig& train,
                                    const ActivationConstants& act) {
  model.validate();
  train.validate();
  const double params = static_cast<double>(parameter_count(model));
  const double b = static_cast<double>(model.dtype_bytes);
  MemoryBreakdown mem;
  mem.parameter_bytes = params * b;
  mem.gradient_bytes = params * b;
  mem.optimizer_bytes = 8.0 * params;
  const double tokens = static_cast<double>(train.batch_size) * static_cast<double>(train.seq_len);
  const double per_token = act.per_hidden * static_cast<double>(model.hidden_dim) +
                           act.per_intermediate * static_cast<double>(model.intermediate_dim) +
                           act.per_head_token * static_cast<double>(model.num_heads) *
                               static_cast<double>(train.seq_len);
  mem.activation_bytes = static_cast<double>(model.num_layers) * tokens * per_token;
  mem.total_bytes = mem.parameter_bytes + mem.gradient_bytes + mem.optimizer_bytes + mem.activation_bytes;
  return mem;
}

std::string dag_table(const GemmDag& dag) {
  std::string out = fmt::format("{:>6} {:>6} {:<20} {:>8} {:>8} {:>8} {:>8}\n", "id", "level",
                                "kind", "M", "K", "N", "count");
  for (const auto& level : dag.levels) {
    for (NodeId id : level) {
      const auto& n = dag.nodes[id];
      out += fmt::format("{:>6} {:>6} {:<20} {:>8} {:>8} {:>8} {:>8}\n", n.id, n.level, n.kind(),
                         n.m, n.n_inner, n.q, n.count);
    }
  }
  return out;
}

std::string check_dag(const GemmDag& dag) {
  for (auto [u, v] : dag.edges) {
    if (dag.nodes[u].level >= dag.nodes[v].level) {
      return fmt::format("edge {}->{} does not increase level", u, v);
    }
  }
  for (std::size_t s = 0; s < dag.levels.size(); ++s) {
    for (NodeId id : dag.levels[s]) {
      if (dag.nodes[id].level != s) return fmt::format("node {} listed in wrong level", id);
    }
  }
  return {};
}

}  // namespace edgeshard
