// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Transformer training batch as a leveled DAG of GEMM operations.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace edgeshard {

struct ModelConfig {
  std::string name = "custom";
  std::uint64_t num_layers = 1;        // L
  std::uint64_t hidden_dim = 1;        // h
  std::uint64_t intermediate_dim = 1;  // H
  std::uint64_t num_heads = 1;         // a
  std::uint64_t vocab_size = 0;        // V, only used by the LM head and parameter count
  std::uint64_t dtype_bytes = 2;       // bytes per element
  bool gated_mlp = true;               // Llama-style up/gate/down; false gives OPT-style up/down
  bool include_lm_head = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct TrainConfig {
  std::uint64_t batch_size = 1;       // sequences per batch
  std::uint64_t seq_len = 1;          // tokens per sequence
  std::uint64_t microbatch_size = 1;  // sequences per microbatch

  std::uint64_t num_microbatches() const { return batch_size / microbatch_size; }
  void validate() const;
};

enum class OpKind : std::uint8_t {
  qkv_proj,
  attn_score,
  attn_context,
  o_proj,
  mlp_up,
  mlp_gate,
  mlp_down,
  lm_head,
};

enum class Pass : std::uint8_t {
  forward,
  backward_input,   // dX = dY * W^T
  backward_weight,  // dW = X^T * dY
};

std::string_view to_string(OpKind op);
std::string kind_name(OpKind op, Pass pass);

/// True when every instance of the op multiplies a distinct B operand
/// (attention products), as opposed to a weight shared by all microbatches.
bool has_per_instance_operands(OpKind op);

using NodeId = std::uint32_t;

struct GemmNode {
  NodeId id = 0;
  std::uint32_t level = 0;
  std::uint32_t layer = 0;
  OpKind op = OpKind::qkv_proj;
  Pass pass = Pass::forward;
  std::uint64_t m = 1;        // rows of A and of the output
  std::uint64_t n_inner = 1;  // shared inner dimension
  std::uint64_t q = 1;        // columns of B and of the output
  std::uint64_t count = 1;    // identical instances at this node

  std::string kind() const { return kind_name(op, pass); }
  double flops() const {
    return 2.0 * static_cast<double>(m) * static_cast<double>(n_inner) *
           static_cast<double>(q) * static_cast<double>(count);
  }
};

struct GemmDag {
  std::vector<GemmNode> nodes;                      // indexed by id
  std::vector<std::vector<NodeId>> levels;          // levels[s] = node ids at level s
  std::vector<std::pair<NodeId, NodeId>> edges;     // (producer, consumer)
  std::uint64_t layers = 0;

  std::size_t num_levels() const { return levels.size(); }
};

struct FlopSummary {
  double gemm_flops = 0;
  double nongemm_flops_estimate = 0;
  double gemm_fraction() const { return gemm_flops / (gemm_flops + nongemm_flops_estimate); }
};

struct MemoryBreakdown {
  double parameter_bytes = 0;
  double gradient_bytes = 0;
  double optimizer_bytes = 0;
  double activation_bytes = 0;
  double total_bytes = 0;
};

/// Non-GEMM work per token, per hidden element, per layer (layernorm,
/// activation, softmax). Matches the GEMM/non-GEMM ratios measured for
/// Llama 7B/13B/70B to within a few percent.
inline constexpr double kNonGemmFlopsPerHidden = 2000.0;

/// Activation bytes per token per layer: c1*h + c2*H + c3*a*s.
struct ActivationConstants {
  double per_hidden = 18.0;
  double per_intermediate = 4.0;
  double per_head_token = 2.0;
};

GemmDag build_gemm_dag(const ModelConfig& model, const TrainConfig& train);

FlopSummary total_flops(const GemmDag& dag, const ModelConfig& model, const TrainConfig& train);
double gemm_flops(const GemmDag& dag);

/// L*(4h^2 + 3hH) + 2*V*h for gated MLPs; 2hH per layer for ungated ones.
std::uint64_t parameter_count(const ModelConfig& model);
std::uint64_t layer_parameter_count(const ModelConfig& model);

MemoryBreakdown memory_requirements(const ModelConfig& model, const TrainConfig& train,
                                    const ActivationConstants& act = {});

/// One row per node: id level kind M K N count.
std::string dag_table(const GemmDag& dag);

/// Checks the level-partition invariant; returns an empty string when it holds.
std::string check_dag(const GemmDag& dag);

}  // namespace edgeshard
