#pragma once

#include <cstdint>
#include <string>

#include "fusenas/ir/graph.hpp"

namespace fusenas::ir {

/// One point of the architecture search space.
struct ArchSample {
  int num_layers = 1;
  int hidden_size = 64;
  int ffn_size = 256;
  int num_heads = 1;

  /// Throws InvalidArgument unless L >= 1, H % A == 0 and F >= H.
  void validate() const;
  bool is_valid() const;
  std::string to_string() const;

  friend bool operator==(const ArchSample&, const ArchSample&) = default;
  friend auto operator<=>(const ArchSample&, const ArchSample&) = default;
};

/// Nodes emitted per encoder block: six weight inputs, one score-scale
/// constant and sixteen operators (q/k/v projections, k transpose, scores,
/// scale, softmax, context, output projection, residual add, layernorm,
/// two FFN matmuls with gelu, residual add, layernorm).
inline constexpr std::int64_t kNodesPerBlock = 23;

/// Total node count of build_transformer_graph: the activation input plus
/// kNodesPerBlock per block.
constexpr std::int64_t transformer_node_count(std::int64_t layers) {
  return 1 + kNodesPerBlock * layers;
}

/// Stacked encoder blocks over a seq_len x H activation, shapes inferred. Weights are Input
/// nodes so that large configurations stay cheap to build and measure
/// symbolically. Attention is folded across heads into single matmuls.
TensorGraph build_transformer_graph(const ArchSample& arch, std::int64_t seq_len);

constexpr std::int64_t matmul_flops(std::int64_t m, std::int64_t k, std::int64_t n) {
  return 2 * m * k * n;
}

/// Closed-form flop count of build_transformer_graph(arch, seq_len):
/// matmuls at 2*M*K*N, elementwise and normalisation ops at one flop per
/// output element.
std::int64_t flops_estimate(const ArchSample& arch, std::int64_t seq_len);

/// Weight parameters of the encoder blocks (no embeddings or biases).
std::int64_t parameter_count(const ArchSample& arch);

}  // namespace fusenas::ir
