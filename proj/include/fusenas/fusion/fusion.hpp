#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "fusenas/fusion/expr.hpp"
#include "fusenas/fusion/regions.hpp"
#include "fusenas/ir/graph.hpp"

namespace fusenas::fusion {

enum class CandidateKind {
  Algebraic,  // polynomial region where distributive factoring removes operators
  Vertical,   // chain/tree of pointwise ops over aligned or row-broadcast domains
  Epilogue,   // pointwise consumers folded into the write-out of a matmul
};

std::string_view candidate_kind_name(CandidateKind kind);

/// Body of a Fused node: the rewritten expression over its leaf nodes.
class FusedBlock final : public ir::FusedBody {
 public:
  FusedBlock(CandidateKind kind, ExprPtr expr, std::vector<NodeId> covered);

  CandidateKind kind() const { return kind_; }
  const ExprPtr& expr() const { return expr_; }
  const std::vector<NodeId>& covered() const { return covered_; }

  const std::vector<NodeId>& leaves() const override { return leaves_; }
  TensorShape infer_shape(
      const std::function<TensorShape(NodeId)>& leaf_shape) const override;
  std::int64_t computation_count() const override { return expr_->op_count(); }
  std::int64_t flops() const override { return expr_->flops(); }
  bool contains_matmul() const override { return expr_->contains_matmul(); }
  std::string describe() const override;
  bool equals(const ir::FusedBody& other) const override;

 private:
  CandidateKind kind_;
  ExprPtr expr_;
  std::vector<NodeId> covered_;
  std::vector<NodeId> leaves_;
};

/// Returns the fused body of a node, or nullptr for primitive nodes.
const FusedBlock* fused_block(const ir::Node& node);

struct FusionCandidate {
  CandidateKind kind = CandidateKind::Vertical;
  NodeId root = -1;                 // the covered node whose value leaves the block
  std::vector<NodeId> covered;      // ascending
  ExprPtr rewritten;
  std::int64_t delta_layers = 0;
  std::int64_t delta_computations = 0;
};

struct FusionPlan {
  std::vector<FusionCandidate> accepted;

  std::int64_t total_delta_layers() const;
  std::int64_t total_delta_computations() const;
  bool empty() const { return accepted.empty(); }
};

/// Decides whether a producer may be computed inside the same loop nest as
/// a consumer that reads it. The default admits every pointwise edge; the
/// loop-codegen module supplies a gate backed by its dependence analysis.
using EdgeGate = std::function<bool(const ir::TensorGraph&, NodeId producer, NodeId consumer)>;

/// All fusion candidates of a shaped graph, ordered by kind then root id.
/// Blocks that would raise the computation count are left out. Deltas are exact: they are measured by rewriting the graph with the
/// candidate alone and diffing count_metrics.
std::vector<FusionCandidate> enumerate_candidates(const ir::TensorGraph& g,
                                                  const EdgeGate& gate = {});

/// Greedy non-overlapping selection: descending delta_computations, then
/// descending delta_layers, then ascending smallest covered id.
FusionPlan select_plan(std::vector<FusionCandidate> candidates);

/// Replaces each accepted candidate by one Fused node that keeps the root's
/// id, so external edges and outputs are untouched. Throws StalePlan when
/// the plan does not match the graph.
ir::TensorGraph rewrite_graph(const ir::TensorGraph& g, const FusionPlan& plan);

/// enumerate -> select -> rewrite.
struct FusionResult {
  std::vector<FusionCandidate> candidates;
  FusionPlan plan;
  ir::TensorGraph fused;
};
FusionResult fuse_graph(const ir::TensorGraph& g, const EdgeGate& gate = {});

}  // namespace fusenas::fusion
