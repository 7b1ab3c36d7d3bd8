#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fusenas/codegen/schedule_exec.hpp"
#include "fusenas/codegen/variants.hpp"
#include "fusenas/ir/interpreter.hpp"

namespace fusenas::codegen {

/// Schedules available for one lowered fused block.
struct BlockSchedule {
  std::shared_ptr<const LoweredBlock> lowered;
  std::vector<std::optional<ScheduleVariant>> stage_variants;
  std::vector<ScheduleVariant> variants;  // ascending estimate_locality
  std::size_t chosen = 0;
  bool per_op = false;  // run the block's operators one at a time instead
};

/// A fused body flattened into primitive ops over preallocated buffers.
/// Shared subexpressions are evaluated once.
struct PerOpProgram {
  struct Step {
    ir::Node node;          // kind and output shape
    std::vector<int> args;  // step index, or -1 - leaf position
    ir::Tensor out;
  };
  std::vector<NodeId> leaves;
  std::vector<TensorShape> leaf_shapes;
  std::vector<Step> steps;
  int result = 0;
};

struct CompileOptions {
  std::vector<int> unrolls{1, 2, 4, 8};
};

/// A fused graph ready to run: fused blocks are lowered once, every node has
/// a preallocated buffer, and each block runs its chosen variant. Blocks that
/// cannot be lowered, or are switched to per-op mode, run operator by
/// operator; each lowering fallback is noted.
class CompiledGraph {
 public:
  explicit CompiledGraph(const ir::TensorGraph& fused, const CompileOptions& options = {});

  const ir::TensorGraph& graph() const { return graph_; }

  /// Lowered block ids, ascending.
  std::vector<NodeId> block_ids() const;
  const BlockSchedule& block(NodeId id) const;
  void select(NodeId block, std::size_t variant);
  /// Index of the variant with this loop order and unroll factor.
  std::size_t find_variant(NodeId block, std::span<const std::size_t> order, int unroll) const;
  std::size_t selected(NodeId block) const { return this->block(block).chosen; }
  void set_per_op(NodeId block, bool per_op);
  bool per_op(NodeId block) const { return this->block(block).per_op; }

  void set_workers(int workers);
  int workers() const { return workers_; }

  /// Executes the graph, leaving results in the internal buffers.
  void execute(const ir::Bindings& bindings);
  /// Buffer of `id` as of the last execute; `bindings` must still be alive
  /// when `id` is an input.
  const ir::Tensor& value(NodeId id) const;
  /// Executes the graph; returns copies of its outputs.
  ir::TensorMap run(const ir::Bindings& bindings);

  const std::vector<std::string>& notes() const { return notes_; }

 private:
  ir::TensorGraph graph_;
  std::vector<NodeId> order_;
  std::map<NodeId, std::size_t> slot_;
  std::vector<ir::Tensor> buffers_;
  std::vector<const ir::Tensor*> value_;
  std::map<NodeId, BlockSchedule> blocks_;
  std::map<NodeId, std::vector<std::vector<float>>> temps_;
  std::map<NodeId, PerOpProgram> per_op_;
  std::vector<std::string> notes_;
  int workers_ = 1;
};

}  // namespace fusenas::codegen
