#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusenas/error.hpp"
#include "fusenas/ir/tensor.hpp"

namespace fusenas::ir {

enum class OpKind {
  MatMul,
  Add,
  Mul,
  Transpose,
  Reshape,
  Gelu,
  Softmax,
  LayerNorm,
  Input,
  Const,
  Fused,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> parse_op_name(std::string_view name);

/// Fixed operand count per kind; Fused blocks are variadic and return -1.
int op_arity(OpKind kind);

bool is_elementwise_binary(OpKind kind);
/// Add, Mul and Gelu: one output element per input element, row broadcast allowed.
bool is_pointwise(OpKind kind);
/// Add, Mul and MatMul: the operators a polynomial region is built from.
bool is_polynomial(OpKind kind);

enum class LayerClass { ComputeIntensive, MemoryIntensive };

std::string_view layer_class_name(LayerClass c);

/// Composite operator stored on a Fused node. The IR only needs to know how
/// big the block is and what it produces; the body itself is owned by the
/// fusion pass that built it.
class FusedBody {
 public:
  virtual ~FusedBody() = default;

  /// Node ids read by the block, in the order they appear as node inputs.
  virtual const std::vector<NodeId>& leaves() const = 0;
  virtual TensorShape infer_shape(
      const std::function<TensorShape(NodeId)>& leaf_shape) const = 0;
  /// Operator applications in the block's (tree-expanded) expression.
  virtual std::int64_t computation_count() const = 0;
  /// Per-element flop estimate for the block, including any matmul stages.
  virtual std::int64_t flops() const = 0;
  virtual bool contains_matmul() const = 0;
  virtual std::string describe() const = 0;
  virtual bool equals(const FusedBody& other) const = 0;
};

struct NodeAttrs {
  std::vector<std::int64_t> shape;  // Input/Const shape, Reshape target
  std::vector<std::int64_t> perm;   // Transpose axes
  std::vector<float> data;          // Const payload, row-major
  std::shared_ptr<const FusedBody> fused;

  friend bool operator==(const NodeAttrs& a, const NodeAttrs& b);
};

struct Node {
  NodeId id = -1;
  OpKind kind = OpKind::Input;
  std::vector<NodeId> inputs;
  TensorShape shape;  // empty until shape inference
  NodeAttrs attrs;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Pure function of the op kind: matmul reuses each input element many
/// times, everything else reads each element once.
LayerClass classify_node(const Node& node);

/// Directed acyclic tensor graph. Node ids are unique but need not be dense:
/// fusion keeps the id of a block's root so external references survive.
class TensorGraph {
 public:
  TensorGraph() = default;

  /// Appends a node with the next free id and returns that id.
  NodeId add(OpKind kind, std::vector<NodeId> inputs = {}, NodeAttrs attrs = {});
  NodeId add_input(TensorShape shape);
  NodeId add_const(TensorShape shape, std::vector<float> data);
  /// Appends a node with a caller-chosen id. Throws on duplicates.
  void insert(Node node);

  void set_outputs(std::vector<NodeId> outputs) { outputs_ = std::move(outputs); }
  const std::vector<NodeId>& outputs() const { return outputs_; }
  bool is_output(NodeId id) const;

  bool contains(NodeId id) const { return index_.count(id) != 0; }
  const Node& node(NodeId id) const;
  Node& mutable_node(NodeId id);
  std::span<const Node> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const;

  /// Structural checks: arity, dangling inputs, outputs, acyclicity.
  void validate() const;

  /// Deterministic topological order (Kahn, smallest id first).
  std::vector<NodeId> topo_order() const;
  /// True when `order` lists every node once with producers before consumers.
  bool is_topological(std::span<const NodeId> order) const;

  /// Consumer lists keyed by producer id; each consumer appears once per use.
  std::unordered_map<NodeId, std::vector<NodeId>> consumers() const;

  /// All Input node ids, ascending.
  std::vector<NodeId> input_ids() const;

  bool shapes_inferred() const;

  friend bool operator==(const TensorGraph& a, const TensorGraph& b);

 private:
  std::vector<Node> nodes_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<NodeId> outputs_;
  NodeId next_id_ = 0;
};

}  // namespace fusenas::ir
