#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "fusenas/ir/graph.hpp"

namespace fusenas::fusion {

using fusenas::NodeId;
using ir::TensorShape;

enum class ExprOp { Leaf, AddN, MulN, MatMul, Gelu };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree over graph-node symbols. Subtrees may be shared;
/// structural identity is decided by key(), which is computed bottom-up at
/// construction. AddN/MulN are n-ary elementwise (row broadcast allowed),
/// MatMul is binary and order-sensitive.
class Expr {
 public:
  static ExprPtr leaf(NodeId id, TensorShape shape);
  static ExprPtr add(std::vector<ExprPtr> terms);
  static ExprPtr mul(std::vector<ExprPtr> factors);
  static ExprPtr matmul(ExprPtr lhs, ExprPtr rhs);
  static ExprPtr gelu(ExprPtr x);
  /// Rebuilds a node of the same op over new children.
  static ExprPtr with_children(const Expr& like, std::vector<ExprPtr> children);

  ExprOp op() const { return op_; }
  NodeId leaf_id() const { return leaf_; }
  const std::vector<ExprPtr>& children() const { return children_; }
  const TensorShape& shape() const { return shape_; }
  const std::string& key() const { return key_; }
  bool is_leaf() const { return op_ == ExprOp::Leaf; }
  bool is_nary() const { return op_ == ExprOp::AddN || op_ == ExprOp::MulN; }

  /// Operator applications with shared subtrees expanded: an n-ary node
  /// costs n-1, MatMul and Gelu cost 1.
  std::int64_t op_count() const { return op_count_; }
  /// Tree-expanded flops over the annotated shapes.
  std::int64_t flops() const { return flops_; }
  bool contains_matmul() const { return has_matmul_; }

  void collect_leaves(std::set<NodeId>& out) const;
  std::string to_string() const;

 private:
  Expr() = default;
  void finish();

  ExprOp op_ = ExprOp::Leaf;
  NodeId leaf_ = -1;
  std::vector<ExprPtr> children_;
  TensorShape shape_;
  std::string key_;
  std::int64_t op_count_ = 0;
  std::int64_t flops_ = 0;
  bool has_matmul_ = false;
};

inline bool same_structure(const Expr& a, const Expr& b) { return a.key() == b.key(); }

/// Number of distinct subtrees (by structural key) in `e`; shared subtrees
/// count once.
std::size_t distinct_subtrees(const ExprPtr& e);

}  // namespace fusenas::fusion
