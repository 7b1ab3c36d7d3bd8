#include "fusenas/fusion/expr.hpp"

#include <cstdio>
#include <functional>
#include <unordered_set>

namespace fusenas::fusion {

namespace {
const char* tag(ExprOp op) {
  switch (op) {
    case ExprOp::Leaf: return "v";
    case ExprOp::AddN: return "A";
    case ExprOp::MulN: return "M";
    case ExprOp::MatMul: return "P";
    case ExprOp::Gelu: return "G";
  }
  return "?";
}
}  // namespace

ExprPtr Expr::leaf(NodeId id, TensorShape shape) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = ExprOp::Leaf;
  e->leaf_ = id;
  e->shape_ = std::move(shape);
  e->finish();
  return e;
}

ExprPtr Expr::add(std::vector<ExprPtr> terms) {
  if (terms.size() < 2) throw Error(ErrorCode::Internal, "AddN needs at least two terms");
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = ExprOp::AddN;
  e->children_ = std::move(terms);
  e->finish();
  return e;
}

ExprPtr Expr::mul(std::vector<ExprPtr> factors) {
  if (factors.size() < 2) throw Error(ErrorCode::Internal, "MulN needs at least two factors");
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = ExprOp::MulN;
  e->children_ = std::move(factors);
  e->finish();
  return e;
}

ExprPtr Expr::matmul(ExprPtr lhs, ExprPtr rhs) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = ExprOp::MatMul;
  e->children_ = {std::move(lhs), std::move(rhs)};
  e->finish();
  return e;
}

ExprPtr Expr::gelu(ExprPtr x) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = ExprOp::Gelu;
  e->children_ = {std::move(x)};
  e->finish();
  return e;
}

ExprPtr Expr::with_children(const Expr& like, std::vector<ExprPtr> children) {
  switch (like.op()) {
    case ExprOp::Leaf: return leaf(like.leaf_id(), like.shape());
    case ExprOp::AddN: return add(std::move(children));
    case ExprOp::MulN: return mul(std::move(children));
    case ExprOp::MatMul: return matmul(children.at(0), children.at(1));
    case ExprOp::Gelu: return gelu(children.at(0));
  }
  throw Error(ErrorCode::Internal, "unknown expression op");
}

void Expr::finish() {
  if (op_ == ExprOp::Leaf) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%010lld", static_cast<long long>(leaf_));
    key_ = buf;
    return;
  }
  key_ = std::string(tag(op_)) + "(";
  for (std::size_t i = 0; i < children_.size(); ++i) {
    if (i) key_ += ',';
    key_ += children_[i]->key();
    op_count_ += children_[i]->op_count();
    flops_ += children_[i]->flops();
    has_matmul_ = has_matmul_ || children_[i]->contains_matmul();
  }
  key_ += ')';

  switch (op_) {
    case ExprOp::AddN:
    case ExprOp::MulN: {
      shape_ = children_[0]->shape();
      for (std::size_t i = 1; i < children_.size(); ++i) {
        auto s = ir::broadcast_shape(shape_, children_[i]->shape());
        if (!s) {
          throw Error(ErrorCode::ShapeMismatch, "elementwise operands " + shape_.to_string() +
                                                    " and " + children_[i]->shape().to_string());
        }
        shape_ = *s;
      }
      const auto n = static_cast<std::int64_t>(children_.size()) - 1;
      op_count_ += n;
      flops_ += n * shape_.numel();
      break;
    }
    case ExprOp::MatMul: {
      const auto& a = children_[0]->shape();
      const auto& b = children_[1]->shape();
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "matmul operands " + a.to_string() + " and " + b.to_string());
      }
      shape_ = TensorShape{a.dim(0), b.dim(1)};
      op_count_ += 1;
      flops_ += 2 * a.dim(0) * a.dim(1) * b.dim(1);
      has_matmul_ = true;
      break;
    }
    case ExprOp::Gelu:
      shape_ = children_[0]->shape();
      op_count_ += 1;
      flops_ += shape_.numel();
      break;
    case ExprOp::Leaf:
      break;
  }
}

void Expr::collect_leaves(std::set<NodeId>& out) const {
  if (op_ == ExprOp::Leaf) {
    out.insert(leaf_);
    return;
  }
  for (const auto& c : children_) c->collect_leaves(out);
}

std::string Expr::to_string() const {
  switch (op_) {
    case ExprOp::Leaf:
      return "%" + std::to_string(leaf_);
    case ExprOp::AddN:
    case ExprOp::MulN: {
      const char* sep = op_ == ExprOp::AddN ? " + " : " * ";
      std::string s = "(";
      for (std::size_t i = 0; i < children_.size(); ++i) {
        if (i) s += sep;
        s += children_[i]->to_string();
      }
      return s + ")";
    }
    case ExprOp::MatMul:
      return "(" + children_[0]->to_string() + " @ " + children_[1]->to_string() + ")";
    case ExprOp::Gelu:
      return "gelu(" + children_[0]->to_string() + ")";
  }
  return "?";
}

std::size_t distinct_subtrees(const ExprPtr& e) {
  std::unordered_set<std::string> seen;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& x) {
    if (!seen.insert(x->key()).second) return;
    for (const auto& c : x->children()) walk(c);
  };
  walk(e);
  return seen.size();
}

}  // namespace fusenas::fusion
