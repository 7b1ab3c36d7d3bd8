#include "fusenas/codegen/compiled_graph.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>

#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::codegen {

using ir::Node;
using ir::OpKind;
using ir::Tensor;

namespace {

using fusion::Expr;

void compile_expr(const Expr& e, PerOpProgram& prog, std::map<std::string, int>& memo,
                  int& result) {
  if (auto it = memo.find(e.key()); it != memo.end()) {
    result = it->second;
    return;
  }
  if (e.is_leaf()) {
    const auto pos = std::find(prog.leaves.begin(), prog.leaves.end(), e.leaf_id());
    result = -1 - static_cast<int>(pos - prog.leaves.begin());
    if (pos == prog.leaves.end()) prog.leaves.push_back(e.leaf_id());
    memo.emplace(e.key(), result);
    return;
  }
  std::vector<int> args;
  for (const auto& c : e.children()) {
    int a = 0;
    compile_expr(*c, prog, memo, a);
    args.push_back(a);
  }
  auto step = [&](OpKind kind, std::vector<int> in, const TensorShape& shape) {
    PerOpProgram::Step st;
    st.node.kind = kind;
    st.node.shape = shape;
    st.args = std::move(in);
    st.out = Tensor(shape);
    prog.steps.push_back(std::move(st));
    return static_cast<int>(prog.steps.size()) - 1;
  };
  auto shape_of = [&](int v) -> const TensorShape& {
    return v < 0 ? prog.leaf_shapes[static_cast<std::size_t>(-1 - v)]
                 : prog.steps[static_cast<std::size_t>(v)].out.shape;
  };
  switch (e.op()) {
    case fusion::ExprOp::AddN:
    case fusion::ExprOp::MulN: {
      const OpKind kind = e.op() == fusion::ExprOp::AddN ? OpKind::Add : OpKind::Mul;
      int acc = args[0];
      for (std::size_t k = 1; k < args.size(); ++k) {
        acc = step(kind, {acc, args[k]}, *ir::broadcast_shape(shape_of(acc), shape_of(args[k])));
      }
      result = acc;
      break;
    }
    case fusion::ExprOp::MatMul: result = step(OpKind::MatMul, args, e.shape()); break;
    case fusion::ExprOp::Gelu: result = step(OpKind::Gelu, args, e.shape()); break;
    case fusion::ExprOp::Leaf: break;
  }
  memo.emplace(e.key(), result);
}

// Records leaf shapes ahead of compilation so steps can infer broadcasts.
void collect_leaf_shapes(const Expr& e, std::map<NodeId, TensorShape>& out) {
  if (e.is_leaf()) {
    out.emplace(e.leaf_id(), e.shape());
    return;
  }
  for (const auto& c : e.children()) collect_leaf_shapes(*c, out);
}

PerOpProgram compile_per_op(const Expr& body) {
  std::map<NodeId, TensorShape> shapes;
  collect_leaf_shapes(body, shapes);
  PerOpProgram prog;
  for (const auto& [id, shape] : shapes) {
    prog.leaves.push_back(id);
    prog.leaf_shapes.push_back(shape);
  }
  std::map<std::string, int> memo;
  compile_expr(body, prog, memo, prog.result);
  return prog;
}

void run_per_op(PerOpProgram& prog, const std::function<const Tensor&(NodeId)>& leaf, Tensor& out) {
  auto value = [&](int v) -> const Tensor* {
    return v < 0 ? &leaf(prog.leaves[static_cast<std::size_t>(-1 - v)])
                 : &prog.steps[static_cast<std::size_t>(v)].out;
  };
  if (prog.result < 0) {
    out.data = value(prog.result)->data;
    return;
  }
  for (std::size_t k = 0; k < prog.steps.size(); ++k) {
    auto& st = prog.steps[k];
    std::array<const Tensor*, 2> ops{};
    for (std::size_t a = 0; a < st.args.size(); ++a) ops[a] = value(st.args[a]);
    Tensor& dst = static_cast<int>(k) == prog.result ? out : st.out;
    ir::eval_primitive(st.node, std::span<const Tensor* const>(ops.data(), st.args.size()), dst);
  }
}

}  // namespace

CompiledGraph::CompiledGraph(const ir::TensorGraph& fused, const CompileOptions& options)
    : graph_(fused.shapes_inferred() ? fused : ir::infer_shapes(fused)) {
  order_ = graph_.topo_order();
  for (auto id : order_) {
    const Node& n = graph_.node(id);
    slot_.emplace(id, buffers_.size());
    if (n.kind == OpKind::Input) {
      buffers_.emplace_back();  // bound at run time
    } else {
      buffers_.emplace_back(n.kind == OpKind::Const ? Tensor(n.shape, n.attrs.data) : Tensor(n.shape));
    }
    if (n.kind != OpKind::Fused) continue;
    const auto* body = fusion::fused_block(n);
    if (!body) throw Error(ErrorCode::Execution, "fused node has no executable body", id);
    per_op_.emplace(id, compile_per_op(*body->expr()));
    try {
      BlockSchedule bs;
      auto lowered = std::make_shared<const LoweredBlock>(lower_block(n));
      bs.lowered = lowered;
      bs.stage_variants = default_stage_variants(lowered);
      bs.variants = gen_variants(std::shared_ptr<const PointwiseNest>(lowered, &lowered->main),
                                 options.unrolls);
      std::stable_sort(bs.variants.begin(), bs.variants.end(),
                       [](const ScheduleVariant& a, const ScheduleVariant& b) {
                         return estimate_locality(a) < estimate_locality(b);
                       });
      std::vector<std::vector<float>> temps;
      for (const auto& s : lowered->temps) temps.emplace_back(static_cast<std::size_t>(s.numel()));
      temps_.emplace(id, std::move(temps));
      blocks_.emplace(id, std::move(bs));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LoweringUnsupported) throw;
      notes_.push_back("block " + std::to_string(id) + ": " + e.what() + ", per-op fallback");
    }
  }
}

std::vector<NodeId> CompiledGraph::block_ids() const {
  std::vector<NodeId> out;
  for (const auto& [id, b] : blocks_) out.push_back(id);
  return out;
}

const BlockSchedule& CompiledGraph::block(NodeId id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(ErrorCode::InvalidArgument, "not a lowered block", id);
  return it->second;
}

void CompiledGraph::select(NodeId id, std::size_t variant) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(ErrorCode::InvalidArgument, "not a lowered block", id);
  if (variant >= it->second.variants.size()) {
    throw Error(ErrorCode::InvalidArgument, "variant index out of range", id);
  }
  it->second.chosen = variant;
}

std::size_t CompiledGraph::find_variant(NodeId id, std::span<const std::size_t> order,
                                        int unroll) const {
  const auto& vs = block(id).variants;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].unroll == unroll && std::equal(order.begin(), order.end(), vs[i].order.begin(),
                                             vs[i].order.end())) {
      return i;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "no variant with that order and unroll", id);
}

void CompiledGraph::set_per_op(NodeId id, bool per_op) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(ErrorCode::InvalidArgument, "not a lowered block", id);
  it->second.per_op = per_op;
}

void CompiledGraph::set_workers(int workers) {
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");
  workers_ = workers;
}

void CompiledGraph::execute(const ir::Bindings& bindings) {
  ir::check_bindings(graph_, bindings);
  auto& value = value_;
  value.assign(buffers_.size(), nullptr);
  auto tensor_of = [&](NodeId id) -> const Tensor& { return *value[slot_.at(id)]; };
  for (auto id : order_) {
    const Node& n = graph_.node(id);
    const std::size_t slot = slot_.at(id);
    Tensor& out = buffers_[slot];
    value[slot] = &out;
    switch (n.kind) {
      case OpKind::Input: value[slot] = &bindings.at(id); break;
      case OpKind::Const: break;
      case OpKind::Fused: {
        auto it = blocks_.find(id);
        if (it != blocks_.end() && !it->second.per_op) {
          const BlockSchedule& bs = it->second;
          run_block(*bs.lowered, bs.stage_variants, bs.variants[bs.chosen],
                    [&](NodeId leaf) { return tensor_of(leaf).data.data(); }, temps_.at(id),
                    out.data.data(), workers_);
        } else {
          run_per_op(per_op_.at(id), tensor_of, out);
        }
        break;
      }
      default: {
        std::vector<const Tensor*> ops;
        for (auto in : n.inputs) ops.push_back(&tensor_of(in));
        ir::eval_primitive(n, ops, out);
      }
    }
  }
}

const ir::Tensor& CompiledGraph::value(NodeId id) const {
  auto it = slot_.find(id);
  if (it == slot_.end() || it->second >= value_.size() || !value_[it->second]) {
    throw Error(ErrorCode::InvalidArgument, "no value for this node; run execute first", id);
  }
  return *value_[it->second];
}

ir::TensorMap CompiledGraph::run(const ir::Bindings& bindings) {
  execute(bindings);
  ir::TensorMap outputs;
  for (auto id : graph_.outputs()) outputs.emplace(id, value(id));
  return outputs;
}

}  // namespace fusenas::codegen
