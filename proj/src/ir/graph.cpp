#include "fusenas/ir/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <unordered_set>

namespace fusenas::ir {

namespace {
struct OpInfo {
  OpKind kind;
  std::string_view name;
  int arity;
};

constexpr OpInfo kOps[] = {
    {OpKind::MatMul, "matmul", 2},     {OpKind::Add, "add", 2},
    {OpKind::Mul, "mul", 2},           {OpKind::Transpose, "transpose", 1},
    {OpKind::Reshape, "reshape", 1},   {OpKind::Gelu, "gelu", 1},
    {OpKind::Softmax, "softmax", 1},   {OpKind::LayerNorm, "layernorm", 1},
    {OpKind::Input, "input", 0},       {OpKind::Const, "const", 0},
    {OpKind::Fused, "fused", -1},
};

const OpInfo& info(OpKind kind) {
  for (const auto& op : kOps) {
    if (op.kind == kind) return op;
  }
  throw Error(ErrorCode::Internal, "op kind missing from table");
}
}  // namespace

std::string_view op_name(OpKind kind) { return info(kind).name; }

std::optional<OpKind> parse_op_name(std::string_view name) {
  for (const auto& op : kOps) {
    // Fused blocks only come out of the fusion pass, never from a file.
    if (op.name == name && op.kind != OpKind::Fused) return op.kind;
  }
  return std::nullopt;
}

int op_arity(OpKind kind) { return info(kind).arity; }

bool is_elementwise_binary(OpKind kind) {
  return kind == OpKind::Add || kind == OpKind::Mul;
}

bool is_pointwise(OpKind kind) {
  return is_elementwise_binary(kind) || kind == OpKind::Gelu;
}

bool is_polynomial(OpKind kind) {
  return is_elementwise_binary(kind) || kind == OpKind::MatMul;
}

std::string_view layer_class_name(LayerClass c) {
  return c == LayerClass::ComputeIntensive ? "compute-intensive"
                                           : "memory-intensive";
}

LayerClass classify_node(const Node& node) {
  if (node.kind == OpKind::MatMul) return LayerClass::ComputeIntensive;
  if (node.kind == OpKind::Fused && node.attrs.fused &&
      node.attrs.fused->contains_matmul()) {
    return LayerClass::ComputeIntensive;
  }
  return LayerClass::MemoryIntensive;
}

bool operator==(const NodeAttrs& a, const NodeAttrs& b) {
  if (a.shape != b.shape || a.perm != b.perm || a.data != b.data) return false;
  if (static_cast<bool>(a.fused) != static_cast<bool>(b.fused)) return false;
  return !a.fused || a.fused->equals(*b.fused);
}

NodeId TensorGraph::add(OpKind kind, std::vector<NodeId> inputs, NodeAttrs attrs) {
  Node n;
  n.id = next_id_;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  insert(std::move(n));
  return nodes_.back().id;
}

NodeId TensorGraph::add_input(TensorShape shape) {
  NodeAttrs attrs;
  attrs.shape = shape.dims();
  return add(OpKind::Input, {}, std::move(attrs));
}

NodeId TensorGraph::add_const(TensorShape shape, std::vector<float> data) {
  NodeAttrs attrs;
  attrs.shape = shape.dims();
  attrs.data = std::move(data);
  return add(OpKind::Const, {}, std::move(attrs));
}

void TensorGraph::insert(Node node) {
  if (contains(node.id)) {
    throw Error(ErrorCode::DuplicateId, "node id already present", node.id);
  }
  next_id_ = std::max(next_id_, node.id + 1);
  index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
}

bool TensorGraph::is_output(NodeId id) const {
  return std::find(outputs_.begin(), outputs_.end(), id) != outputs_.end();
}

const Node& TensorGraph::node(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::DanglingInput, "no such node", id);
  }
  return nodes_[it->second];
}

Node& TensorGraph::mutable_node(NodeId id) {
  return const_cast<Node&>(static_cast<const TensorGraph&>(*this).node(id));
}

std::size_t TensorGraph::edge_count() const {
  std::size_t e = 0;
  for (const auto& n : nodes_) e += n.inputs.size();
  return e;
}

void TensorGraph::validate() const {
  for (const auto& n : nodes_) {
    const int arity = op_arity(n.kind);
    if (arity >= 0 && static_cast<int>(n.inputs.size()) != arity) {
      throw Error(ErrorCode::Parse,
                  std::string(op_name(n.kind)) + " expects " +
                      std::to_string(arity) + " inputs, got " +
                      std::to_string(n.inputs.size()),
                  n.id);
    }
    for (auto in : n.inputs) {
      if (!contains(in)) {
        throw Error(ErrorCode::DanglingInput,
                    "input references missing node " + std::to_string(in), n.id);
      }
    }
    if (n.kind == OpKind::Fused && !n.attrs.fused) {
      throw Error(ErrorCode::Internal, "fused node without a body", n.id);
    }
  }
  if (outputs_.empty()) {
    throw Error(ErrorCode::Parse, "graph declares no outputs");
  }
  for (auto out : outputs_) {
    if (!contains(out)) {
      throw Error(ErrorCode::DanglingInput,
                  "output references missing node " + std::to_string(out));
    }
  }
  (void)topo_order();
}

std::vector<NodeId> TensorGraph::topo_order() const {
  std::unordered_map<NodeId, std::size_t> pending;
  std::unordered_map<NodeId, std::vector<NodeId>> users;
  for (const auto& n : nodes_) {
    pending[n.id] = n.inputs.size();
    for (auto in : n.inputs) users[in].push_back(n.id);
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, count] : pending) {
    if (count == 0) ready.push(id);
  }
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (auto user : users[id]) {
      if (--pending[user] == 0) ready.push(user);
    }
  }
  if (order.size() != nodes_.size()) {
    NodeId culprit = -1;
    for (const auto& n : nodes_) {
      if (pending[n.id] != 0 && (culprit < 0 || n.id < culprit)) culprit = n.id;
    }
    throw Error(ErrorCode::Cycle, "graph contains a cycle", culprit);
  }
  return order;
}

bool TensorGraph::is_topological(std::span<const NodeId> order) const {
  if (order.size() != nodes_.size()) return false;
  std::unordered_set<NodeId> seen;
  for (auto id : order) {
    if (!contains(id) || seen.count(id)) return false;
    for (auto in : node(id).inputs) {
      if (!seen.count(in)) return false;
    }
    seen.insert(id);
  }
  return true;
}

std::unordered_map<NodeId, std::vector<NodeId>> TensorGraph::consumers() const {
  std::unordered_map<NodeId, std::vector<NodeId>> out;
  for (const auto& n : nodes_) {
    out.try_emplace(n.id);
    for (auto in : n.inputs) out[in].push_back(n.id);
  }
  return out;
}

std::vector<NodeId> TensorGraph::input_ids() const {
  std::vector<NodeId> ids;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::Input) ids.push_back(n.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool TensorGraph::shapes_inferred() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const Node& n) { return !n.shape.empty(); });
}

bool operator==(const TensorGraph& a, const TensorGraph& b) {
  if (a.outputs_ != b.outputs_ || a.nodes_.size() != b.nodes_.size()) return false;
  for (const auto& n : a.nodes_) {
    if (!b.contains(n.id) || !(b.node(n.id) == n)) return false;
  }
  return true;
}

}  // namespace fusenas::ir
