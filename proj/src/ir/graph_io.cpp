#include "fusenas/ir/graph_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fusenas::ir {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where, std::optional<NodeId> node) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = std::any_of(allowed.begin(), allowed.end(),
                          [&](const char* a) { return key == a; });
    if (!ok) {
      throw Error(ErrorCode::Parse, "unknown key '" + key + "' in " + where, node);
    }
  }
}

std::vector<std::int64_t> int_list(const json& v, const std::string& what,
                                   std::optional<NodeId> node) {
  if (!v.is_array()) throw Error(ErrorCode::Parse, what + " must be an array", node);
  std::vector<std::int64_t> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) {
      throw Error(ErrorCode::Parse, what + " must contain integers", node);
    }
    out.push_back(x.get<std::int64_t>());
  }
  return out;
}

NodeAttrs parse_attrs(const json& attrs, OpKind kind, NodeId id) {
  NodeAttrs out;
  if (!attrs.is_object()) throw Error(ErrorCode::Parse, "attrs must be an object", id);
  switch (kind) {
    case OpKind::Input:
      reject_unknown_keys(attrs, {"shape"}, "input attrs", id);
      break;
    case OpKind::Const:
      reject_unknown_keys(attrs, {"shape", "data"}, "const attrs", id);
      break;
    case OpKind::Reshape:
      reject_unknown_keys(attrs, {"shape"}, "reshape attrs", id);
      break;
    case OpKind::Transpose:
      reject_unknown_keys(attrs, {"axes"}, "transpose attrs", id);
      break;
    default:
      reject_unknown_keys(attrs, {}, std::string(op_name(kind)) + " attrs", id);
  }
  const bool needs_shape =
      kind == OpKind::Input || kind == OpKind::Const || kind == OpKind::Reshape;
  if (needs_shape) {
    if (!attrs.contains("shape")) {
      throw Error(ErrorCode::Parse, std::string(op_name(kind)) + " requires attrs.shape", id);
    }
    out.shape = int_list(attrs.at("shape"), "attrs.shape", id);
    try {
      (void)TensorShape(out.shape);
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, e.what(), id);
    }
  }
  if (kind == OpKind::Transpose && attrs.contains("axes")) {
    out.perm = int_list(attrs.at("axes"), "attrs.axes", id);
  }
  if (kind == OpKind::Const) {
    if (!attrs.contains("data") || !attrs.at("data").is_array()) {
      throw Error(ErrorCode::Parse, "const requires attrs.data array", id);
    }
    for (const auto& x : attrs.at("data")) {
      if (!x.is_number()) throw Error(ErrorCode::Parse, "const data must be numeric", id);
      out.data.push_back(x.get<float>());
    }
    if (static_cast<std::int64_t>(out.data.size()) != TensorShape(out.shape).numel()) {
      throw Error(ErrorCode::Parse, "const data length does not match shape", id);
    }
  }
  return out;
}

}  // namespace

TensorGraph parse_graph(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "document must be an object");
  reject_unknown_keys(doc, {"nodes", "outputs"}, "document", std::nullopt);
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) {
    throw Error(ErrorCode::Parse, "document requires a 'nodes' array");
  }
  if (!doc.contains("outputs")) throw Error(ErrorCode::Parse, "document requires 'outputs'");

  TensorGraph g;
  std::set<NodeId> ids;
  for (const auto& entry : doc.at("nodes")) {
    if (!entry.is_object()) throw Error(ErrorCode::Parse, "node entries must be objects");
    if (!entry.contains("id") || !entry.at("id").is_number_integer()) {
      throw Error(ErrorCode::Parse, "node entry requires an integer id");
    }
    const NodeId id = entry.at("id").get<NodeId>();
    reject_unknown_keys(entry, {"id", "op", "inputs", "attrs"}, "node", id);
    if (id < 0) throw Error(ErrorCode::Parse, "node ids must be non-negative", id);
    if (!ids.insert(id).second) throw Error(ErrorCode::DuplicateId, "duplicate node id", id);
    if (!entry.contains("op") || !entry.at("op").is_string()) {
      throw Error(ErrorCode::Parse, "node requires an op name", id);
    }
    const auto op = entry.at("op").get<std::string>();
    const auto kind = parse_op_name(op);
    if (!kind) throw Error(ErrorCode::UnknownOp, "unknown op kind '" + op + "'", id);

    Node n;
    n.id = id;
    n.kind = *kind;
    if (entry.contains("inputs")) n.inputs = int_list(entry.at("inputs"), "inputs", id);
    n.attrs = parse_attrs(entry.value("attrs", json::object()), *kind, id);
    g.insert(std::move(n));
  }
  std::vector<NodeId> outputs = int_list(doc.at("outputs"), "outputs", std::nullopt);
  g.set_outputs(outputs);

  for (const auto& n : g.nodes()) {
    for (auto in : n.inputs) {
      if (!g.contains(in)) {
        throw Error(ErrorCode::DanglingInput,
                    "input references missing node " + std::to_string(in), n.id);
      }
    }
  }
  if (!ids.empty() && (*ids.begin() != 0 || *ids.rbegin() != static_cast<NodeId>(ids.size()) - 1)) {
    throw Error(ErrorCode::Parse, "node ids must be dense from 0");
  }
  g.validate();
  return g;
}

TensorGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot read graph file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

std::string write_graph(const TensorGraph& graph) {
  json nodes = json::array();
  std::vector<NodeId> order;
  for (const auto& n : graph.nodes()) order.push_back(n.id);
  std::sort(order.begin(), order.end());
  for (auto id : order) {
    const Node& n = graph.node(id);
    if (n.kind == OpKind::Fused) {
      throw Error(ErrorCode::InvalidArgument, "fused nodes cannot be serialized", id);
    }
    json attrs = json::object();
    if (!n.attrs.shape.empty()) attrs["shape"] = n.attrs.shape;
    if (!n.attrs.perm.empty()) attrs["axes"] = n.attrs.perm;
    if (n.kind == OpKind::Const) attrs["data"] = n.attrs.data;
    nodes.push_back({{"id", n.id},
                     {"op", std::string(op_name(n.kind))},
                     {"inputs", n.inputs},
                     {"attrs", attrs}});
  }
  json doc = {{"nodes", nodes}, {"outputs", graph.outputs()}};
  return doc.dump(2);
}

}  // namespace fusenas::ir
