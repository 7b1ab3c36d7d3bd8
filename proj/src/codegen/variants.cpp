#include "fusenas/codegen/variants.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace fusenas::codegen {

namespace {

const char* var_name(std::size_t v) {
  static const char* names[] = {"i", "j", "k"};
  return v < 3 ? names[v] : "?";
}

const char* stmt_name(StmtOp op) {
  switch (op) {
    case StmtOp::Load: return "load";
    case StmtOp::Add: return "add";
    case StmtOp::Mul: return "mul";
    case StmtOp::Gelu: return "gelu";
  }
  return "?";
}

}  // namespace

std::vector<int> ScheduleVariant::hoisted_temporaries() const {
  std::vector<int> out;
  const int inner = static_cast<int>(depth()) - 1;
  for (std::size_t s = 0; s < nest->body.size(); ++s) {
    if (nest->body[s].op != StmtOp::Load && hoist_level[s] < inner) out.push_back(static_cast<int>(s));
  }
  return out;
}

ScheduleVariant make_variant(std::shared_ptr<const PointwiseNest> nest,
                             std::vector<std::size_t> order, int unroll) {
  const auto& dom = nest->domain;
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted.size() != dom.rank() || sorted[i] != i) {
      throw Error(ErrorCode::InvalidArgument, "loop order is not a permutation of the domain");
    }
  }
  if (unroll != 1 && unroll != 2 && unroll != 4 && unroll != 8) {
    throw Error(ErrorCode::InvalidArgument, "unroll factor must be 1, 2, 4 or 8");
  }

  ScheduleVariant v;
  v.nest = nest;
  v.order = std::move(order);
  v.unroll = unroll;
  std::vector<int> position(dom.rank());
  for (std::size_t p = 0; p < v.order.size(); ++p) position[v.order[p]] = static_cast<int>(p);

  for (const auto& s : nest->body) {
    int level = -1;
    std::int64_t ideal = 1;
    for (std::size_t var = 0; var < dom.rank(); ++var) {
      if (s.deps & (1u << var)) {
        level = std::max(level, position[var]);
        ideal *= dom.extents[var];
      }
    }
    std::int64_t execs = 1;
    for (int p = 0; p <= level; ++p) execs *= dom.extents[v.order[static_cast<std::size_t>(p)]];
    v.hoist_level.push_back(level);
    v.profile.redundant_flops += s.cost * (execs - ideal);
  }
  const std::size_t inner = v.order.back();
  for (const auto& op : nest->operands) v.profile.stride_cost += std::abs(op.access.stride(inner));
  return v;
}

std::vector<ScheduleVariant> gen_variants(std::shared_ptr<const PointwiseNest> nest,
                                          std::span<const int> unrolls) {
  std::vector<std::size_t> order(nest->domain.rank());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ScheduleVariant> out;
  do {
    for (int u : unrolls) out.push_back(make_variant(nest, order, u));
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

double estimate_locality(const ScheduleVariant& v, double lambda) {
  const auto& dom = v.nest->domain;
  const std::size_t inner = v.order.back();
  double cost = 0.0;
  for (const auto& op : v.nest->operands) {
    std::int64_t touched = 1;
    const unsigned mask = op.access.dependence_mask();
    for (std::size_t var = 0; var < dom.rank(); ++var) {
      if (mask & (1u << var)) touched *= dom.extents[var];
    }
    cost += static_cast<double>(std::abs(op.access.stride(inner))) * static_cast<double>(touched);
  }
  return cost + lambda * static_cast<double>(v.profile.redundant_flops);
}

std::string dump_variant(const ScheduleVariant& v) {
  std::ostringstream os;
  os << "order";
  for (auto var : v.order) os << ' ' << var_name(var) << '[' << v.nest->domain.extents[var] << ']';
  os << "\nunroll " << v.unroll << '\n';
  for (std::size_t s = 0; s < v.nest->body.size(); ++s) {
    const auto& st = v.nest->body[s];
    os << "s" << s << ' ' << stmt_name(st.op);
    if (st.op == StmtOp::Load) {
      const auto& op = v.nest->operands[static_cast<std::size_t>(st.operand)];
      if (op.source == OperandSource::Leaf) {
        os << " %" << op.leaf;
      } else {
        os << " t" << op.temp;
      }
    }
    for (int a : st.args) os << " s" << a;
    const int level = v.hoist_level[s];
    os << " @";
    if (level < 0) {
      os << "top";
    } else {
      os << var_name(v.order[static_cast<std::size_t>(level)]);
    }
    os << '\n';
  }
  os << "redundant_flops " << v.profile.redundant_flops << "\nstride_cost "
     << v.profile.stride_cost << '\n';
  return os.str();
}

}  // namespace fusenas::codegen
