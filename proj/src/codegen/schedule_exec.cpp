#include "fusenas/codegen/schedule_exec.hpp"

#include <array>
#include <cmath>
#include <thread>

namespace fusenas::codegen {

namespace {

constexpr int kDepth = static_cast<int>(kMaxLoopDepth);
constexpr int kInner = kDepth - 1;

inline float gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f)); }

inline float apply(StmtOp op, float a, float b) { return op == StmtOp::Add ? a + b : a * b; }

/// The variant padded to exactly kDepth loops (extra extent-1 loops outside).
struct Plan {
  const PointwiseNest* nest = nullptr;
  int first_real = 0;  // first position backed by a domain variable
  std::array<std::int64_t, kDepth> extent{};
  std::array<std::int64_t, kDepth> out_stride{};
  std::vector<std::array<std::int64_t, kDepth>> op_stride;
  std::vector<int> level;
  std::array<std::vector<int>, kDepth + 1> at_level;  // index 0 is "before all loops"
};

Plan make_plan(const ScheduleVariant& v) {
  const auto& nest = *v.nest;
  const auto& dom = nest.domain;
  Plan p;
  p.nest = &nest;
  p.first_real = kDepth - static_cast<int>(v.depth());
  const TensorShape out_shape(dom.extents);
  p.op_stride.resize(nest.operands.size());
  for (int q = 0; q < kDepth; ++q) {
    p.extent[q] = 1;
    p.out_stride[q] = 0;
    for (auto& s : p.op_stride) s[q] = 0;
    if (q < p.first_real) continue;
    const std::size_t var = v.order[static_cast<std::size_t>(q - p.first_real)];
    p.extent[q] = dom.extents[var];
    p.out_stride[q] = dom.extents[var] == 1 ? 0 : out_shape.stride(var);
    for (std::size_t o = 0; o < nest.operands.size(); ++o) {
      p.op_stride[o][q] = nest.operands[o].access.stride(var);
    }
  }
  for (std::size_t s = 0; s < nest.body.size(); ++s) {
    const int l = v.hoist_level[s] < 0 ? -1 : v.hoist_level[s] + p.first_real;
    p.level.push_back(l);
    p.at_level[static_cast<std::size_t>(l + 1)].push_back(static_cast<int>(s));
  }
  return p;
}

template <int U, class F>
inline void unrolled(std::int64_t n, F&& f) {
  std::int64_t t = 0;
  for (; t + U <= n; t += U) {
    for (int u = 0; u < U; ++u) f(t + u);
  }
  for (; t < n; ++t) f(t);
}

template <int U>
class Runner {
 public:
  Runner(const Plan& plan, std::span<const float* const> in, float* out)
      : p_(plan), in_(in), out_(out),
        scalar_(plan.nest->body.size(), 0.0f),
        strip_(plan.nest->body.size() * static_cast<std::size_t>(kStripLength), 0.0f),
        view_(plan.nest->body.size(), nullptr) {}

  void run(std::int64_t lo, std::int64_t hi) {
    std::array<std::int64_t, kDepth> x{};
    eval_scalars(0, x);
    loop(0, x, lo, hi);
  }

 private:
  void loop(int q, std::array<std::int64_t, kDepth>& x, std::int64_t lo, std::int64_t hi) {
    const bool split = q == p_.first_real;
    const std::int64_t b = split ? lo : 0, e = split ? hi : p_.extent[q];
    if (q == kInner) {
      for (std::int64_t s = b; s < e; s += kStripLength) {
        x[q] = s;
        strip(x, std::min(kStripLength, e - s));
      }
      return;
    }
    for (std::int64_t i = b; i < e; ++i) {
      x[q] = i;
      eval_scalars(q + 1, x);
      loop(q + 1, x, lo, hi);
    }
  }

  std::int64_t operand_offset(int o, const std::array<std::int64_t, kDepth>& x) const {
    std::int64_t off = p_.nest->operands[static_cast<std::size_t>(o)].access.flat_offset;
    for (int q = 0; q < kDepth; ++q) off += p_.op_stride[static_cast<std::size_t>(o)][q] * x[q];
    return off;
  }

  void eval_scalars(int slot, const std::array<std::int64_t, kDepth>& x) {
    if (slot == kInner + 1) return;  // innermost statements run in strips
    for (int s : p_.at_level[static_cast<std::size_t>(slot)]) {
      const auto& st = p_.nest->body[static_cast<std::size_t>(s)];
      float v;
      switch (st.op) {
        case StmtOp::Load:
          v = in_[static_cast<std::size_t>(st.operand)][operand_offset(st.operand, x)];
          break;
        case StmtOp::Gelu: v = gelu(scalar_[static_cast<std::size_t>(st.args[0])]); break;
        default:
          v = scalar_[static_cast<std::size_t>(st.args[0])];
          for (std::size_t a = 1; a < st.args.size(); ++a) {
            v = apply(st.op, v, scalar_[static_cast<std::size_t>(st.args[a])]);
          }
      }
      scalar_[static_cast<std::size_t>(s)] = v;
    }
  }

  float* buf(int s) { return strip_.data() + static_cast<std::size_t>(s) * kStripLength; }
  bool varies(int s) const { return p_.level[static_cast<std::size_t>(s)] == kInner; }

  void strip(const std::array<std::int64_t, kDepth>& x, std::int64_t n) {
    std::int64_t base = 0;
    for (int q = 0; q < kDepth; ++q) base += p_.out_stride[q] * x[q];
    float* o = out_ + base;
    const std::int64_t os = p_.out_stride[kInner];
    const int r = static_cast<int>(p_.nest->body.size()) - 1;

    for (int s : p_.at_level[kInner + 1]) {
      const auto& st = p_.nest->body[static_cast<std::size_t>(s)];
      if (st.op == StmtOp::Load) {
        const float* src = in_[static_cast<std::size_t>(st.operand)] + operand_offset(st.operand, x);
        const std::int64_t stride = p_.op_stride[static_cast<std::size_t>(st.operand)][kInner];
        if (stride == 1) {
          view_[static_cast<std::size_t>(s)] = src;  // read in place
          continue;
        }
        float* d = buf(s);
        unrolled<U>(n, [&](std::int64_t t) { d[t] = src[t * stride]; });
        view_[static_cast<std::size_t>(s)] = d;
        continue;
      }
      float* d = s == r && os == 1 ? o : buf(s);
      view_[static_cast<std::size_t>(s)] = d;
      if (st.op == StmtOp::Gelu) {
        const int a = st.args[0];
        if (varies(a)) {
          const float* src = view(a);
          unrolled<U>(n, [&](std::int64_t t) { d[t] = gelu(src[t]); });
        } else {
          const float g = gelu(scalar_[static_cast<std::size_t>(a)]);
          unrolled<U>(n, [&](std::int64_t t) { d[t] = g; });
        }
        continue;
      }
      const bool add = st.op == StmtOp::Add;
      const int first = st.args[0];
      std::size_t k = 1;
      if (st.args.size() > 1 && (varies(first) || varies(st.args[1]))) {
        combine_first(d, first, st.args[1], add, n);
        k = 2;
      } else if (varies(first)) {
        const float* src = view(first);
        unrolled<U>(n, [&](std::int64_t t) { d[t] = src[t]; });
      } else {
        const float c = scalar_[static_cast<std::size_t>(first)];
        unrolled<U>(n, [&](std::int64_t t) { d[t] = c; });
      }
      for (; k < st.args.size(); ++k) {
        const int a = st.args[k];
        if (varies(a)) {
          const float* src = view(a);
          if (add) {
            unrolled<U>(n, [&](std::int64_t t) { d[t] = d[t] + src[t]; });
          } else {
            unrolled<U>(n, [&](std::int64_t t) { d[t] = d[t] * src[t]; });
          }
        } else {
          const float c = scalar_[static_cast<std::size_t>(a)];
          if (add) {
            unrolled<U>(n, [&](std::int64_t t) { d[t] = d[t] + c; });
          } else {
            unrolled<U>(n, [&](std::int64_t t) { d[t] = d[t] * c; });
          }
        }
      }
    }

    if (varies(r)) {
      const float* src = view(r);
      if (src != o) unrolled<U>(n, [&](std::int64_t t) { o[t * os] = src[t]; });
    } else {
      const float c = scalar_[static_cast<std::size_t>(r)];
      unrolled<U>(n, [&](std::int64_t t) { o[t * os] = c; });
    }
  }

  const float* view(int s) const { return view_[static_cast<std::size_t>(s)]; }

  // d = a op b where at least one side varies along the strip.
  void combine_first(float* d, int a, int b, bool add, std::int64_t n) {
    if (varies(a) && varies(b)) {
      const float *x = view(a), *y = view(b);
      if (add) {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = x[t] + y[t]; });
      } else {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = x[t] * y[t]; });
      }
    } else if (varies(a)) {
      const float* x = view(a);
      const float c = scalar_[static_cast<std::size_t>(b)];
      if (add) {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = x[t] + c; });
      } else {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = x[t] * c; });
      }
    } else {
      const float c = scalar_[static_cast<std::size_t>(a)];
      const float* y = view(b);
      if (add) {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = c + y[t]; });
      } else {
        unrolled<U>(n, [&](std::int64_t t) { d[t] = c * y[t]; });
      }
    }
  }

  const Plan& p_;
  std::span<const float* const> in_;
  float* out_;
  std::vector<float> scalar_;
  std::vector<float> strip_;
  std::vector<const float*> view_;  // per statement: its strip values
};

template <int U>
void run_range(const Plan& p, std::span<const float* const> in, float* out, std::int64_t lo,
               std::int64_t hi) {
  Runner<U>(p, in, out).run(lo, hi);
}

void dispatch(int unroll, const Plan& p, std::span<const float* const> in, float* out,
              std::int64_t lo, std::int64_t hi) {
  switch (unroll) {
    case 1: run_range<1>(p, in, out, lo, hi); break;
    case 2: run_range<2>(p, in, out, lo, hi); break;
    case 4: run_range<4>(p, in, out, lo, hi); break;
    case 8: run_range<8>(p, in, out, lo, hi); break;
    default: throw Error(ErrorCode::InvalidArgument, "unsupported unroll factor");
  }
}

}  // namespace

void run_schedule(const ScheduleVariant& v, std::span<const float* const> operands, float* out,
                  int workers) {
  if (!v.nest) throw Error(ErrorCode::InvalidArgument, "variant has no loop nest");
  if (operands.size() != v.nest->operands.size()) {
    throw Error(ErrorCode::MissingBinding, "operand count does not match the loop nest");
  }
  if (v.nest->body.empty()) throw Error(ErrorCode::Internal, "empty statement body");
  const Plan plan = make_plan(v);
  const std::int64_t outer = plan.extent[static_cast<std::size_t>(plan.first_real)];
  const std::int64_t n = std::clamp<std::int64_t>(workers, 1, outer);
  if (n == 1) {
    dispatch(v.unroll, plan, operands, out, 0, outer);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (std::int64_t w = 0; w < n; ++w) {
    const std::int64_t lo = outer * w / n, hi = outer * (w + 1) / n;
    pool.emplace_back([&, lo, hi] { dispatch(v.unroll, plan, operands, out, lo, hi); });
  }
  for (auto& t : pool) t.join();
}

ir::Tensor execute_schedule(const ScheduleVariant& v, const ir::Bindings& bindings, int workers) {
  std::vector<const float*> ptrs;
  for (const auto& op : v.nest->operands) {
    if (op.source != OperandSource::Leaf) {
      throw Error(ErrorCode::InvalidArgument, "schedule reads a block temporary");
    }
    auto it = bindings.find(op.leaf);
    if (it == bindings.end()) throw Error(ErrorCode::MissingBinding, "no binding for operand", op.leaf);
    if (it->second.shape != op.access.shape) {
      throw Error(ErrorCode::ShapeMismatch,
                  "binding has shape " + it->second.shape.to_string() + ", expected " +
                      op.access.shape.to_string(),
                  op.leaf);
    }
    ptrs.push_back(it->second.data.data());
  }
  ir::Tensor out(TensorShape(v.nest->domain.extents));
  run_schedule(v, ptrs, out.data.data(), workers);
  return out;
}

void run_matmul(const MatMulStage& st, const float* a, const float* b, float* out) {
  for (std::int64_t i = 0; i < st.m; ++i) {
    for (std::int64_t j = 0; j < st.n; ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < st.k; ++k) {
        acc += static_cast<double>(a[i * st.k + k]) * static_cast<double>(b[k * st.n + j]);
      }
      out[i * st.n + j] = static_cast<float>(acc);
    }
  }
}

std::vector<std::optional<ScheduleVariant>> default_stage_variants(
    const std::shared_ptr<const LoweredBlock>& block) {
  std::vector<std::optional<ScheduleVariant>> out;
  for (const auto& stage : block->stages) {
    if (const auto* pw = std::get_if<PointwiseStage>(&stage)) {
      std::shared_ptr<const PointwiseNest> nest(block, &pw->nest);
      std::vector<std::size_t> order(pw->nest.domain.rank());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      out.push_back(make_variant(nest, std::move(order)));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

void run_block(const LoweredBlock& block,
               std::span<const std::optional<ScheduleVariant>> stage_variants,
               const ScheduleVariant& main, const std::function<const float*(NodeId)>& leaf,
               std::vector<std::vector<float>>& temps, float* out, int workers) {
  if (temps.size() != block.temps.size() || stage_variants.size() != block.stages.size()) {
    throw Error(ErrorCode::Internal, "block buffers do not match its lowering", block.block);
  }
  auto resolve = [&](OperandSource src, NodeId id, int temp) -> const float* {
    return src == OperandSource::Leaf ? leaf(id) : temps[static_cast<std::size_t>(temp)].data();
  };
  auto operand_ptrs = [&](const PointwiseNest& nest) {
    std::vector<const float*> ptrs;
    for (const auto& op : nest.operands) ptrs.push_back(resolve(op.source, op.leaf, op.temp));
    return ptrs;
  };
  for (std::size_t s = 0; s < block.stages.size(); ++s) {
    const auto& stage = block.stages[s];
    if (const auto* mm = std::get_if<MatMulStage>(&stage)) {
      run_matmul(*mm, resolve(mm->lhs.source, mm->lhs.leaf, mm->lhs.temp),
                 resolve(mm->rhs.source, mm->rhs.leaf, mm->rhs.temp),
                 temps[static_cast<std::size_t>(mm->out_temp)].data());
    } else {
      const auto& pw = std::get<PointwiseStage>(stage);
      const auto ptrs = operand_ptrs(pw.nest);
      run_schedule(*stage_variants[s], ptrs, temps[static_cast<std::size_t>(pw.out_temp)].data(),
                   workers);
    }
  }
  const auto ptrs = operand_ptrs(*main.nest);
  run_schedule(main, ptrs, out, workers);
}

}  // namespace fusenas::codegen
