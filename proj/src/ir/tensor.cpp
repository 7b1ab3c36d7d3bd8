#include "fusenas/ir/tensor.hpp"

#include <sstream>

#include "fusenas/error.hpp"

namespace fusenas {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::DuplicateId: return "duplicate-id";
    case ErrorCode::UnknownOp: return "unknown-op";
    case ErrorCode::DanglingInput: return "dangling-input";
    case ErrorCode::Cycle: return "cycle";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::MissingBinding: return "missing-binding";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::LoweringUnsupported: return "lowering-unsupported";
    case ErrorCode::StalePlan: return "stale-plan";
    case ErrorCode::NonFiniteGradient: return "non-finite-gradient";
    case ErrorCode::Execution: return "execution";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

namespace {
std::string format_error(ErrorCode code, const std::string& message,
                         std::optional<NodeId> node) {
  std::string out = std::string(to_string(code)) + " error";
  if (node) out += " at node " + std::to_string(*node);
  return out + ": " + message;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<NodeId> node)
    : std::runtime_error(format_error(code, message, node)),
      code_(code),
      node_(node) {}

}  // namespace fusenas

namespace fusenas::ir {

TensorShape::TensorShape(std::initializer_list<std::int64_t> dims)
    : TensorShape(std::vector<std::int64_t>(dims)) {}

TensorShape::TensorShape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > kMaxRank) {
    throw Error(ErrorCode::InvalidArgument,
                "tensor rank must be in [1, 4], got " + std::to_string(dims_.size()));
  }
  for (auto d : dims_) {
    if (d < 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "tensor dims must be >= 1, got " + std::to_string(d));
    }
  }
}

std::int64_t TensorShape::numel() const {
  std::int64_t n = 1;
  for (auto d : dims_) n *= d;
  return dims_.empty() ? 0 : n;
}

std::int64_t TensorShape::stride(std::size_t i) const {
  std::int64_t s = 1;
  for (std::size_t k = i + 1; k < dims_.size(); ++k) s *= dims_[k];
  return s;
}

std::string TensorShape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

bool broadcasts_to(const TensorShape& operand, const TensorShape& target) {
  if (operand == target) return true;
  if (operand.rank() != target.rank() || operand.dim(0) != 1) return false;
  for (std::size_t i = 1; i < operand.rank(); ++i) {
    if (operand.dim(i) != target.dim(i)) return false;
  }
  return true;
}

std::optional<TensorShape> broadcast_shape(const TensorShape& a,
                                           const TensorShape& b) {
  if (broadcasts_to(a, b)) return b;
  if (broadcasts_to(b, a)) return a;
  return std::nullopt;
}

Tensor::Tensor(TensorShape s, float fill)
    : shape(std::move(s)), data(static_cast<std::size_t>(shape.numel()), fill) {}

Tensor::Tensor(TensorShape s, std::vector<float> values)
    : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<std::int64_t>(data.size()) != shape.numel()) {
    throw Error(ErrorCode::ShapeMismatch,
                "tensor payload has " + std::to_string(data.size()) +
                    " elements, shape " + shape.to_string() + " needs " +
                    std::to_string(shape.numel()));
  }
}

Tensor random_tensor(const TensorShape& shape, std::mt19937_64& rng, float lo,
                     float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

}  // namespace fusenas::ir
