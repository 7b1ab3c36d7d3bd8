#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fusenas::ir {

/// Dense tensor shape, rank 1..4, every dim >= 1.
class TensorShape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  TensorShape() = default;
  TensorShape(std::initializer_list<std::int64_t> dims);
  explicit TensorShape(std::vector<std::int64_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::int64_t dim(std::size_t i) const { return dims_.at(i); }
  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::int64_t numel() const;
  bool empty() const { return dims_.empty(); }

  /// Row-major stride of dimension i in elements.
  std::int64_t stride(std::size_t i) const;

  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<std::int64_t> dims_;
};

/// Result shape of an elementwise op: equal shapes, or the same shape with a
/// leading dim of 1 on one side (the 1xN-against-MxN row broadcast). Any other
/// combination returns nullopt.
std::optional<TensorShape> broadcast_shape(const TensorShape& a,
                                           const TensorShape& b);

/// True when `operand` can be read at every point of `target` under the row
/// broadcast rule (equal, or leading dim 1 with the rest equal).
bool broadcasts_to(const TensorShape& operand, const TensorShape& target);

struct Tensor {
  TensorShape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(TensorShape s, float fill = 0.0f);
  Tensor(TensorShape s, std::vector<float> values);

  std::int64_t numel() const { return shape.numel(); }
  std::span<float> span() { return data; }
  std::span<const float> span() const { return data; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Tensor with entries drawn uniformly from [lo, hi).
Tensor random_tensor(const TensorShape& shape, std::mt19937_64& rng,
                     float lo = -1.0f, float hi = 1.0f);

}  // namespace fusenas::ir
