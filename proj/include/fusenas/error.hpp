#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace fusenas {

using NodeId = std::int64_t;

enum class ErrorCode {
  Parse,
  DuplicateId,
  UnknownOp,
  DanglingInput,
  Cycle,
  ShapeMismatch,
  MissingBinding,
  InvalidArgument,
  LoweringUnsupported,
  StalePlan,
  NonFiniteGradient,
  Execution,
  Internal,
};

const char* to_string(ErrorCode code);

/// Error raised by every fusenas module. Carries the node that triggered it
/// when one exists, so diagnostics can point at the offending graph entry.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<NodeId> node = std::nullopt);

  ErrorCode code() const { return code_; }
  std::optional<NodeId> node() const { return node_; }

  /// True for errors caused by bad user input rather than broken internals.
  bool is_user_error() const {
    return code_ != ErrorCode::Internal;
  }

 private:
  ErrorCode code_;
  std::optional<NodeId> node_;
};

}  // namespace fusenas
