#pragma once

#include <string>

#include "fusenas/nas/space.hpp"

namespace fusenas::nas {

class TrainerIface {
 public:
  virtual ~TrainerIface() = default;
  /// Accuracy in [0, 1].
  virtual double evaluate(const ArchSample& arch) = 0;
};

inline constexpr double kSurrogateMaxAccuracy = 0.87;
/// 0.024 · √p(BERT_BASE) with p = 84,934,656 = 9216², so BERT_BASE maps to 0.846.
inline constexpr double kSurrogateScale = 221.184;

/// acc = a_max − c₁/√p clamped to [0, 1], p = parameter_count(arch).
double surrogate_accuracy(const ArchSample& arch, double a_max = kSurrogateMaxAccuracy,
                          double c1 = kSurrogateScale);

/// Closed-form stand-in for fine-tuning. With noise_std > 0 a deterministic
/// per-(arch, seed) Gaussian perturbation is added before clamping.
class SurrogateTrainer final : public TrainerIface {
 public:
  explicit SurrogateTrainer(double a_max = kSurrogateMaxAccuracy, double c1 = kSurrogateScale,
                            double noise_std = 0.0, std::uint64_t seed = 0)
      : a_max_(a_max), c1_(c1), noise_std_(noise_std), seed_(seed) {}

  double evaluate(const ArchSample& arch) override;
  std::size_t calls() const { return calls_; }

 private:
  double a_max_, c1_, noise_std_;
  std::uint64_t seed_;
  std::size_t calls_ = 0;
};

/// Runs a shell command built from a template with {layers}, {hidden},
/// {ffn} and {heads} placeholders and parses the first real number it
/// prints. Non-zero exit, unparsable output or a value outside [0, 1] raise
/// an Execution error.
class ExternalCommandTrainer final : public TrainerIface {
 public:
  explicit ExternalCommandTrainer(std::string command_template)
      : template_(std::move(command_template)) {}

  std::string command_for(const ArchSample& arch) const;
  double evaluate(const ArchSample& arch) override;

 private:
  std::string template_;
};

}  // namespace fusenas::nas
