#include "fusenas/nas/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace fusenas::nas {

double surrogate_accuracy(const ArchSample& arch, double a_max, double c1) {
  arch.validate();
  const double p = static_cast<double>(ir::parameter_count(arch));
  return std::clamp(a_max - c1 / std::sqrt(p), 0.0, 1.0);
}

double SurrogateTrainer::evaluate(const ArchSample& arch) {
  ++calls_;
  double acc = surrogate_accuracy(arch, a_max_, c1_);
  if (noise_std_ > 0.0) {
    std::seed_seq seq{static_cast<std::uint64_t>(arch.num_layers),
                      static_cast<std::uint64_t>(arch.hidden_size),
                      static_cast<std::uint64_t>(arch.ffn_size), seed_};
    std::mt19937_64 rng(seq);
    acc = std::clamp(acc + std::normal_distribution<double>(0.0, noise_std_)(rng), 0.0, 1.0);
  }
  return acc;
}

std::string ExternalCommandTrainer::command_for(const ArchSample& arch) const {
  const std::pair<const char*, int> fields[] = {{"{layers}", arch.num_layers},
                                                {"{hidden}", arch.hidden_size},
                                                {"{ffn}", arch.ffn_size},
                                                {"{heads}", arch.num_heads}};
  std::string cmd = template_;
  for (const auto& [key, value] : fields) {
    const std::string k = key, v = std::to_string(value);
    for (auto pos = cmd.find(k); pos != std::string::npos; pos = cmd.find(k, pos + v.size())) {
      cmd.replace(pos, k.size(), v);
    }
  }
  return cmd;
}

double ExternalCommandTrainer::evaluate(const ArchSample& arch) {
  const std::string cmd = command_for(arch);
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(ErrorCode::Execution, "cannot start trainer command: " + cmd);
  std::string output;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
  const int status = ::pclose(pipe);
  if (status != 0) {
    throw Error(ErrorCode::Execution, "trainer command failed (" + std::to_string(status) + "): " + cmd);
  }
  std::istringstream in(output);
  for (std::string tok; in >> tok;) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) continue;
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::Execution, "trainer reported accuracy outside [0, 1]: " + tok);
      }
      return v;
    } catch (const std::logic_error&) {
      continue;
    }
  }
  throw Error(ErrorCode::Execution, "trainer printed no number: " + cmd);
}

}  // namespace fusenas::nas
