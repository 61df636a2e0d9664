#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pencil/backbone.hpp"
#include "pencil/losses.hpp"

namespace pencil {

enum class LambdaKind { kConstant, kLinearToZero, kPiecewise };

/// Label learning rate per phase-2 epoch.
struct LambdaSchedule {
  LambdaKind kind = LambdaKind::kConstant;
  double value = 400.0;                          // constant value, or initial for linear decay
  std::vector<std::pair<int, double>> pieces;    // (start epoch, value), sorted

  /// Lambda for phase-2 epoch t in [0, total). Linear decay reaches exactly 0
  /// at the final epoch.
  double at(int epoch, int total_epochs) const;
};

/// Everything a training run needs. Field names match the config file keys.
struct RunConfig {
  int epochs_phase1 = 20;
  int epochs_phase2 = 60;
  int epochs_phase3 = 40;
  double learning_rate_phase12 = 0.05;
  double learning_rate_phase3 = 0.02;
  std::vector<int> lr_decay_epochs = {20};  // phase-3 epochs where lr is divided by 10
  double alpha = 0.1;
  double beta = 0.4;
  LambdaSchedule lambda_schedule;
  double init_constant = 10.0;  // K
  int batch_size = 64;
  int repeat_count = 0;
  double repeat_damping = 1.0;  // multiplies lambda and phase-2/3 lr per repeat
  std::uint64_t seed = 1;
  LossVariant loss_variant = LossVariant::kKlInverse;
  std::vector<int> hidden_sizes = {32, 32};
  Activation activation = Activation::kRelu;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double test_fraction = 0.2;
  double validation_fraction = 0.1;

  /// Throws InvalidInputError when a field is out of its documented range.
  void validate() const;
};

/// Parses the flat `key = value` format ('#' comments, blank lines allowed).
/// Unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Round-trippable echo of a config in the same key = value format.
std::string format_run_config(const RunConfig& config);

std::string to_string(LossVariant variant);
std::string to_string(Activation activation);
std::string to_string(LambdaKind kind);

}  // namespace pencil
