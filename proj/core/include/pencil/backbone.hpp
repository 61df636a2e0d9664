#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pencil/matrix.hpp"
#include "pencil/numerics.hpp"

namespace pencil {

enum class Activation { kRelu, kTanh };

struct MlpConfig {
  std::vector<int> layer_sizes;  // input dim, hidden sizes..., num classes
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;
};

struct SgdOptions {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Activations cached by forward() for the matching backward pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations per layer; pre.back() are the logits
  std::vector<Matrix> post;  // activations per hidden layer
  std::vector<ProbVector> probs;
  const Matrix& logits() const { return pre.back(); }
};

/// Fully-connected classifier with explicit forward/backward passes and an
/// SGD-with-momentum optimizer (buffer <- m*buffer + grad, param <- param -
/// lr*buffer, weight decay added to grad before momentum).
class Mlp {
public:
  /// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases,
  /// deterministic given config.seed.
  explicit Mlp(const MlpConfig& config, const SgdOptions& sgd = {});

  /// Batch forward. Rows of x are feature vectors; throws on dimension mismatch.
  ForwardCache forward(const Matrix& x) const;

  /// Chain-rule backward from dL/d(logits) and one optimizer step.
  /// grad_logits rows already carry any batch-mean factor.
  /// Throws DivergenceError if a parameter becomes non-finite.
  void backward_and_step(const ForwardCache& cache, std::span<const LogitVector> grad_logits);

  /// Fraction of rows whose argmax prediction matches the label.
  double evaluate_accuracy(const Matrix& x, std::span<const int> labels) const;

  void set_learning_rate(double lr) { sgd_.learning_rate = lr; }
  const SgdOptions& sgd() const { return sgd_; }
  const MlpConfig& config() const { return config_; }
  int num_classes() const { return config_.layer_sizes.back(); }
  int input_dim() const { return config_.layer_sizes.front(); }

  // Parameter access for tests and checkpointing.
  const Matrix& weight(std::size_t layer) const { return weights_[layer]; }
  Matrix& weight(std::size_t layer) { return weights_[layer]; }
  const std::vector<double>& bias(std::size_t layer) const { return biases_[layer]; }
  std::vector<double>& bias(std::size_t layer) { return biases_[layer]; }
  const Matrix& weight_momentum(std::size_t layer) const { return weight_momentum_[layer]; }
  const std::vector<double>& bias_momentum(std::size_t layer) const {
    return bias_momentum_[layer];
  }
  std::size_t num_layers() const { return weights_.size(); }

  /// "PMLP" checkpoint: header (magic, version, layer sizes, activation id,
  /// optimizer hyperparameters), then parameters and momentum buffers as
  /// little-endian f64 in layer order.
  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

private:
  MlpConfig config_;
  SgdOptions sgd_;
  std::vector<Matrix> weights_;  // layer l: (in x out), row-major
  std::vector<std::vector<double>> biases_;
  std::vector<Matrix> weight_momentum_;
  std::vector<std::vector<double>> bias_momentum_;
};

}  // namespace pencil
