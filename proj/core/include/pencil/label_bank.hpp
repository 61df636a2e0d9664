#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pencil/numerics.hpp"

namespace pencil {

/// Per-example label state: the fixed noisy labels, the free label logits, and
/// the label distributions derived from them by softmax.
///
/// Initialization puts init_constant (K) on the noisy class of each logit row,
/// so every starting distribution is concentrated on its noisy label. The noisy
/// labels themselves are never mutated; reset() rebuilds the logits from them.
class LabelBank {
public:
  /// Builds a bank with logits K * onehot(noisy label) per example.
  /// Throws InvalidInputError for out-of-range class indices or K <= 0.
  static LabelBank init_from_noisy(std::vector<int> noisy_labels, int num_classes,
                                   double init_constant = 10.0);

  std::size_t size() const { return noisy_labels_.size(); }
  int num_classes() const { return num_classes_; }
  double init_constant() const { return init_constant_; }
  const std::vector<int>& noisy_labels() const { return noisy_labels_; }

  /// softmax of the stored logits for example i.
  ProbVector distribution(std::size_t i) const;
  std::span<const double> logits_row(std::size_t i) const;

  /// logits_i -= lambda * grads_i for the given batch indices only.
  void apply_label_update(std::span<const std::size_t> batch,
                          std::span<const LogitVector> grads, double lambda);

  /// argmax of each example's distribution, ties to the lowest index.
  std::vector<int> hard_labels() const;
  int hard_label(std::size_t i) const;

  /// Reinitializes logits from the original noisy labels (never from learned state).
  void reset();

  /// Number of examples whose hard label matches the given ground truth.
  std::size_t correct_label_count(std::span<const int> true_labels) const;

  /// "PNCL" checkpoint: header (magic, version, n, c, K), logits row-major as
  /// little-endian f64, then noisy class indices as little-endian i32.
  void save(const std::filesystem::path& path) const;
  static LabelBank load(const std::filesystem::path& path);

private:
  LabelBank() = default;

  int num_classes_ = 0;
  double init_constant_ = 0.0;
  std::vector<int> noisy_labels_;
  std::vector<double> logits_;  // n x c row-major
};

}  // namespace pencil
