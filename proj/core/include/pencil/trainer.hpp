#pragma once

#include <optional>
#include <vector>

#include "pencil/backbone.hpp"
#include "pencil/config.hpp"
#include "pencil/dataset.hpp"
#include "pencil/label_bank.hpp"
#include "pencil/rng.hpp"

namespace pencil {

/// One row of the training history. Fields that do not apply to a phase (or
/// that need ground truth when none is present) hold NaN / -1.
struct EpochRecord {
  int epoch = 0;   // global index, monotone across phases and repeats
  int phase = 0;   // 1 backbone, 2 label correction, 3 fine-tuning
  int repeat = 0;  // repeat iteration (phase 1 runs once, before repeat 0)
  double loss_total = 0.0;
  double loss_classification = 0.0;
  double loss_compatibility = 0.0;  // phase 2 only
  double loss_entropy = 0.0;        // phase 2 only
  long long correct_label_count = -1;
  double test_accuracy = 0.0;
  double validation_accuracy = 0.0;  // NaN without a validation split
  double lambda = 0.0;               // phase 2 only
  double learning_rate = 0.0;
};

struct RepeatSummary {
  int repeat = 0;
  bool reset_verified = false;             // hard labels == noisy labels at repeat start
  long long initial_correct_count = -1;    // right after reset, before any update
};

struct PhaseTiming {
  int phase = 0;
  int repeat = 0;
  int epochs = 0;
  double seconds = 0.0;
};

/// Everything deterministic about a finished run. Wall-clock timings are kept
/// separately so two identical runs serialize to identical bytes.
struct RunReport {
  RunConfig config;
  bool baseline_ce = false;
  std::size_t dataset_rows = 0;
  int dataset_dim = 0;
  int dataset_classes = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  bool has_truth = false;
  std::vector<EpochRecord> epochs;
  std::vector<RepeatSummary> repeats;
  int best_epoch = -1;
  double best_test_accuracy = 0.0;
  bool best_selected_on_test = false;  // true when no validation split exists
  int last_epoch = -1;
  double last_test_accuracy = 0.0;
  long long final_correct_count = -1;
};

/// Per-example label-logit gradient observed during phase 2.
struct GradProbeRow {
  int epoch = 0;         // phase-2 epoch, 0-based
  std::size_t example = 0;  // dataset row index
  double grad_original = 0.0;  // component at the observed (noisy) label
  double grad_true = 0.0;      // component at the hidden true label
};

struct TrainerOptions {
  bool baseline_ce = false;
  std::vector<std::size_t> probe_indices;  // dataset rows to observe in phase 2
};

struct PipelineResult {
  RunReport report;
  Mlp model;
  std::optional<LabelBank> bank;  // absent for the CE baseline
  std::vector<PhaseTiming> timings;
  std::vector<GradProbeRow> probe_rows;
};

/// Deterministic split + three-phase training. The dataset's true labels are
/// read only when computing metrics; withholding them changes no model or
/// label-bank byte.
class Trainer {
public:
  Trainer(RunConfig config, const Dataset& dataset, TrainerOptions options = {});

  /// Fixed high learning rate, plain cross entropy against noisy labels.
  std::vector<EpochRecord> phase1_backbone(Mlp& net);

  /// Joint updates: network step from the bundle's logit gradients, label step
  /// scaled by the lambda schedule. One forward pass feeds both.
  std::vector<EpochRecord> phase2_pencil(Mlp& net, LabelBank& bank, int repeat = 0);

  /// Classification loss only (alpha = beta = 0), step-decayed learning rate,
  /// label bank frozen.
  std::vector<EpochRecord> phase3_finetune(Mlp& net, const LabelBank& bank, int repeat = 0);

  /// phase1, then (repeat_count + 1) x (reset, phase2, phase3).
  PipelineResult run();

  // Split introspection (bank indices are positions in the train split).
  const std::vector<std::size_t>& train_rows() const { return train_rows_; }
  const std::vector<int>& train_noisy_labels() const { return train_noisy_; }
  const std::vector<int>& train_true_labels() const { return train_true_; }
  LabelBank make_bank() const;
  const std::vector<GradProbeRow>& probe_rows() const { return probe_rows_; }

private:
  struct EpochStats {
    double total = 0.0;
    double classification = 0.0;
    double compatibility = 0.0;
    double entropy = 0.0;
  };

  std::vector<std::vector<std::size_t>> make_batches();
  Matrix gather(const std::vector<std::size_t>& positions) const;
  double test_accuracy(const Mlp& net) const;
  double validation_accuracy(const Mlp& net) const;
  EpochRecord make_record(int phase, int repeat, const EpochStats& stats, const Mlp& net,
                          double lambda, double learning_rate,
                          long long correct_count);
  void check_finite(double loss, int phase, int repeat, int epoch) const;
  std::vector<EpochRecord> ce_epochs(Mlp& net, int phase, int repeat, int epochs,
                                     const std::vector<double>& lr_per_epoch);
  double damping(int repeat) const;

  RunConfig config_;
  TrainerOptions options_;
  Rng shuffle_rng_;
  int num_classes_ = 0;
  bool has_truth_ = false;

  std::vector<std::size_t> train_rows_;  // dataset row per train position
  Matrix train_features_;
  std::vector<int> train_noisy_;
  std::vector<int> train_true_;
  Matrix validation_features_;
  std::vector<int> validation_noisy_;
  Matrix test_features_;
  std::vector<int> test_true_;

  std::vector<std::size_t> probe_positions_;  // train positions of probed rows
  std::vector<GradProbeRow> probe_rows_;
  int global_epoch_ = 0;
};

PipelineResult run_pipeline(const RunConfig& config, const Dataset& dataset,
                            TrainerOptions options = {});

}  // namespace pencil
