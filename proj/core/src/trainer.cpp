#include "pencil/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "pencil/losses.hpp"

namespace pencil {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 of (seed xor stream tag): independent deterministic streams.
  std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kModelStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

Trainer::Trainer(RunConfig config, const Dataset& dataset, TrainerOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      shuffle_rng_(derive_seed(config_.seed, kShuffleStream)) {
  config_.validate();
  if (dataset.size() == 0) throw InvalidInputError("dataset is empty");
  if (dataset.num_classes < 2) throw InvalidInputError("dataset needs at least 2 classes");
  if (dataset.noisy_labels.size() != dataset.size()) {
    throw InvalidInputError("dataset noisy label count mismatch");
  }
  num_classes_ = dataset.num_classes;
  has_truth_ = dataset.has_truth();

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(derive_seed(config_.seed, kSplitStream));
  split_rng.shuffle(order);

  const auto n_test = static_cast<std::size_t>(
      std::llround(config_.test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(
      std::llround(config_.validation_fraction * static_cast<double>(n)));
  if (n_test + n_val >= n) throw InvalidInputError("splits leave no training data");

  const auto dim = static_cast<std::size_t>(dataset.dim());
  auto fill = [&](Matrix& features, std::size_t begin, std::size_t end) {
    features = Matrix(end - begin, dim);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t row = order[i];
      std::copy_n(dataset.features.row(row), dim, features.row(i - begin));
    }
  };
  fill(test_features_, 0, n_test);
  fill(validation_features_, n_test, n_test + n_val);
  fill(train_features_, n_test + n_val, n);

  if (has_truth_) {
    test_true_.reserve(n_test);
    for (std::size_t i = 0; i < n_test; ++i) test_true_.push_back(dataset.true_labels[order[i]]);
  }
  validation_noisy_.reserve(n_val);
  for (std::size_t i = n_test; i < n_test + n_val; ++i) {
    validation_noisy_.push_back(dataset.noisy_labels[order[i]]);
  }
  train_rows_.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  train_noisy_.reserve(train_rows_.size());
  for (std::size_t row : train_rows_) train_noisy_.push_back(dataset.noisy_labels[row]);
  if (has_truth_) {
    train_true_.reserve(train_rows_.size());
    for (std::size_t row : train_rows_) train_true_.push_back(dataset.true_labels[row]);
  }

  if (!options_.probe_indices.empty()) {
    if (!has_truth_) {
      throw InvalidInputError("gradient probing needs the dataset's true labels");
    }
    std::unordered_map<std::size_t, std::size_t> position_of_row;
    for (std::size_t pos = 0; pos < train_rows_.size(); ++pos) {
      position_of_row.emplace(train_rows_[pos], pos);
    }
    for (std::size_t row : options_.probe_indices) {
      const auto it = position_of_row.find(row);
      if (row >= n || it == position_of_row.end()) {
        throw InvalidInputError("probe index " + std::to_string(row) +
                                " is not a training example");
      }
      probe_positions_.push_back(it->second);
    }
  }
}

LabelBank Trainer::make_bank() const {
  return LabelBank::init_from_noisy(train_noisy_, num_classes_, config_.init_constant);
}

std::vector<std::vector<std::size_t>> Trainer::make_batches() {
  std::vector<std::size_t> positions(train_features_.rows);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  shuffle_rng_.shuffle(positions);
  std::vector<std::vector<std::size_t>> batches;
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t begin = 0; begin < positions.size(); begin += batch) {
    const std::size_t end = std::min(begin + batch, positions.size());
    batches.emplace_back(positions.begin() + static_cast<std::ptrdiff_t>(begin),
                         positions.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Matrix Trainer::gather(const std::vector<std::size_t>& positions) const {
  Matrix x(positions.size(), train_features_.cols);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    std::copy_n(train_features_.row(positions[i]), train_features_.cols, x.row(i));
  }
  return x;
}

double Trainer::test_accuracy(const Mlp& net) const {
  if (!has_truth_ || test_features_.rows == 0) return kNaN;
  return net.evaluate_accuracy(test_features_, test_true_);
}

double Trainer::validation_accuracy(const Mlp& net) const {
  if (validation_features_.rows == 0) return kNaN;
  return net.evaluate_accuracy(validation_features_, validation_noisy_);
}

EpochRecord Trainer::make_record(int phase, int repeat, const EpochStats& stats, const Mlp& net,
                                 double lambda, double learning_rate, long long correct_count) {
  EpochRecord record;
  record.epoch = global_epoch_++;
  record.phase = phase;
  record.repeat = repeat;
  record.loss_total = stats.total;
  record.loss_classification = stats.classification;
  record.loss_compatibility = stats.compatibility;
  record.loss_entropy = stats.entropy;
  record.correct_label_count = correct_count;
  record.test_accuracy = test_accuracy(net);
  record.validation_accuracy = validation_accuracy(net);
  record.lambda = lambda;
  record.learning_rate = learning_rate;
  return record;
}

void Trainer::check_finite(double loss, int phase, int repeat, int epoch) const {
  if (!std::isfinite(loss)) {
    throw DivergenceError("training diverged in phase " + std::to_string(phase) + " (repeat " +
                          std::to_string(repeat) + ", epoch " + std::to_string(epoch) +
                          "): non-finite loss");
  }
}

namespace {

// Re-raise backbone-level divergence with the phase/epoch it happened in.
template <typename Fn>
auto with_phase_context(int phase, int repeat, int epoch, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    const std::string what = e.what();
    if (what.find("phase") != std::string::npos) throw;
    throw DivergenceError("training diverged in phase " + std::to_string(phase) + " (repeat " +
                          std::to_string(repeat) + ", epoch " + std::to_string(epoch) + "): " +
                          what);
  }
}

}  // namespace

double Trainer::damping(int repeat) const {
  double factor = 1.0;
  for (int i = 0; i < repeat; ++i) factor *= config_.repeat_damping;
  return factor;
}

std::vector<EpochRecord> Trainer::ce_epochs(Mlp& net, int phase, int repeat, int epochs,
                                            const std::vector<double>& lr_per_epoch) {
  std::vector<EpochRecord> records;
  const double n_train = static_cast<double>(train_features_.rows);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = lr_per_epoch[static_cast<std::size_t>(epoch)];
    net.set_learning_rate(lr);
    double loss_sum = 0.0;
    for (const auto& batch : make_batches()) {
      with_phase_context(phase, repeat, epoch, [&] {
        const Matrix x = gather(batch);
        const ForwardCache cache = net.forward(x);
        std::vector<int> labels(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = train_noisy_[batch[i]];
        const double loss = cross_entropy_loss(cache.probs, labels);
        check_finite(loss, phase, repeat, epoch);
        loss_sum += loss * static_cast<double>(batch.size());

        const double inv_batch = 1.0 / static_cast<double>(batch.size());
        std::vector<LogitVector> grads;
        grads.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const LogitVector g = grad_cross_entropy_net_logits(cache.probs[i], labels[i]);
          std::vector<double> scaled(g.size());
          for (std::size_t j = 0; j < g.size(); ++j) scaled[j] = inv_batch * g[j];
          grads.emplace_back(std::move(scaled));
        }
        net.backward_and_step(cache, grads);
      });
    }
    EpochStats stats;
    stats.total = loss_sum / n_train;
    stats.classification = stats.total;
    stats.compatibility = kNaN;
    stats.entropy = kNaN;
    records.push_back(make_record(phase, repeat, stats, net, 0.0, lr, -1));
  }
  return records;
}

std::vector<EpochRecord> Trainer::phase1_backbone(Mlp& net) {
  const std::vector<double> lr(static_cast<std::size_t>(config_.epochs_phase1),
                               config_.learning_rate_phase12);
  return ce_epochs(net, 1, 0, config_.epochs_phase1, lr);
}

std::vector<EpochRecord> Trainer::phase2_pencil(Mlp& net, LabelBank& bank, int repeat) {
  if (bank.size() != train_features_.rows) {
    throw InvalidInputError("label bank size does not match the training split");
  }
  const double damp = damping(repeat);
  const double lr = config_.learning_rate_phase12 * damp;
  const Hyperparams hp{config_.alpha, config_.beta};
  const double n_train = static_cast<double>(train_features_.rows);
  net.set_learning_rate(lr);

  std::vector<EpochRecord> records;
  for (int epoch = 0; epoch < config_.epochs_phase2; ++epoch) {
    const double lambda = config_.lambda_schedule.at(epoch, config_.epochs_phase2) * damp;
    EpochStats sums;
    for (const auto& batch : make_batches()) {
      with_phase_context(2, repeat, epoch, [&] {
      const Matrix x = gather(batch);
      const ForwardCache cache = net.forward(x);
      std::vector<ProbVector> yd;
      std::vector<int> labels(batch.size());
      yd.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        yd.push_back(bank.distribution(batch[i]));
        labels[i] = train_noisy_[batch[i]];
      }
      const LossBundle bundle =
          evaluate_bundle(cache.probs, yd, labels, config_.loss_variant, hp, num_classes_);
      check_finite(bundle.total, 2, repeat, epoch);
      const double weight = static_cast<double>(batch.size());
      sums.total += bundle.total * weight;
      sums.classification += bundle.classification * weight;
      sums.compatibility += bundle.compatibility * weight;
      sums.entropy += bundle.entropy_term * weight;

      if (!probe_positions_.empty()) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          for (std::size_t p = 0; p < probe_positions_.size(); ++p) {
            if (probe_positions_[p] != batch[i]) continue;
            GradProbeRow row;
            row.epoch = epoch;
            row.example = train_rows_[batch[i]];
            const LogitVector& g = bundle.grad_label_logits[i];
            row.grad_original = g[static_cast<std::size_t>(train_noisy_[batch[i]])];
            row.grad_true = g[static_cast<std::size_t>(train_true_[batch[i]])];
            probe_rows_.push_back(row);
          }
        }
      }

      // Both updates use this batch's pre-update f and y^d.
      net.backward_and_step(cache, bundle.grad_net_logits);
      bank.apply_label_update(batch, bundle.grad_label_logits, lambda);
      });
    }
    EpochStats stats;
    stats.total = sums.total / n_train;
    stats.classification = sums.classification / n_train;
    stats.compatibility = sums.compatibility / n_train;
    stats.entropy = sums.entropy / n_train;
    const long long correct =
        has_truth_ ? static_cast<long long>(bank.correct_label_count(train_true_)) : -1;
    records.push_back(make_record(2, repeat, stats, net, lambda, lr, correct));
  }
  return records;
}

std::vector<EpochRecord> Trainer::phase3_finetune(Mlp& net, const LabelBank& bank, int repeat) {
  if (bank.size() != train_features_.rows) {
    throw InvalidInputError("label bank size does not match the training split");
  }
  const double damp = damping(repeat);
  const double inv_c = 1.0 / static_cast<double>(num_classes_);
  const double n_train = static_cast<double>(train_features_.rows);

  std::vector<EpochRecord> records;
  for (int epoch = 0; epoch < config_.epochs_phase3; ++epoch) {
    double lr = config_.learning_rate_phase3 * damp;
    for (int decay_epoch : config_.lr_decay_epochs) {
      if (decay_epoch <= epoch) lr /= 10.0;
    }
    net.set_learning_rate(lr);
    double loss_sum = 0.0;
    for (const auto& batch : make_batches()) {
      with_phase_context(3, repeat, epoch, [&] {
        const Matrix x = gather(batch);
        const ForwardCache cache = net.forward(x);
        std::vector<ProbVector> yd;
        yd.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) yd.push_back(bank.distribution(batch[i]));
        const double classification =
            classification_loss(cache.probs, yd, config_.loss_variant);
        check_finite(classification, 3, repeat, epoch);
        loss_sum += classification * static_cast<double>(batch.size());

        const double inv_batch = 1.0 / static_cast<double>(batch.size());
        std::vector<LogitVector> grads;
        grads.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const LogitVector g =
              grad_net_logits(cache.probs[i], yd[i], config_.loss_variant, 0.0, num_classes_);
          std::vector<double> scaled(g.size());
          for (std::size_t j = 0; j < g.size(); ++j) scaled[j] = inv_batch * g[j];
          grads.emplace_back(std::move(scaled));
        }
        net.backward_and_step(cache, grads);
      });
    }
    EpochStats stats;
    stats.classification = loss_sum / n_train;
    stats.total = inv_c * stats.classification;
    stats.compatibility = kNaN;
    stats.entropy = kNaN;
    records.push_back(make_record(3, repeat, stats, net, 0.0, lr, -1));
  }
  return records;
}

PipelineResult Trainer::run() {
  const std::vector<int>& sizes = config_.hidden_sizes;
  MlpConfig mlp_config;
  mlp_config.layer_sizes.push_back(static_cast<int>(train_features_.cols));
  mlp_config.layer_sizes.insert(mlp_config.layer_sizes.end(), sizes.begin(), sizes.end());
  mlp_config.layer_sizes.push_back(num_classes_);
  mlp_config.activation = config_.activation;
  mlp_config.seed = derive_seed(config_.seed, kModelStream);
  SgdOptions sgd{config_.learning_rate_phase12, config_.momentum, config_.weight_decay};

  PipelineResult result{.report = {}, .model = Mlp(mlp_config, sgd), .bank = std::nullopt,
                        .timings = {}, .probe_rows = {}};
  RunReport& report = result.report;
  report.config = config_;
  report.baseline_ce = options_.baseline_ce;
  report.dataset_rows = test_features_.rows + validation_features_.rows + train_features_.rows;
  report.dataset_dim = static_cast<int>(train_features_.cols);
  report.dataset_classes = num_classes_;
  report.train_size = train_features_.rows;
  report.validation_size = validation_features_.rows;
  report.test_size = test_features_.rows;
  report.has_truth = has_truth_;

  auto timed = [&](int phase, int repeat, auto&& body) {
    const double start = now_seconds();
    std::vector<EpochRecord> records = body();
    result.timings.push_back(PhaseTiming{phase, repeat, static_cast<int>(records.size()),
                                         now_seconds() - start});
    report.epochs.insert(report.epochs.end(), records.begin(), records.end());
  };

  timed(1, 0, [&] { return phase1_backbone(result.model); });

  if (options_.baseline_ce) {
    // Same epoch budget and learning-rate shape, labels never corrected.
    for (int repeat = 0; repeat <= config_.repeat_count; ++repeat) {
      const double damp = damping(repeat);
      timed(2, repeat, [&] {
        const std::vector<double> lr(static_cast<std::size_t>(config_.epochs_phase2),
                                     config_.learning_rate_phase12 * damp);
        return ce_epochs(result.model, 2, repeat, config_.epochs_phase2, lr);
      });
      timed(3, repeat, [&] {
        std::vector<double> lr(static_cast<std::size_t>(config_.epochs_phase3));
        for (int epoch = 0; epoch < config_.epochs_phase3; ++epoch) {
          double value = config_.learning_rate_phase3 * damp;
          for (int decay_epoch : config_.lr_decay_epochs) {
            if (decay_epoch <= epoch) value /= 10.0;
          }
          lr[static_cast<std::size_t>(epoch)] = value;
        }
        return ce_epochs(result.model, 3, repeat, config_.epochs_phase3, lr);
      });
    }
  } else {
    result.bank = make_bank();
    LabelBank& bank = *result.bank;
    for (int repeat = 0; repeat <= config_.repeat_count; ++repeat) {
      bank.reset();
      RepeatSummary summary;
      summary.repeat = repeat;
      summary.reset_verified = bank.hard_labels() == train_noisy_;
      summary.initial_correct_count =
          has_truth_ ? static_cast<long long>(bank.correct_label_count(train_true_)) : -1;
      report.repeats.push_back(summary);

      timed(2, repeat, [&] { return phase2_pencil(result.model, bank, repeat); });
      timed(3, repeat, [&] { return phase3_finetune(result.model, bank, repeat); });
    }
    if (has_truth_) {
      report.final_correct_count = static_cast<long long>(bank.correct_label_count(train_true_));
    }
  }

  const bool use_validation = report.validation_size > 0;
  report.best_selected_on_test = !use_validation;
  double best_metric = -1.0;
  // Ties go to the latest epoch: the metric is quantized by the split size.
  for (const EpochRecord& record : report.epochs) {
    const double metric = use_validation ? record.validation_accuracy : record.test_accuracy;
    if (std::isfinite(metric) && metric >= best_metric) {
      best_metric = metric;
      report.best_epoch = record.epoch;
      report.best_test_accuracy = record.test_accuracy;
    }
  }
  if (report.best_epoch < 0) {  // no usable metric (truth withheld, no validation split)
    report.best_test_accuracy = kNaN;
  }
  report.last_epoch = report.epochs.back().epoch;
  report.last_test_accuracy = report.epochs.back().test_accuracy;

  result.probe_rows = probe_rows_;
  return result;
}

PipelineResult run_pipeline(const RunConfig& config, const Dataset& dataset,
                            TrainerOptions options) {
  Trainer trainer(config, dataset, std::move(options));
  return trainer.run();
}

}  // namespace pencil
