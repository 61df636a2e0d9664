#include "pencil/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pencil/errors.hpp"
#include "pencil/rng.hpp"

namespace pencil {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json number_or_null(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

ordered_json count_or_null(long long value) {
  if (value < 0) return nullptr;
  return value;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["epochs_phase1"] = c.epochs_phase1;
  j["epochs_phase2"] = c.epochs_phase2;
  j["epochs_phase3"] = c.epochs_phase3;
  j["learning_rate_phase12"] = c.learning_rate_phase12;
  j["learning_rate_phase3"] = c.learning_rate_phase3;
  j["lr_decay_epochs"] = c.lr_decay_epochs;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["lambda_kind"] = to_string(c.lambda_schedule.kind);
  j["lambda"] = c.lambda_schedule.value;
  ordered_json pieces = ordered_json::array();
  for (const auto& [epoch, value] : c.lambda_schedule.pieces) {
    pieces.push_back(ordered_json::array({epoch, value}));
  }
  j["lambda_pieces"] = pieces;
  j["init_constant"] = c.init_constant;
  j["batch_size"] = c.batch_size;
  j["repeat_count"] = c.repeat_count;
  j["repeat_damping"] = c.repeat_damping;
  j["seed"] = c.seed;
  j["loss_variant"] = to_string(c.loss_variant);
  j["hidden_sizes"] = c.hidden_sizes;
  j["activation"] = to_string(c.activation);
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["test_fraction"] = c.test_fraction;
  j["validation_fraction"] = c.validation_fraction;
  return j;
}

}  // namespace

std::string report_to_json_string(const RunReport& report) {
  ordered_json j;
  j["schema"] = "pencil-run-report-v1";
  j["rng_algorithm"] = kRngAlgorithm;
  j["baseline_ce"] = report.baseline_ce;
  j["config"] = config_to_json(report.config);

  ordered_json dataset;
  dataset["rows"] = report.dataset_rows;
  dataset["dim"] = report.dataset_dim;
  dataset["classes"] = report.dataset_classes;
  dataset["train"] = report.train_size;
  dataset["validation"] = report.validation_size;
  dataset["test"] = report.test_size;
  dataset["has_truth"] = report.has_truth;
  j["dataset"] = dataset;

  ordered_json repeats = ordered_json::array();
  for (const RepeatSummary& r : report.repeats) {
    ordered_json item;
    item["repeat"] = r.repeat;
    item["reset_verified"] = r.reset_verified;
    item["initial_correct_count"] = count_or_null(r.initial_correct_count);
    repeats.push_back(item);
  }
  j["repeats"] = repeats;

  ordered_json epochs = ordered_json::array();
  for (const EpochRecord& e : report.epochs) {
    ordered_json item;
    item["epoch"] = e.epoch;
    item["phase"] = e.phase;
    item["repeat"] = e.repeat;
    item["loss_total"] = number_or_null(e.loss_total);
    item["loss_classification"] = number_or_null(e.loss_classification);
    item["loss_compatibility"] = number_or_null(e.loss_compatibility);
    item["loss_entropy"] = number_or_null(e.loss_entropy);
    item["correct_label_count"] = count_or_null(e.correct_label_count);
    item["test_accuracy"] = number_or_null(e.test_accuracy);
    item["validation_accuracy"] = number_or_null(e.validation_accuracy);
    item["lambda"] = e.lambda;
    item["learning_rate"] = e.learning_rate;
    epochs.push_back(item);
  }
  j["epochs"] = epochs;

  ordered_json best;
  best["epoch"] = report.best_epoch;
  best["test_accuracy"] = number_or_null(report.best_test_accuracy);
  best["selected_on_test"] = report.best_selected_on_test;
  j["best"] = best;
  ordered_json last;
  last["epoch"] = report.last_epoch;
  last["test_accuracy"] = number_or_null(report.last_test_accuracy);
  j["last"] = last;
  j["final_correct_count"] = count_or_null(report.final_correct_count);
  return j.dump(2) + "\n";
}

void write_report_json(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << report_to_json_string(report);
  if (!out) throw IoError("write failed: " + path.string());
}

void write_correct_label_csv(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,correct_count\n";
  for (const EpochRecord& e : report.epochs) {
    if (e.phase != 2 || e.correct_label_count < 0) continue;
    out << e.epoch << ',' << e.correct_label_count << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_timings_json(const std::vector<PhaseTiming>& timings,
                        const std::filesystem::path& path) {
  ordered_json j;
  ordered_json phases = ordered_json::array();
  for (const PhaseTiming& t : timings) {
    ordered_json item;
    item["phase"] = t.phase;
    item["repeat"] = t.repeat;
    item["epochs"] = t.epochs;
    item["seconds"] = t.seconds;
    phases.push_back(item);
  }
  j["phases"] = phases;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_probe_csv(std::vector<GradProbeRow> rows, const std::filesystem::path& path) {
  std::sort(rows.begin(), rows.end(), [](const GradProbeRow& a, const GradProbeRow& b) {
    return a.epoch != b.epoch ? a.epoch < b.epoch : a.example < b.example;
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,example,grad_original,grad_true\n";
  char buf[64];
  for (const GradProbeRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g", row.epoch, row.example,
                  row.grad_original, row.grad_true);
    out << buf << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pencil
