#include "pencil/label_bank.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pencil/serialize.hpp"

namespace pencil {

namespace {
constexpr char kMagic[4] = {'P', 'N', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

LabelBank LabelBank::init_from_noisy(std::vector<int> noisy_labels, int num_classes,
                                     double init_constant) {
  if (num_classes < 2) throw InvalidInputError("label bank needs at least 2 classes");
  if (!(init_constant > 0.0)) throw InvalidInputError("init constant K must be > 0");
  for (int label : noisy_labels) {
    if (label < 0 || label >= num_classes) {
      throw InvalidInputError("noisy label " + std::to_string(label) + " out of range [0, " +
                              std::to_string(num_classes) + ")");
    }
  }
  LabelBank bank;
  bank.num_classes_ = num_classes;
  bank.init_constant_ = init_constant;
  bank.noisy_labels_ = std::move(noisy_labels);
  bank.logits_.assign(bank.noisy_labels_.size() * static_cast<std::size_t>(num_classes), 0.0);
  bank.reset();
  return bank;
}

void LabelBank::reset() {
  const auto c = static_cast<std::size_t>(num_classes_);
  std::fill(logits_.begin(), logits_.end(), 0.0);
  for (std::size_t i = 0; i < noisy_labels_.size(); ++i) {
    logits_[i * c + static_cast<std::size_t>(noisy_labels_[i])] = init_constant_;
  }
}

std::span<const double> LabelBank::logits_row(std::size_t i) const {
  if (i >= size()) throw InvalidInputError("label bank index out of range");
  return {logits_.data() + i * static_cast<std::size_t>(num_classes_),
          static_cast<std::size_t>(num_classes_)};
}

ProbVector LabelBank::distribution(std::size_t i) const { return softmax(logits_row(i)); }

void LabelBank::apply_label_update(std::span<const std::size_t> batch,
                                   std::span<const LogitVector> grads, double lambda) {
  if (batch.size() != grads.size()) {
    throw InvalidInputError("apply_label_update: batch and gradient counts differ");
  }
  if (!(lambda >= 0.0)) throw InvalidInputError("apply_label_update: lambda must be >= 0");
  const auto c = static_cast<std::size_t>(num_classes_);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t i = batch[b];
    if (i >= size()) throw InvalidInputError("apply_label_update: example index out of range");
    if (grads[b].size() != c) {
      throw InvalidInputError("apply_label_update: gradient has wrong class count");
    }
    double* row = logits_.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) row[j] -= lambda * grads[b][j];
  }
}

int LabelBank::hard_label(std::size_t i) const {
  return static_cast<int>(argmax_tiebreak(distribution(i).span()));
}

std::vector<int> LabelBank::hard_labels() const {
  std::vector<int> labels(size());
  for (std::size_t i = 0; i < size(); ++i) labels[i] = hard_label(i);
  return labels;
}

std::size_t LabelBank::correct_label_count(std::span<const int> true_labels) const {
  if (true_labels.size() != size()) {
    throw InvalidInputError("correct_label_count: label count mismatch");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (hard_label(i) == true_labels[i]) ++count;
  }
  return count;
}

void LabelBank::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  detail::write_magic(out, kMagic);
  detail::write_u32(out, kVersion);
  detail::write_u64(out, size());
  detail::write_u32(out, static_cast<std::uint32_t>(num_classes_));
  detail::write_f64(out, init_constant_);
  for (double v : logits_) detail::write_f64(out, v);
  for (int label : noisy_labels_) detail::write_i32(out, label);
  if (!out) throw IoError("write failed: " + path.string());
}

LabelBank LabelBank::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  detail::expect_magic(in, kMagic, "label bank");
  const auto version = detail::read_u32(in);
  if (version != kVersion) throw IoError("unsupported label bank version");
  const auto n = detail::read_u64(in);
  const auto c = detail::read_u32(in);
  const double k = detail::read_f64(in);
  LabelBank bank;
  bank.num_classes_ = static_cast<int>(c);
  bank.init_constant_ = k;
  bank.logits_.resize(n * c);
  for (double& v : bank.logits_) v = detail::read_f64(in);
  bank.noisy_labels_.resize(n);
  for (int& label : bank.noisy_labels_) label = detail::read_i32(in);
  return bank;
}

}  // namespace pencil
