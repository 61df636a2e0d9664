#pragma once

#include <filesystem>
#include <vector>

#include "pencil/matrix.hpp"

namespace pencil {

/// Feature rows with hidden ground truth and observed noisy labels.
/// true_labels may be empty (truth withheld); training never reads them,
/// only the metrics path does.
struct Dataset {
  Matrix features;
  std::vector<int> true_labels;
  std::vector<int> noisy_labels;
  int num_classes = 0;

  std::size_t size() const { return features.rows; }
  int dim() const { return static_cast<int>(features.cols); }
  bool has_truth() const { return !true_labels.empty(); }
};

/// CSV (header f0..f{d-1},true_label,noisy_label; doubles round-trip exactly)
/// or the binary "PDAT" twin, chosen by a .csv extension.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace pencil
