#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "pencil/dataset.hpp"

namespace pencil {

enum class NoiseKind { kSymmetric, kAsymCircular, kAsymMap };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSymmetric;
  double rate = 0.0;
  std::map<int, int> pair_map;  // kAsymMap only
  std::uint64_t seed = 0;
};

/// With probability r, replace the label by a uniform draw over all c classes
/// (the draw may restore the correct class). Expected corruption r(1 - 1/c).
std::vector<int> inject_symmetric(const std::vector<int>& true_labels, int num_classes,
                                  double rate, std::uint64_t seed);

/// With probability r, flip each label to (class + 1) mod c.
std::vector<int> inject_asym_circular(const std::vector<int>& true_labels, int num_classes,
                                      double rate, std::uint64_t seed);

/// Labels in the map flip to their target with probability r; others are kept.
std::vector<int> inject_asym_map(const std::vector<int>& true_labels, double rate,
                                 const std::map<int, int>& pair_map, std::uint64_t seed);

/// Applies a NoiseSpec to a dataset's true labels, producing the noisy column.
std::vector<int> inject(const std::vector<int>& true_labels, int num_classes,
                        const NoiseSpec& spec);

/// Balanced isotropic Gaussian clusters (unit variance) with centers at
/// pairwise distance >= separation. Noisy labels start equal to the truth.
Dataset make_blobs(std::size_t n, int num_classes, int dim, double separation,
                   std::uint64_t seed);

}  // namespace pencil
