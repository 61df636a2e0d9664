#include "pencil/noise.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pencil/errors.hpp"
#include "pencil/rng.hpp"

namespace pencil {

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInputError("noise rate must be in [0, 1]");
}

void check_labels(const std::vector<int>& labels, int num_classes) {
  for (int v : labels) {
    if (v < 0 || v >= num_classes) {
      throw InvalidInputError("label " + std::to_string(v) + " out of range");
    }
  }
}

}  // namespace

std::vector<int> inject_symmetric(const std::vector<int>& true_labels, int num_classes,
                                  double rate, std::uint64_t seed) {
  check_rate(rate);
  if (num_classes < 2) throw InvalidInputError("need at least 2 classes");
  check_labels(true_labels, num_classes);
  Rng rng(seed);
  std::vector<int> noisy = true_labels;
  for (int& label : noisy) {
    if (rng.uniform_double() < rate) {
      label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_classes)));
    }
  }
  return noisy;
}

std::vector<int> inject_asym_circular(const std::vector<int>& true_labels, int num_classes,
                                      double rate, std::uint64_t seed) {
  check_rate(rate);
  if (num_classes < 2) throw InvalidInputError("need at least 2 classes");
  check_labels(true_labels, num_classes);
  Rng rng(seed);
  std::vector<int> noisy = true_labels;
  for (int& label : noisy) {
    if (rng.uniform_double() < rate) label = (label + 1) % num_classes;
  }
  return noisy;
}

std::vector<int> inject_asym_map(const std::vector<int>& true_labels, double rate,
                                 const std::map<int, int>& pair_map, std::uint64_t seed) {
  check_rate(rate);
  for (const auto& [from, to] : pair_map) {
    if (from < 0 || to < 0) throw InvalidInputError("noise map entries must be non-negative");
  }
  Rng rng(seed);
  std::vector<int> noisy = true_labels;
  for (int& label : noisy) {
    const double u = rng.uniform_double();
    const auto it = pair_map.find(label);
    if (it != pair_map.end() && u < rate) label = it->second;
  }
  return noisy;
}

std::vector<int> inject(const std::vector<int>& true_labels, int num_classes,
                        const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::kSymmetric:
      return inject_symmetric(true_labels, num_classes, spec.rate, spec.seed);
    case NoiseKind::kAsymCircular:
      return inject_asym_circular(true_labels, num_classes, spec.rate, spec.seed);
    case NoiseKind::kAsymMap:
      for (const auto& [from, to] : spec.pair_map) {
        if (from >= num_classes || to >= num_classes) {
          throw InvalidInputError("noise map target out of range");
        }
      }
      return inject_asym_map(true_labels, spec.rate, spec.pair_map, spec.seed);
  }
  throw InvalidInputError("unknown noise kind");
}

Dataset make_blobs(std::size_t n, int num_classes, int dim, double separation,
                   std::uint64_t seed) {
  if (num_classes < 2) throw InvalidInputError("need at least 2 classes");
  if (dim < 1) throw InvalidInputError("feature dimension must be >= 1");
  if (n < static_cast<std::size_t>(num_classes)) {
    throw InvalidInputError("need at least one example per class");
  }
  if (!(separation > 0.0)) throw InvalidInputError("separation must be > 0");

  // Centers on a circle in the first two dimensions (adjacent chord length =
  // separation), or on a line when dim == 1.
  Matrix centers(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
  if (dim == 1) {
    for (int k = 0; k < num_classes; ++k) centers.at(k, 0) = separation * k;
  } else {
    const double radius =
        separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(num_classes)));
    for (int k = 0; k < num_classes; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / static_cast<double>(num_classes);
      centers.at(k, 0) = radius * std::cos(angle);
      centers.at(k, 1) = radius * std::sin(angle);
    }
  }

  Rng rng(seed);
  Dataset d;
  d.num_classes = num_classes;
  d.features = Matrix(n, static_cast<std::size_t>(dim));
  d.true_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    d.true_labels[i] = label;
    for (int j = 0; j < dim; ++j) {
      d.features.at(i, static_cast<std::size_t>(j)) =
          centers.at(label, static_cast<std::size_t>(j)) + rng.normal();
    }
  }
  d.noisy_labels = d.true_labels;
  return d;
}

}  // namespace pencil
