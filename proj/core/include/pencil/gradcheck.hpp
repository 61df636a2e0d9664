#pragma once

#include <cstdint>
#include <string>

namespace pencil {

struct GradCheckOptions {
  int trials = 100;
  int classes = 0;  // fixed class count, or 0 to sweep c in {2..20}
  std::uint64_t seed = 1;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;       // applies where both values are below it
  double zero_sum_tol = 1e-8;  // classification label gradients must sum to zero
  int zero_sum_trials = 1000;
  bool negate_inverse_label_grad = false;  // fault injection for the self-test path
};

struct VariantErrors {
  double max_rel_label = 0.0;    // closed form vs finite differences, label logits
  double max_rel_net = 0.0;      // same for network logits
  double max_abs_small = 0.0;    // worst absolute difference among near-zero components
  double max_zero_sum = 0.0;     // worst |sum_j dL_c/dy~_j|
};

struct GradCheckResult {
  VariantErrors forward;
  VariantErrors inverse;
  bool passed = false;
  std::string failure_detail;  // first violating instance, empty when passed
};

/// Compares every closed-form gradient against the central-difference oracle
/// and checks that classification-loss label gradients sum to zero.
GradCheckResult run_gradient_checks(const GradCheckOptions& options);

}  // namespace pencil
