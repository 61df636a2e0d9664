#include "pencil/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "pencil/losses.hpp"
#include "pencil/numerics.hpp"
#include "pencil/rng.hpp"

namespace pencil {

namespace {

LogitVector random_logits(Rng& rng, int classes) {
  std::vector<double> values(static_cast<std::size_t>(classes));
  for (double& v : values) v = 6.0 * rng.uniform_double() - 3.0;
  return LogitVector(std::move(values));
}

struct Comparison {
  double max_rel = 0.0;
  double max_abs_small = 0.0;
  bool ok = true;
  std::size_t bad_component = 0;
  double closed_value = 0.0;
  double oracle_value = 0.0;
};

Comparison compare(const LogitVector& closed, const LogitVector& oracle, double rel_tol,
                   double abs_tol) {
  Comparison result;
  for (std::size_t j = 0; j < closed.size(); ++j) {
    const double magnitude = std::max(std::abs(closed[j]), std::abs(oracle[j]));
    const double diff = std::abs(closed[j] - oracle[j]);
    if (magnitude <= abs_tol) {
      result.max_abs_small = std::max(result.max_abs_small, diff);
      if (diff > abs_tol) {
        result.ok = false;
        result.bad_component = j;
        result.closed_value = closed[j];
        result.oracle_value = oracle[j];
        return result;
      }
    } else {
      const double rel = diff / magnitude;
      result.max_rel = std::max(result.max_rel, rel);
      if (rel > rel_tol && diff > abs_tol) {
        result.ok = false;
        result.bad_component = j;
        result.closed_value = closed[j];
        result.oracle_value = oracle[j];
        return result;
      }
    }
  }
  return result;
}

}  // namespace

GradCheckResult run_gradient_checks(const GradCheckOptions& options) {
  GradCheckResult result;
  Rng rng(options.seed);
  std::ostringstream failure;

  const LossVariant variants[] = {LossVariant::kKlForward, LossVariant::kKlInverse};
  for (const LossVariant variant : variants) {
    VariantErrors& errors =
        variant == LossVariant::kKlForward ? result.forward : result.inverse;

    for (int trial = 0; trial < options.trials; ++trial) {
      const int classes =
          options.classes > 0 ? options.classes : 2 + trial % 19;  // sweep 2..20
      const LogitVector label_logits = random_logits(rng, classes);
      const LogitVector net_logits = random_logits(rng, classes);
      const ProbVector yd = softmax(label_logits);
      const ProbVector f = softmax(net_logits);
      const int noisy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
      const double alpha = 0.5 * rng.uniform_double();
      const double beta = rng.uniform_double();
      const double inv_c = 1.0 / static_cast<double>(classes);

      LogitVector label_closed =
          grad_label_logits(f, yd, noisy, variant, alpha, classes);
      if (options.negate_inverse_label_grad && variant == LossVariant::kKlInverse) {
        std::vector<double> negated(label_closed.size());
        for (std::size_t j = 0; j < negated.size(); ++j) negated[j] = -label_closed[j];
        label_closed = LogitVector(std::move(negated));
      }
      const LogitVector label_oracle = finite_diff_grad(
          [&](const LogitVector& probe) {
            const ProbVector yd_probe = softmax(probe);
            const ProbVector f_batch[] = {f};
            const ProbVector yd_batch[] = {yd_probe};
            const int labels[] = {noisy};
            return inv_c * classification_loss(f_batch, yd_batch, variant) +
                   alpha * compatibility_loss(yd_batch, labels);
          },
          label_logits);
      const Comparison label_cmp =
          compare(label_closed, label_oracle, options.rel_tol, options.abs_tol);
      errors.max_rel_label = std::max(errors.max_rel_label, label_cmp.max_rel);
      errors.max_abs_small = std::max(errors.max_abs_small, label_cmp.max_abs_small);
      if (!label_cmp.ok && failure.str().empty()) {
        failure << "label gradient, variant " << (variant == LossVariant::kKlForward
                                                      ? "kl_forward"
                                                      : "kl_inverse")
                << ", trial " << trial << ", c=" << classes << ", component "
                << label_cmp.bad_component << ": closed " << label_cmp.closed_value
                << " vs finite-diff " << label_cmp.oracle_value;
      }

      const LogitVector net_closed = grad_net_logits(f, yd, variant, beta, classes);
      const LogitVector net_oracle = finite_diff_grad(
          [&](const LogitVector& probe) {
            const ProbVector f_probe = softmax(probe);
            const ProbVector f_batch[] = {f_probe};
            const ProbVector yd_batch[] = {yd};
            return inv_c * classification_loss(f_batch, yd_batch, variant) +
                   beta * inv_c * entropy_loss(f_batch);
          },
          net_logits);
      const Comparison net_cmp =
          compare(net_closed, net_oracle, options.rel_tol, options.abs_tol);
      errors.max_rel_net = std::max(errors.max_rel_net, net_cmp.max_rel);
      errors.max_abs_small = std::max(errors.max_abs_small, net_cmp.max_abs_small);
      if (!net_cmp.ok && failure.str().empty()) {
        failure << "network gradient, variant "
                << (variant == LossVariant::kKlForward ? "kl_forward" : "kl_inverse")
                << ", trial " << trial << ", c=" << classes << ", component "
                << net_cmp.bad_component << ": closed " << net_cmp.closed_value
                << " vs finite-diff " << net_cmp.oracle_value;
      }
    }

    for (int trial = 0; trial < options.zero_sum_trials; ++trial) {
      const int classes = options.classes > 0 ? options.classes : 2 + trial % 19;
      const ProbVector yd = softmax(random_logits(rng, classes));
      const ProbVector f = softmax(random_logits(rng, classes));
      const LogitVector grad = grad_classification_label_logits(f, yd, variant);
      double sum = 0.0;
      for (std::size_t j = 0; j < grad.size(); ++j) sum += grad[j];
      errors.max_zero_sum = std::max(errors.max_zero_sum, std::abs(sum));
      if (std::abs(sum) > options.zero_sum_tol && failure.str().empty()) {
        failure << "zero-sum violation, variant "
                << (variant == LossVariant::kKlForward ? "kl_forward" : "kl_inverse")
                << ", trial " << trial << ", c=" << classes << ": sum " << sum;
      }
    }
  }

  result.failure_detail = failure.str();
  result.passed = result.failure_detail.empty();
  return result;
}

}  // namespace pencil
