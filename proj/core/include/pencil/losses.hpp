#pragma once

#include <span>
#include <vector>

#include "pencil/numerics.hpp"

namespace pencil {

/// Direction of the classification KL term, plus the standalone multi-label variant.
enum class LossVariant {
  kKlForward,      // KL(y^d || f)
  kKlInverse,      // KL(f || y^d)
  kBinaryInverse,  // per-class binary inverse KL; standalone loss, no batch/gradient path
};

struct Hyperparams {
  double alpha = 0.1;  // compatibility weight
  double beta = 0.4;   // entropy weight (applied as beta / c)
};

/// One batch evaluation of the combined objective and its gradients.
/// total = (1/c) classification + alpha * compatibility + (beta/c) entropy_term.
/// Per-example gradients carry the 1/B batch-mean factor.
struct LossBundle {
  double total = 0.0;
  double classification = 0.0;
  double compatibility = 0.0;
  double entropy_term = 0.0;
  std::vector<LogitVector> grad_label_logits;  // dL/d(label logits)
  std::vector<LogitVector> grad_net_logits;    // dL/d(network logits)
};

/// KL(p || q) = sum_j p_j log(p_j / q_j), logs clamped at kProbEps.
double kl_divergence(const ProbVector& p, const ProbVector& q);

/// Batch-mean -log f at the labeled class.
double cross_entropy_loss(std::span<const ProbVector> f_batch, std::span<const int> labels);

/// Batch-mean KL between prediction and label distribution, per the variant.
double classification_loss(std::span<const ProbVector> f_batch,
                           std::span<const ProbVector> yd_batch, LossVariant variant);

/// Batch-mean cross entropy tying each label distribution to its noisy label.
double compatibility_loss(std::span<const ProbVector> yd_batch, std::span<const int> labels);

/// Batch-mean entropy of the predictions.
double entropy_loss(std::span<const ProbVector> f_batch);

/// d(classification loss)/d(label logits) for a single example, unscaled:
///   forward KL:  y^d_j (log(y^d_j / f_j) - L_c)
///   inverse KL:  y^d_j - f_j
LogitVector grad_classification_label_logits(const ProbVector& f, const ProbVector& yd,
                                             LossVariant variant);

/// Per-example gradient of (1/c) L_c + alpha L_o with respect to the label
/// logits. The entropy loss does not depend on them. 1/B is the caller's.
LogitVector grad_label_logits(const ProbVector& f, const ProbVector& yd, int noisy_label,
                              LossVariant variant, double alpha, int num_classes);

/// Per-example gradient of (1/c) L_c + (beta/c) L_e with respect to the
/// network logits z (f = softmax(z)). 1/B is the caller's.
LogitVector grad_net_logits(const ProbVector& f, const ProbVector& yd, LossVariant variant,
                            double beta, int num_classes);

/// Per-example gradient of the plain cross-entropy loss with respect to the
/// network logits: f - onehot(label).
LogitVector grad_cross_entropy_net_logits(const ProbVector& f, int label);

/// Full batch evaluation; see LossBundle.
LossBundle evaluate_bundle(std::span<const ProbVector> f_batch,
                           std::span<const ProbVector> yd_batch, std::span<const int> labels,
                           LossVariant variant, const Hyperparams& hp, int num_classes);

/// Multi-label variant: sum_j [ f_j log(f_j/yd_j) + (1-f_j) log((1-f_j)/(1-yd_j)) ].
/// Components are clamped to [kProbEps, 1 - kProbEps].
double binary_inverse_kl(std::span<const double> f, std::span<const double> yd);

}  // namespace pencil
