#include "pencil/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pencil {

namespace {

void check_batch(std::size_t f_size, std::size_t other_size, const char* what) {
  if (f_size == 0) throw InvalidInputError("empty batch");
  if (f_size != other_size) {
    throw InvalidInputError(std::string("batch length mismatch: ") + what);
  }
}

void check_single_label_variant(LossVariant variant) {
  if (variant == LossVariant::kBinaryInverse) {
    throw InvalidInputError(
        "the binary inverse KL variant is a standalone loss; use binary_inverse_kl");
  }
}

}  // namespace

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) throw InvalidInputError("KL arguments have different lengths");
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    kl += p[j] * (clamped_log(p[j]) - clamped_log(q[j]));
  }
  return kl;
}

double cross_entropy_loss(std::span<const ProbVector> f_batch, std::span<const int> labels) {
  check_batch(f_batch.size(), labels.size(), "predictions vs labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < f_batch.size(); ++i) {
    loss -= clamped_log(f_batch[i][static_cast<std::size_t>(labels[i])]);
  }
  return loss / static_cast<double>(f_batch.size());
}

double classification_loss(std::span<const ProbVector> f_batch,
                           std::span<const ProbVector> yd_batch, LossVariant variant) {
  check_batch(f_batch.size(), yd_batch.size(), "predictions vs label distributions");
  check_single_label_variant(variant);
  double loss = 0.0;
  for (std::size_t i = 0; i < f_batch.size(); ++i) {
    loss += variant == LossVariant::kKlForward ? kl_divergence(yd_batch[i], f_batch[i])
                                               : kl_divergence(f_batch[i], yd_batch[i]);
  }
  return loss / static_cast<double>(f_batch.size());
}

double compatibility_loss(std::span<const ProbVector> yd_batch, std::span<const int> labels) {
  check_batch(yd_batch.size(), labels.size(), "label distributions vs labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < yd_batch.size(); ++i) {
    loss -= clamped_log(yd_batch[i][static_cast<std::size_t>(labels[i])]);
  }
  return loss / static_cast<double>(yd_batch.size());
}

double entropy_loss(std::span<const ProbVector> f_batch) {
  if (f_batch.empty()) throw InvalidInputError("empty batch");
  double loss = 0.0;
  for (const ProbVector& f : f_batch) loss += entropy(f);
  return loss / static_cast<double>(f_batch.size());
}

LogitVector grad_classification_label_logits(const ProbVector& f, const ProbVector& yd,
                                             LossVariant variant) {
  if (f.size() != yd.size()) throw InvalidInputError("prediction/label distribution mismatch");
  check_single_label_variant(variant);
  std::vector<double> grad(yd.size());
  if (variant == LossVariant::kKlInverse) {
    for (std::size_t j = 0; j < yd.size(); ++j) grad[j] = yd[j] - f[j];
  } else {
    const double loss = kl_divergence(yd, f);
    for (std::size_t j = 0; j < yd.size(); ++j) {
      grad[j] = yd[j] * (clamped_log(yd[j]) - clamped_log(f[j]) - loss);
    }
  }
  return LogitVector(std::move(grad));
}

LogitVector grad_label_logits(const ProbVector& f, const ProbVector& yd, int noisy_label,
                              LossVariant variant, double alpha, int num_classes) {
  if (static_cast<std::size_t>(num_classes) != yd.size()) {
    throw InvalidInputError("class count does not match distribution length");
  }
  if (noisy_label < 0 || noisy_label >= num_classes) {
    throw InvalidInputError("noisy label out of range");
  }
  const LogitVector cls = grad_classification_label_logits(f, yd, variant);
  const double inv_c = 1.0 / static_cast<double>(num_classes);
  std::vector<double> grad(yd.size());
  for (std::size_t j = 0; j < yd.size(); ++j) {
    const double onehot = j == static_cast<std::size_t>(noisy_label) ? 1.0 : 0.0;
    grad[j] = inv_c * cls[j] + alpha * (yd[j] - onehot);
  }
  return LogitVector(std::move(grad));
}

LogitVector grad_net_logits(const ProbVector& f, const ProbVector& yd, LossVariant variant,
                            double beta, int num_classes) {
  if (f.size() != yd.size()) throw InvalidInputError("prediction/label distribution mismatch");
  if (static_cast<std::size_t>(num_classes) != f.size()) {
    throw InvalidInputError("class count does not match distribution length");
  }
  check_single_label_variant(variant);
  const double inv_c = 1.0 / static_cast<double>(num_classes);
  std::vector<double> grad(f.size());
  if (variant == LossVariant::kKlForward) {
    // d KL(y^d || f) / dz_j = f_j - y^d_j through the softmax Jacobian.
    for (std::size_t j = 0; j < f.size(); ++j) grad[j] = inv_c * (f[j] - yd[j]);
  } else {
    // d KL(f || y^d) / dz_j = f_j (log(f_j / y^d_j) - L_c), same shape as the
    // label-side case with the operands swapped.
    const double loss = kl_divergence(f, yd);
    for (std::size_t j = 0; j < f.size(); ++j) {
      grad[j] = inv_c * f[j] * (clamped_log(f[j]) - clamped_log(yd[j]) - loss);
    }
  }
  if (beta != 0.0) {
    // d L_e / dz_j = -f_j (log f_j + H(f)).
    const double h = entropy(f);
    for (std::size_t j = 0; j < f.size(); ++j) {
      grad[j] += beta * inv_c * (-f[j] * (clamped_log(f[j]) + h));
    }
  }
  return LogitVector(std::move(grad));
}

LogitVector grad_cross_entropy_net_logits(const ProbVector& f, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= f.size()) {
    throw InvalidInputError("label out of range");
  }
  std::vector<double> grad(f.values());
  grad[static_cast<std::size_t>(label)] -= 1.0;
  return LogitVector(std::move(grad));
}

LossBundle evaluate_bundle(std::span<const ProbVector> f_batch,
                           std::span<const ProbVector> yd_batch, std::span<const int> labels,
                           LossVariant variant, const Hyperparams& hp, int num_classes) {
  check_batch(f_batch.size(), yd_batch.size(), "predictions vs label distributions");
  check_batch(f_batch.size(), labels.size(), "predictions vs labels");

  LossBundle bundle;
  bundle.classification = classification_loss(f_batch, yd_batch, variant);
  bundle.compatibility = compatibility_loss(yd_batch, labels);
  bundle.entropy_term = entropy_loss(f_batch);
  const double inv_c = 1.0 / static_cast<double>(num_classes);
  bundle.total = inv_c * bundle.classification + hp.alpha * bundle.compatibility +
                 hp.beta * inv_c * bundle.entropy_term;

  const double inv_batch = 1.0 / static_cast<double>(f_batch.size());
  bundle.grad_label_logits.reserve(f_batch.size());
  bundle.grad_net_logits.reserve(f_batch.size());
  for (std::size_t i = 0; i < f_batch.size(); ++i) {
    LogitVector label_grad =
        grad_label_logits(f_batch[i], yd_batch[i], labels[i], variant, hp.alpha, num_classes);
    LogitVector net_grad = grad_net_logits(f_batch[i], yd_batch[i], variant, hp.beta, num_classes);
    std::vector<double> scaled_label(label_grad.size());
    std::vector<double> scaled_net(net_grad.size());
    for (std::size_t j = 0; j < label_grad.size(); ++j) {
      scaled_label[j] = inv_batch * label_grad[j];
      scaled_net[j] = inv_batch * net_grad[j];
    }
    bundle.grad_label_logits.emplace_back(std::move(scaled_label));
    bundle.grad_net_logits.emplace_back(std::move(scaled_net));
  }
  return bundle;
}

double binary_inverse_kl(std::span<const double> f, std::span<const double> yd) {
  if (f.size() != yd.size()) throw InvalidInputError("binary KL arguments differ in length");
  if (f.empty()) throw InvalidInputError("binary KL of empty vectors");
  double loss = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double fj = std::clamp(f[j], kProbEps, 1.0 - kProbEps);
    const double yj = std::clamp(yd[j], kProbEps, 1.0 - kProbEps);
    loss += fj * std::log(fj / yj) + (1.0 - fj) * std::log((1.0 - fj) / (1.0 - yj));
  }
  return loss;
}

}  // namespace pencil
