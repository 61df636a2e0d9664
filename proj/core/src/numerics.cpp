#include "pencil/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pencil {

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidInputError("logit vector has non-finite component");
  }
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInputError("probability vector is empty");
  double sum = 0.0;
  for (double& v : values_) {
    if (!std::isfinite(v)) throw InvalidInputError("probability vector has non-finite component");
    v = std::clamp(v, kProbEps, 1.0);
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInputError("probability vector sums to " + std::to_string(sum) + ", not 1");
  }
}

ProbVector softmax(std::span<const double> z) {
  if (z.size() < 2) throw InvalidInputError("softmax needs at least 2 logits");
  double max_z = z[0];
  for (double v : z) {
    if (!std::isfinite(v)) throw InvalidInputError("softmax input has non-finite component");
    max_z = std::max(max_z, v);
  }
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    p[j] = std::exp(z[j] - max_z);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return ProbVector(std::move(p));
}

ProbVector softmax(const LogitVector& z) { return softmax(z.span()); }

double clamped_log(double p) {
  if (!(p >= 0.0)) throw InvalidInputError("clamped_log requires p >= 0");
  return std::log(std::max(p, kProbEps));
}

double entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.values()) h -= v * clamped_log(v);
  return h;
}

LogitVector finite_diff_grad(const std::function<double(const LogitVector&)>& fn,
                             const LogitVector& z, double h) {
  if (!(h > 0.0)) throw InvalidInputError("finite_diff_grad requires h > 0");
  std::vector<double> grad(z.size());
  std::vector<double> probe = z.values();
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + h;
    const double up = fn(LogitVector(probe));
    probe[j] = saved - h;
    const double down = fn(LogitVector(probe));
    probe[j] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleFailureError("finite_diff_grad: objective returned a non-finite value");
    }
    grad[j] = (up - down) / (2.0 * h);
  }
  return LogitVector(std::move(grad));
}

std::size_t argmax_tiebreak(std::span<const double> v) {
  if (v.empty()) throw InvalidInputError("argmax of empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw InvalidInputError("argmax input has non-finite component");
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace pencil
