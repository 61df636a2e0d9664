#include "pencil/backbone.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pencil/rng.hpp"
#include "pencil/serialize.hpp"

namespace pencil {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

double activate(double x, Activation act) {
  return act == Activation::kRelu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative in terms of the pre-activation.
double activate_grad(double pre, Activation act) {
  if (act == Activation::kRelu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

}  // namespace

Mlp::Mlp(const MlpConfig& config, const SgdOptions& sgd) : config_(config), sgd_(sgd) {
  if (config_.layer_sizes.size() < 2) {
    throw InvalidInputError("backbone needs at least input and output layers");
  }
  for (int size : config_.layer_sizes) {
    if (size < 1) throw InvalidInputError("layer sizes must be positive");
  }
  Rng rng(config_.seed);
  const std::size_t layers = config_.layer_sizes.size() - 1;
  weights_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<std::size_t>(config_.layer_sizes[l]);
    const auto fan_out = static_cast<std::size_t>(config_.layer_sizes[l + 1]);
    Matrix w(fan_in, fan_out);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = (2.0 * rng.uniform_double() - 1.0) * bound;
    weights_.push_back(std::move(w));
    biases_.emplace_back(fan_out, 0.0);
    weight_momentum_.emplace_back(fan_in, fan_out);
    bias_momentum_.emplace_back(fan_out, 0.0);
  }
}

ForwardCache Mlp::forward(const Matrix& x) const {
  if (x.cols != static_cast<std::size_t>(input_dim())) {
    throw InvalidInputError("feature dimension " + std::to_string(x.cols) +
                            " does not match network input " + std::to_string(input_dim()));
  }
  ForwardCache cache;
  cache.input = x;
  const Matrix* current = &cache.input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Matrix& w = weights_[l];
    Matrix pre(x.rows, w.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double* in_row = current->row(i);
      double* out_row = pre.row(i);
      for (std::size_t j = 0; j < w.cols; ++j) out_row[j] = biases_[l][j];
      for (std::size_t k = 0; k < w.rows; ++k) {
        const double v = in_row[k];
        if (v == 0.0) continue;
        const double* w_row = w.row(k);
        for (std::size_t j = 0; j < w.cols; ++j) out_row[j] += v * w_row[j];
      }
    }
    cache.pre.push_back(std::move(pre));
    if (l + 1 < weights_.size()) {
      Matrix post(x.rows, w.cols);
      for (std::size_t i = 0; i < post.data.size(); ++i) {
        post.data[i] = activate(cache.pre.back().data[i], config_.activation);
      }
      cache.post.push_back(std::move(post));
      current = &cache.post.back();
    }
  }
  for (double v : cache.pre.back().data) {
    if (!std::isfinite(v)) {
      throw DivergenceError("network produced non-finite logits");
    }
  }
  cache.probs.reserve(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    cache.probs.push_back(softmax(cache.pre.back().row_span(i)));
  }
  return cache;
}

void Mlp::backward_and_step(const ForwardCache& cache,
                            std::span<const LogitVector> grad_logits) {
  const std::size_t batch = cache.input.rows;
  if (grad_logits.size() != batch) {
    throw InvalidInputError("gradient count does not match forward batch");
  }
  if (cache.pre.size() != weights_.size() ||
      cache.input.cols != static_cast<std::size_t>(input_dim())) {
    throw InvalidInputError("forward cache does not belong to this network");
  }
  const std::size_t layers = weights_.size();

  Matrix delta(batch, weights_.back().cols);
  for (std::size_t i = 0; i < batch; ++i) {
    if (grad_logits[i].size() != delta.cols) {
      throw InvalidInputError("logit gradient has wrong class count");
    }
    for (std::size_t j = 0; j < delta.cols; ++j) delta.at(i, j) = grad_logits[i][j];
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& input_act = l == 0 ? cache.input : cache.post[l - 1];
    Matrix& w = weights_[l];

    Matrix grad_w(w.rows, w.cols);
    std::vector<double> grad_b(w.cols, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* a = input_act.row(i);
      const double* d = delta.row(i);
      for (std::size_t k = 0; k < w.rows; ++k) {
        if (a[k] == 0.0) continue;
        double* g_row = grad_w.row(k);
        for (std::size_t j = 0; j < w.cols; ++j) g_row[j] += a[k] * d[j];
      }
      for (std::size_t j = 0; j < w.cols; ++j) grad_b[j] += d[j];
    }

    Matrix prev_delta;
    if (l > 0) {
      prev_delta = Matrix(batch, w.rows);
      for (std::size_t i = 0; i < batch; ++i) {
        const double* d = delta.row(i);
        const double* pre = cache.pre[l - 1].row(i);
        double* pd = prev_delta.row(i);
        for (std::size_t k = 0; k < w.rows; ++k) {
          double sum = 0.0;
          const double* w_row = w.row(k);
          for (std::size_t j = 0; j < w.cols; ++j) sum += w_row[j] * d[j];
          pd[k] = sum * activate_grad(pre[k], config_.activation);
        }
      }
    }

    // SGD step: decay folded into the gradient, then momentum, then update.
    const double lr = sgd_.learning_rate;
    const double mom = sgd_.momentum;
    const double decay = sgd_.weight_decay;
    for (std::size_t idx = 0; idx < w.data.size(); ++idx) {
      const double g = grad_w.data[idx] + decay * w.data[idx];
      weight_momentum_[l].data[idx] = mom * weight_momentum_[l].data[idx] + g;
      w.data[idx] -= lr * weight_momentum_[l].data[idx];
      if (!std::isfinite(w.data[idx])) {
        throw DivergenceError("network weight became non-finite during update");
      }
    }
    for (std::size_t j = 0; j < w.cols; ++j) {
      const double g = grad_b[j] + decay * biases_[l][j];
      bias_momentum_[l][j] = mom * bias_momentum_[l][j] + g;
      biases_[l][j] -= lr * bias_momentum_[l][j];
      if (!std::isfinite(biases_[l][j])) {
        throw DivergenceError("network bias became non-finite during update");
      }
    }

    if (l > 0) delta = std::move(prev_delta);
  }
}

double Mlp::evaluate_accuracy(const Matrix& x, std::span<const int> labels) const {
  if (x.rows == 0) throw InvalidInputError("evaluate_accuracy on empty batch");
  if (x.rows != labels.size()) throw InvalidInputError("feature/label count mismatch");
  const ForwardCache cache = forward(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (static_cast<int>(argmax_tiebreak(cache.probs[i].span())) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

void Mlp::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  detail::write_magic(out, kMagic);
  detail::write_u32(out, kVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(config_.layer_sizes.size()));
  for (int size : config_.layer_sizes) detail::write_u32(out, static_cast<std::uint32_t>(size));
  detail::write_u32(out, config_.activation == Activation::kRelu ? 0u : 1u);
  detail::write_f64(out, sgd_.learning_rate);
  detail::write_f64(out, sgd_.momentum);
  detail::write_f64(out, sgd_.weight_decay);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (double v : weights_[l].data) detail::write_f64(out, v);
    for (double v : biases_[l]) detail::write_f64(out, v);
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (double v : weight_momentum_[l].data) detail::write_f64(out, v);
    for (double v : bias_momentum_[l]) detail::write_f64(out, v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Mlp Mlp::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  detail::expect_magic(in, kMagic, "model");
  if (detail::read_u32(in) != kVersion) throw IoError("unsupported model version");
  MlpConfig config;
  const auto num_sizes = detail::read_u32(in);
  config.layer_sizes.resize(num_sizes);
  for (auto& size : config.layer_sizes) size = static_cast<int>(detail::read_u32(in));
  config.activation = detail::read_u32(in) == 0 ? Activation::kRelu : Activation::kTanh;
  SgdOptions sgd;
  sgd.learning_rate = detail::read_f64(in);
  sgd.momentum = detail::read_f64(in);
  sgd.weight_decay = detail::read_f64(in);
  Mlp net(config, sgd);
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    for (double& v : net.weights_[l].data) v = detail::read_f64(in);
    for (double& v : net.biases_[l]) v = detail::read_f64(in);
  }
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    for (double& v : net.weight_momentum_[l].data) v = detail::read_f64(in);
    for (double& v : net.bias_momentum_[l]) v = detail::read_f64(in);
  }
  return net;
}

}  // namespace pencil
