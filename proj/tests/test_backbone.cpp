#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "pencil/backbone.hpp"
#include "pencil/losses.hpp"
#include "pencil/rng.hpp"

using namespace pencil;

namespace {

Matrix random_inputs(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix x(rows, cols);
  for (double& v : x.data) v = 4.0 * rng.uniform_double() - 2.0;
  return x;
}

void zero_parameters(Mlp& net) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (double& v : net.weight(l).data) v = 0.0;
    for (double& v : net.bias(l)) v = 0.0;
  }
}

std::vector<LogitVector> scaled_ce_grads(const ForwardCache& cache,
                                         const std::vector<int>& labels) {
  const double inv_batch = 1.0 / static_cast<double>(labels.size());
  std::vector<LogitVector> grads;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LogitVector g = grad_cross_entropy_net_logits(cache.probs[i], labels[i]);
    std::vector<double> scaled(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) scaled[j] = inv_batch * g[j];
    grads.emplace_back(std::move(scaled));
  }
  return grads;
}

}  // namespace

TEST_CASE("zero parameters predict the uniform distribution") {
  Mlp net(MlpConfig{{3, 8, 4}, Activation::kRelu, 5});
  zero_parameters(net);
  Rng rng(31);
  const Matrix x = random_inputs(rng, 10, 3);
  const ForwardCache cache = net.forward(x);
  for (const ProbVector& f : cache.probs) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(f[j] == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("forward is deterministic given the seed") {
  const MlpConfig config{{4, 16, 3}, Activation::kTanh, 42};
  Mlp a(config);
  Mlp b(config);
  Rng rng(32);
  const Matrix x = random_inputs(rng, 7, 4);
  const ForwardCache ca = a.forward(x);
  const ForwardCache cb = b.forward(x);
  CHECK(ca.logits().data == cb.logits().data);
}

TEST_CASE("single linear layer matches hand arithmetic") {
  Mlp net(MlpConfig{{2, 2}, Activation::kRelu, 0});
  net.weight(0).at(0, 0) = 1.0;
  net.weight(0).at(0, 1) = -1.0;
  net.weight(0).at(1, 0) = 0.5;
  net.weight(0).at(1, 1) = 2.0;
  net.bias(0) = {0.1, -0.2};
  Matrix x(1, 2);
  x.at(0, 0) = 0.3;
  x.at(0, 1) = 0.7;
  const ForwardCache cache = net.forward(x);
  const double z0 = 0.3 * 1.0 + 0.7 * 0.5 + 0.1;
  const double z1 = 0.3 * -1.0 + 0.7 * 2.0 - 0.2;
  CHECK(cache.logits().at(0, 0) == doctest::Approx(z0).epsilon(1e-15));
  CHECK(cache.logits().at(0, 1) == doctest::Approx(z1).epsilon(1e-15));
  const double denom = std::exp(z0) + std::exp(z1);
  CHECK(cache.probs[0][0] == doctest::Approx(std::exp(z0) / denom).epsilon(1e-12));
  CHECK(cache.probs[0][1] == doctest::Approx(std::exp(z1) / denom).epsilon(1e-12));
}

TEST_CASE("forward rejects mismatched feature width") {
  Mlp net(MlpConfig{{3, 4, 2}, Activation::kRelu, 1});
  Matrix x(2, 5);
  CHECK_THROWS_AS(net.forward(x), InvalidInputError);
}

TEST_CASE("backward rejects a cache from a different network") {
  Mlp shallow(MlpConfig{{2, 2}, Activation::kRelu, 1});
  Mlp deep(MlpConfig{{2, 4, 2}, Activation::kRelu, 1});
  Matrix x(1, 2);
  x.at(0, 0) = 0.5;
  const ForwardCache cache = shallow.forward(x);
  const std::vector<LogitVector> grads = {LogitVector::zeros(2)};
  CHECK_THROWS_AS(deep.backward_and_step(cache, grads), InvalidInputError);
}

TEST_CASE("parameter gradients match finite differences through the full loss") {
  // 2-8-3 tanh network, PENCIL bundle as the scalar objective.
  const MlpConfig config{{2, 8, 3}, Activation::kTanh, 77};
  Rng rng(33);
  const Matrix x = random_inputs(rng, 5, 2);
  std::vector<ProbVector> yd;
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> z(3);
    for (double& v : z) v = 4.0 * rng.uniform_double() - 2.0;
    yd.push_back(softmax(LogitVector(z)));
    labels.push_back(static_cast<int>(rng.uniform_int(3)));
  }
  const Hyperparams hp{0.1, 0.4};

  const auto loss_of = [&](const Mlp& net) {
    const ForwardCache cache = net.forward(x);
    return evaluate_bundle(cache.probs, yd, labels, LossVariant::kKlInverse, hp, 3).total;
  };

  // Analytic step with lr=1, no momentum, no decay: gradient = old - new.
  Mlp net(config, SgdOptions{1.0, 0.0, 0.0});
  Mlp stepped = net;
  {
    const ForwardCache cache = stepped.forward(x);
    const LossBundle bundle =
        evaluate_bundle(cache.probs, yd, labels, LossVariant::kKlInverse, hp, 3);
    stepped.backward_and_step(cache, bundle.grad_net_logits);
  }

  const double h = 1e-5;
  int checked = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (std::size_t idx = 0; idx < net.weight(l).data.size(); ++idx) {
      const double analytic = net.weight(l).data[idx] - stepped.weight(l).data[idx];
      Mlp up = net;
      Mlp down = net;
      up.weight(l).data[idx] += h;
      down.weight(l).data[idx] -= h;
      const double numeric = (loss_of(up) - loss_of(down)) / (2.0 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      CHECK(std::abs(analytic - numeric) / scale <= 1e-4);
      ++checked;
    }
    for (std::size_t j = 0; j < net.bias(l).size(); ++j) {
      const double analytic = net.bias(l)[j] - stepped.bias(l)[j];
      Mlp up = net;
      Mlp down = net;
      up.bias(l)[j] += h;
      down.bias(l)[j] -= h;
      const double numeric = (loss_of(up) - loss_of(down)) / (2.0 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      CHECK(std::abs(analytic - numeric) / scale <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked == 2 * 8 + 8 + 8 * 3 + 3);
}

TEST_CASE("zero gradients apply pure weight-decay shrinkage") {
  const SgdOptions sgd{0.05, 0.9, 1e-4};
  Mlp net(MlpConfig{{2, 4, 2}, Activation::kRelu, 9}, sgd);
  const Mlp before = net;
  Matrix x(3, 2);
  for (double& v : x.data) v = 0.5;
  const ForwardCache cache = net.forward(x);
  const std::vector<LogitVector> zeros(3, LogitVector::zeros(2));
  net.backward_and_step(cache, zeros);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (std::size_t idx = 0; idx < net.weight(l).data.size(); ++idx) {
      const double old = before.weight(l).data[idx];
      CHECK(net.weight(l).data[idx] == old - sgd.learning_rate * (sgd.weight_decay * old));
    }
  }
}

TEST_CASE("zero learning rate freezes parameters but not momentum") {
  Mlp net(MlpConfig{{2, 4, 2}, Activation::kRelu, 10}, SgdOptions{0.0, 0.9, 1e-4});
  const Mlp before = net;
  Rng rng(34);
  const Matrix x = random_inputs(rng, 4, 2);
  const ForwardCache cache = net.forward(x);
  const std::vector<int> labels = {0, 1, 0, 1};
  net.backward_and_step(cache, scaled_ce_grads(cache, labels));
  bool momentum_moved = false;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    CHECK(net.weight(l).data == before.weight(l).data);
    CHECK(net.bias(l) == before.bias(l));
    CHECK(net.weight_momentum(l).rows == net.weight(l).rows);
    CHECK(net.weight_momentum(l).cols == net.weight(l).cols);
    CHECK(net.bias_momentum(l).size() == net.bias(l).size());
    for (double v : net.weight_momentum(l).data) momentum_moved |= v != 0.0;
  }
  CHECK(momentum_moved);
}

TEST_CASE("a training epoch is bitwise deterministic") {
  const MlpConfig config{{2, 8, 3}, Activation::kRelu, 55};
  const SgdOptions sgd{0.05, 0.9, 1e-4};
  Mlp a(config, sgd);
  Mlp b(config, sgd);
  Rng rng(35);
  const Matrix x = random_inputs(rng, 32, 2);
  std::vector<int> labels(32);
  for (int& v : labels) v = static_cast<int>(rng.uniform_int(3));
  for (int step = 0; step < 10; ++step) {
    const ForwardCache ca = a.forward(x);
    a.backward_and_step(ca, scaled_ce_grads(ca, labels));
    const ForwardCache cb = b.forward(x);
    b.backward_and_step(cb, scaled_ce_grads(cb, labels));
  }
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    CHECK(a.weight(l).data == b.weight(l).data);
    CHECK(a.bias(l) == b.bias(l));
    CHECK(a.weight_momentum(l).data == b.weight_momentum(l).data);
  }
}

TEST_CASE("accuracy of an untrained net on truth-independent features is chance") {
  Rng rng(36);
  const std::size_t n = 2000;
  Matrix x(n, 3);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 4);
  Mlp net(MlpConfig{{3, 16, 4}, Activation::kRelu, 123});
  const double accuracy = net.evaluate_accuracy(x, labels);
  CHECK(accuracy >= 0.25 - 0.05);
  CHECK(accuracy <= 0.25 + 0.05);
}

TEST_CASE("accuracy of an empty batch is rejected") {
  Mlp net(MlpConfig{{2, 4, 2}, Activation::kRelu, 1});
  Matrix empty(0, 2);
  CHECK_THROWS_AS(net.evaluate_accuracy(empty, std::vector<int>{}), InvalidInputError);
}

TEST_CASE("exploding updates raise the divergence error") {
  Mlp net(MlpConfig{{2, 4, 2}, Activation::kRelu, 2}, SgdOptions{1e200, 0.9, 0.0});
  Rng rng(37);
  const Matrix x = random_inputs(rng, 4, 2);
  const std::vector<int> labels = {0, 1, 1, 0};
  CHECK_THROWS_AS(
      [&] {
        for (int step = 0; step < 10; ++step) {
          const ForwardCache cache = net.forward(x);
          net.backward_and_step(cache, scaled_ce_grads(cache, labels));
        }
      }(),
      DivergenceError);
}

TEST_CASE("model loading rejects foreign files") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bank_file = dir / "pencil_test_wrong_kind.pncl";
  // A label-bank checkpoint is not a model checkpoint.
  {
    std::ofstream out(bank_file, std::ios::binary);
    out << "PNCL" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(Mlp::load(bank_file), IoError);
  CHECK_THROWS_AS(Mlp::load(dir / "pencil_no_such_model.pmlp"), IoError);
  std::filesystem::remove(bank_file);
}

TEST_CASE("model checkpoint round trip is bitwise") {
  const MlpConfig config{{3, 6, 4}, Activation::kTanh, 202};
  Mlp net(config, SgdOptions{0.03, 0.9, 1e-4});
  Rng rng(38);
  const Matrix x = random_inputs(rng, 8, 3);
  std::vector<int> labels(8);
  for (int& v : labels) v = static_cast<int>(rng.uniform_int(4));
  for (int step = 0; step < 5; ++step) {
    const ForwardCache cache = net.forward(x);
    net.backward_and_step(cache, scaled_ce_grads(cache, labels));
  }

  const auto path = std::filesystem::temp_directory_path() / "pencil_test_model.pmlp";
  net.save(path);
  const Mlp loaded = Mlp::load(path);
  CHECK(loaded.config().layer_sizes == config.layer_sizes);
  CHECK(loaded.config().activation == config.activation);
  CHECK(loaded.sgd().learning_rate == net.sgd().learning_rate);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    CHECK(loaded.weight(l).data == net.weight(l).data);
    CHECK(loaded.bias(l) == net.bias(l));
    CHECK(loaded.weight_momentum(l).data == net.weight_momentum(l).data);
    CHECK(loaded.bias_momentum(l) == net.bias_momentum(l));
  }
  const ForwardCache ca = net.forward(x);
  const ForwardCache cb = loaded.forward(x);
  CHECK(ca.logits().data == cb.logits().data);
  std::filesystem::remove(path);
}
