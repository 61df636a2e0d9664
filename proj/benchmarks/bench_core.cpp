#include <benchmark/benchmark.h>

#include "pencil/losses.hpp"
#include "pencil/noise.hpp"
#include "pencil/rng.hpp"
#include "pencil/trainer.hpp"

namespace {

using namespace pencil;

ProbVector random_distribution(Rng& rng, std::size_t c) {
  std::vector<double> z(c);
  for (double& v : z) v = 6.0 * rng.uniform_double() - 3.0;
  return softmax(LogitVector(z));
}

void BM_Softmax(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> z(static_cast<std::size_t>(state.range(0)));
  for (double& v : z) v = 10.0 * rng.uniform_double() - 5.0;
  const LogitVector logits(z);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax(logits));
  }
}
BENCHMARK(BM_Softmax)->Arg(4)->Arg(20)->Arg(100);

void BM_EvaluateBundle(benchmark::State& state) {
  Rng rng(2);
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  std::vector<ProbVector> f, yd;
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch; ++i) {
    f.push_back(random_distribution(rng, 10));
    yd.push_back(random_distribution(rng, 10));
    labels.push_back(static_cast<int>(rng.uniform_int(10)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evaluate_bundle(f, yd, labels, LossVariant::kKlInverse, Hyperparams{}, 10));
  }
}
BENCHMARK(BM_EvaluateBundle)->Arg(64)->Arg(256);

void BM_InjectSymmetric(benchmark::State& state) {
  std::vector<int> labels(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(inject_symmetric(labels, 10, 0.3, 7));
  }
}
BENCHMARK(BM_InjectSymmetric)->Arg(10000)->Arg(100000);

void BM_TrainEpochs(benchmark::State& state) {
  Dataset d = make_blobs(1000, 4, 2, 6.0, 3);
  d.noisy_labels = inject_symmetric(d.true_labels, 4, 0.3, 4);
  RunConfig config;
  config.epochs_phase1 = 1;
  config.epochs_phase2 = static_cast<int>(state.range(0));
  config.epochs_phase3 = 1;
  config.hidden_sizes = {32, 32};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pipeline(config, d));
  }
}
BENCHMARK(BM_TrainEpochs)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
