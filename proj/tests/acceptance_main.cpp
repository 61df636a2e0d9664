// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Usage: acceptance <path-to-pencil-cli>.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pencil/gradcheck.hpp"
#include "pencil/label_bank.hpp"
#include "pencil/losses.hpp"
#include "pencil/noise.hpp"
#include "pencil/report.hpp"
#include "pencil/rng.hpp"
#include "pencil/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace pencil;

int g_failures = 0;

class Criterion {
public:
  Criterion(int number, std::string name)
      : number_(number), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void finish(bool passed, const std::string& detail) {
    const double seconds = elapsed();
    std::printf("[%s] %d %-28s %s [%.2f s]\n", passed ? "PASS" : "FAIL", number_,
                name_.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!passed) ++g_failures;
  }

private:
  int number_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::string format(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof buffer, fmt, args);
  va_end(args);
  return buffer;
}

// The default desk-scale task: 2000 examples, 4 classes, 30% symmetric noise.
// dim = 8 gives the backbone enough input dimensions to memorize noise during
// low-learning-rate epochs, which is what the robustness comparison measures.
Dataset standard_blobs(std::uint64_t seed) {
  Dataset d = make_blobs(2000, 4, 8, 6.0, seed);
  d.noisy_labels = inject_symmetric(d.true_labels, 4, 0.3, seed + 1000);
  return d;
}

// 1. Closed-form gradients vs central finite differences, both variants.
void criterion_gradients() {
  Criterion c(1, "gradient-correctness");
  GradCheckOptions options;
  options.trials = 100;
  options.zero_sum_trials = 0;
  options.seed = 2024;
  const GradCheckResult result = run_gradient_checks(options);
  const double worst_rel =
      std::max({result.forward.max_rel_label, result.forward.max_rel_net,
                result.inverse.max_rel_label, result.inverse.max_rel_net});
  const double worst_abs =
      std::max(result.forward.max_abs_small, result.inverse.max_abs_small);
  const bool in_time = c.elapsed() < 10.0;
  c.finish(result.passed && in_time,
           format("max rel err %.3e (tol 1e-4), near-zero abs %.3e (tol 1e-6), "
                  "100 instances/variant, c in 2..20%s",
                  worst_rel, worst_abs, in_time ? "" : ", OVERTIME"));
}

// 2. The classification loss's label-gradient components sum to zero.
void criterion_zero_sum() {
  Criterion c(2, "label-gradient-zero-sum");
  GradCheckOptions options;
  options.trials = 0;
  options.zero_sum_trials = 1000;
  options.seed = 2025;
  const GradCheckResult result = run_gradient_checks(options);
  const double worst =
      std::max(result.forward.max_zero_sum, result.inverse.max_zero_sum);
  const bool in_time = c.elapsed() < 5.0;
  c.finish(result.passed && in_time,
           format("max |sum| %.3e (tol 1e-8), 1000 pairs/variant%s", worst,
                  in_time ? "" : ", OVERTIME"));
}

// 3. The inverse-KL label gradient is y^d - f exactly.
void criterion_eq28_exactness() {
  Criterion c(3, "inverse-gradient-exactness");
  Rng rng(2026);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t classes = 2 + trial % 19;
    std::vector<double> zy(classes), zf(classes);
    for (double& v : zy) v = 6.0 * rng.uniform_double() - 3.0;
    for (double& v : zf) v = 6.0 * rng.uniform_double() - 3.0;
    const ProbVector yd = softmax(LogitVector(zy));
    const ProbVector f = softmax(LogitVector(zf));
    const LogitVector g = grad_classification_label_logits(f, yd, LossVariant::kKlInverse);
    for (std::size_t j = 0; j < classes; ++j) {
      worst = std::max(worst, std::abs(g[j] - (yd[j] - f[j])));
    }
  }
  c.finish(worst <= 1e-12, format("max |grad - (y^d - f)| = %.3e (tol 1e-12)", worst));
}

// 4. Initialization concentrates each distribution on its noisy label.
void criterion_initialization() {
  Criterion c(4, "initialization");
  const double k = 10.0;
  bool ok = true;
  double worst_margin = 1.0;
  for (const int classes : {2, 10, 100}) {
    Rng rng(777 + static_cast<std::uint64_t>(classes));
    std::vector<int> noisy(500);
    for (int& v : noisy) v = static_cast<int>(rng.uniform_int(classes));
    const LabelBank bank = LabelBank::init_from_noisy(noisy, classes, k);
    const double bound =
        std::exp(k) / (std::exp(k) + static_cast<double>(classes - 1)) - 1e-9;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const ProbVector yd = bank.distribution(i);
      const std::size_t top = argmax_tiebreak(yd.span());
      ok &= static_cast<int>(top) == noisy[i];
      ok &= yd[top] >= bound;
      worst_margin = std::min(worst_margin, yd[top] - bound);
    }
  }
  c.finish(ok, format("argmax == noisy label and max >= e^K/(e^K+c-1) - 1e-9 "
                      "for c in {2,10,100}; min margin %.3e",
                      worst_margin));
}

// 5. Noise injector statistics.
void criterion_noise_statistics() {
  Criterion c(5, "noise-statistics");
  const std::size_t n = 10000;
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [rate, classes] : std::vector<std::pair<double, int>>{
           {0.3, 10}, {0.5, 10}, {0.9, 10}, {0.3, 4}}) {
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<int>(i % classes);
    const std::vector<int> noisy = inject_symmetric(truth, classes, rate, 4242);
    std::size_t corrupted = 0;
    for (std::size_t i = 0; i < n; ++i) corrupted += noisy[i] != truth[i];
    const double fraction = static_cast<double>(corrupted) / static_cast<double>(n);
    const double expected = rate * (1.0 - 1.0 / classes);
    ok &= std::abs(fraction - expected) <= 0.02;
    detail << format("r=%.1f,c=%d: %.4f vs %.4f; ", rate, classes, fraction, expected);
  }

  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<int>(i % 7);
  const std::vector<int> circular = inject_asym_circular(truth, 7, 0.3, 4243);
  bool successor_only = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (circular[i] != truth[i]) successor_only &= circular[i] == (truth[i] + 1) % 7;
  }
  ok &= successor_only;
  detail << (successor_only ? "circular flips successor-only" : "CIRCULAR FLIP VIOLATION");
  c.finish(ok, detail.str());
}

// 6. Mechanism reproduction: inverse KL corrects labels, forward KL stalls.
void criterion_mechanism() {
  Criterion c(6, "label-correction-mechanism");
  const Dataset d = standard_blobs(11);
  RunConfig config;  // the default desk-scale recipe
  config.seed = 11;

  config.loss_variant = LossVariant::kKlInverse;
  const PipelineResult inverse = run_pipeline(config, d);
  config.loss_variant = LossVariant::kKlForward;
  const PipelineResult forward = run_pipeline(config, d);

  const long long n = static_cast<long long>(d.size());
  const long long inverse_gain = inverse.report.final_correct_count -
                                 inverse.report.repeats.front().initial_correct_count;
  const long long forward_change = std::llabs(
      forward.report.final_correct_count -
      forward.report.repeats.front().initial_correct_count);
  const bool in_time = c.elapsed() < 120.0;
  const bool ok = inverse_gain >= n / 10 && forward_change < n / 100 && in_time;
  c.finish(ok, format("inverse gain %lld (need >= %lld), forward |change| %lld (need < %lld)%s",
                      inverse_gain, n / 10, forward_change, n / 100,
                      in_time ? "" : ", OVERTIME"));
}

// 7. Robustness: flat best-vs-last for PENCIL, never worse than the baseline.
void criterion_robustness() {
  Criterion c(7, "robustness-pattern");
  bool ok = true;
  std::ostringstream detail;
  for (const std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    const Dataset d = standard_blobs(seed);
    RunConfig config;
    config.seed = seed;

    const PipelineResult pencil_run = run_pipeline(config, d);
    TrainerOptions baseline;
    baseline.baseline_ce = true;
    const PipelineResult ce_run = run_pipeline(config, d, baseline);

    const double gap = std::abs(pencil_run.report.best_test_accuracy -
                                pencil_run.report.last_test_accuracy);
    const bool flat = gap <= 0.02;
    const bool not_worse =
        pencil_run.report.last_test_accuracy >= ce_run.report.last_test_accuracy;
    ok &= flat && not_worse;
    detail << format("s%llu: gap %.4f, pencil %.4f vs ce %.4f; ",
                     static_cast<unsigned long long>(seed), gap,
                     pencil_run.report.last_test_accuracy,
                     ce_run.report.last_test_accuracy);
  }
  const bool in_time = c.elapsed() < 300.0;
  ok &= in_time;
  if (!in_time) detail << "OVERTIME";
  c.finish(ok, detail.str());
}

// 8. Repetitive training: reset observed each repeat, no degradation.
void criterion_repetitive() {
  Criterion c(8, "repetitive-training");
  bool resets_ok = true;
  double mean_repeat = 0.0, mean_single = 0.0;
  for (const std::uint64_t seed : {31ULL, 32ULL, 33ULL}) {
    const Dataset d = standard_blobs(seed);
    RunConfig config;
    config.seed = seed;

    config.repeat_count = 2;
    const PipelineResult repeated = run_pipeline(config, d);
    resets_ok &= repeated.report.repeats.size() == 3;
    for (const RepeatSummary& r : repeated.report.repeats) resets_ok &= r.reset_verified;
    mean_repeat += repeated.report.last_test_accuracy / 3.0;

    config.repeat_count = 0;
    const PipelineResult single = run_pipeline(config, d);
    mean_single += single.report.last_test_accuracy / 3.0;
  }
  const bool ok = resets_ok && mean_repeat >= mean_single - 0.01;
  c.finish(ok, format("resets %s, mean last acc repeat2 %.4f vs repeat0 %.4f "
                      "(trend is a soft report)",
                      resets_ok ? "verified" : "MISSING", mean_repeat, mean_single));
}

// 9. Byte-identical report.json from two identical CLI invocations.
void criterion_determinism(const std::string& cli) {
  Criterion c(9, "cli-determinism");
  const fs::path dir =
      fs::temp_directory_path() / ("pencil_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto sh = [&](const std::string& command) {
    return std::system((command + " > /dev/null 2>&1").c_str());
  };
  const std::string data = (dir / "noisy.csv").string();
  bool ok = sh(cli + " synth --n 600 --classes 4 --dim 2 --seed 9 --out " +
               (dir / "clean.csv").string()) == 0;
  ok &= sh(cli + " inject --in " + (dir / "clean.csv").string() +
           " --kind symmetric --rate 0.3 --seed 10 --out " + data) == 0;

  std::ofstream conf(dir / "run.conf");
  conf << "epochs_phase1 = 6\nepochs_phase2 = 12\nepochs_phase3 = 6\n"
       << "lr_decay_epochs = 3\nhidden_sizes = 16,16\nseed = 5\n";
  conf.close();

  const std::string base = cli + " train --data " + data + " --config " +
                           (dir / "run.conf").string() + " --out-dir ";
  ok &= sh(base + (dir / "run_a").string()) == 0;
  ok &= sh(base + (dir / "run_b").string()) == 0;

  std::string bytes_a, bytes_b;
  for (const auto& [name, sink] :
       std::vector<std::pair<std::string, std::string*>>{{"run_a", &bytes_a},
                                                         {"run_b", &bytes_b}}) {
    std::ifstream in(dir / name / "report.json", std::ios::binary);
    ok &= static_cast<bool>(in);
    sink->assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  ok &= !bytes_a.empty() && bytes_a == bytes_b;
  fs::remove_all(dir);
  c.finish(ok, format("report.json identical across reruns (%zu bytes)", bytes_a.size()));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-pencil-cli>\n");
    return 2;
  }
  const std::string cli = argv[1];

  criterion_gradients();
  criterion_zero_sum();
  criterion_eq28_exactness();
  criterion_initialization();
  criterion_noise_statistics();
  criterion_mechanism();
  criterion_robustness();
  criterion_repetitive();
  criterion_determinism(cli);

  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
