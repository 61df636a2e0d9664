// pencil: dataset synthesis, noise injection, three-phase training, gradient
// verification and probing, and run reporting.
//
// Exit codes: 0 success, 2 usage or input error, 3 training divergence,
// 4 gradient verification failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pencil/config.hpp"
#include "pencil/dataset.hpp"
#include "pencil/errors.hpp"
#include "pencil/gradcheck.hpp"
#include "pencil/noise.hpp"
#include "pencil/report.hpp"
#include "pencil/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using pencil::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitVerification = 4;

struct SynthArgs {
  std::size_t n = 2000;
  int classes = 4;
  int dim = 8;
  double separation = 6.0;
  std::uint64_t seed = 1;
  std::string out;
};

struct InjectArgs {
  std::string in;
  std::string kind = "symmetric";
  double rate = 0.0;
  std::string map;
  std::uint64_t seed = 1;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out_dir;
  bool baseline_ce = false;
  std::optional<std::uint64_t> seed;
};

struct GradcheckArgs {
  int trials = 100;
  int classes = 0;
  std::uint64_t seed = 1;
  bool negate_inverse = false;
};

struct GradprobeArgs {
  std::string data;
  std::string config;
  std::vector<std::size_t> indices;
  std::string out;
  std::optional<std::uint64_t> seed;
};

// Seed precedence: --seed flag, then PENCIL_SEED, then the config file.
void apply_seed_override(RunConfig& config, const std::optional<std::uint64_t>& flag_seed) {
  if (flag_seed) {
    config.seed = *flag_seed;
    return;
  }
  if (const char* env = std::getenv("PENCIL_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long value = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      config.seed = value;
    } catch (const std::exception&) {
      throw pencil::InvalidInputError(std::string("PENCIL_SEED is not an integer: ") + env);
    }
  }
}

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return pencil::load_run_config(path);
}

std::map<int, int> parse_pair_map(const std::string& text) {
  std::map<int, int> map;
  std::stringstream stream(text);
  std::string piece;
  while (std::getline(stream, piece, ',')) {
    const auto colon = piece.find(':');
    if (colon == std::string::npos) {
      throw pencil::InvalidInputError("--map expects from:to pairs, got '" + piece + "'");
    }
    map[std::stoi(piece.substr(0, colon))] = std::stoi(piece.substr(colon + 1));
  }
  return map;
}

int run_synth(const SynthArgs& args) {
  const pencil::Dataset dataset =
      pencil::make_blobs(args.n, args.classes, args.dim, args.separation, args.seed);
  pencil::save_dataset(dataset, args.out);
  std::printf("synth: wrote %zu examples (%d classes, dim %d, separation %g, seed %llu) to %s\n",
              dataset.size(), dataset.num_classes, dataset.dim(), args.separation,
              static_cast<unsigned long long>(args.seed), args.out.c_str());
  return kExitOk;
}

int run_inject(const InjectArgs& args) {
  pencil::Dataset dataset = pencil::load_dataset(args.in);
  pencil::NoiseSpec spec;
  spec.rate = args.rate;
  spec.seed = args.seed;
  if (args.kind == "symmetric") {
    spec.kind = pencil::NoiseKind::kSymmetric;
  } else if (args.kind == "asym-circular") {
    spec.kind = pencil::NoiseKind::kAsymCircular;
  } else if (args.kind == "asym-map") {
    spec.kind = pencil::NoiseKind::kAsymMap;
    if (args.map.empty()) {
      throw pencil::InvalidInputError("--kind asym-map requires --map");
    }
    spec.pair_map = parse_pair_map(args.map);
  } else {
    throw pencil::InvalidInputError("unknown noise kind '" + args.kind + "'");
  }
  dataset.noisy_labels = pencil::inject(dataset.true_labels, dataset.num_classes, spec);
  pencil::save_dataset(dataset, args.out);

  std::size_t corrupted = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.noisy_labels[i] != dataset.true_labels[i]) ++corrupted;
  }
  std::printf("inject: %s rate %g -> corrupted fraction %.4f (%zu of %zu) to %s\n",
              args.kind.c_str(), args.rate,
              static_cast<double>(corrupted) / static_cast<double>(dataset.size()), corrupted,
              dataset.size(), args.out.c_str());
  return kExitOk;
}

int run_train(const TrainArgs& args) {
  const pencil::Dataset dataset = pencil::load_dataset(args.data);
  RunConfig config = load_config_or_default(args.config);
  apply_seed_override(config, args.seed);
  config.validate();

  pencil::TrainerOptions options;
  options.baseline_ce = args.baseline_ce;
  pencil::PipelineResult result = pencil::run_pipeline(config, dataset, options);

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  pencil::write_report_json(result.report, out_dir / "report.json");
  pencil::write_timings_json(result.timings, out_dir / "timings.json");
  result.model.save(out_dir / "model.pmlp");
  if (result.bank) {
    result.bank->save(out_dir / "labels.pncl");
    pencil::write_correct_label_csv(result.report, out_dir / "correct_labels.csv");
  }

  const pencil::RunReport& report = result.report;
  std::printf("train: %s, %zu epochs, best test accuracy %.4f (epoch %d), last %.4f -> %s\n",
              report.baseline_ce ? "ce-baseline" : "pencil", report.epochs.size(),
              report.best_test_accuracy, report.best_epoch, report.last_test_accuracy,
              args.out_dir.c_str());
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs& args) {
  pencil::GradCheckOptions options;
  options.trials = args.trials;
  options.classes = args.classes;
  options.seed = args.seed;
  options.negate_inverse_label_grad = args.negate_inverse;
  if (options.trials < 1) throw pencil::InvalidInputError("--trials must be >= 1");

  const pencil::GradCheckResult result = pencil::run_gradient_checks(options);
  const auto print_variant = [](const char* name, const pencil::VariantErrors& e) {
    std::printf("%-10s max rel err label %.3e  net %.3e  near-zero abs %.3e  zero-sum %.3e\n",
                name, e.max_rel_label, e.max_rel_net, e.max_abs_small, e.max_zero_sum);
  };
  print_variant("kl_forward", result.forward);
  print_variant("kl_inverse", result.inverse);
  if (!result.passed) {
    std::fprintf(stderr, "gradcheck FAILED: %s\n", result.failure_detail.c_str());
    return kExitVerification;
  }
  std::printf("gradcheck passed (%d trials, %d zero-sum trials)\n", options.trials,
              options.zero_sum_trials);
  return kExitOk;
}

int run_gradprobe(const GradprobeArgs& args) {
  const pencil::Dataset dataset = pencil::load_dataset(args.data);
  RunConfig config = load_config_or_default(args.config);
  apply_seed_override(config, args.seed);
  // The probe observes label-logit gradients across one PENCIL learning phase;
  // every dataset row is a training example here so --indices address the file
  // directly.
  config.test_fraction = 0.0;
  config.validation_fraction = 0.0;
  config.repeat_count = 0;
  config.validate();

  pencil::TrainerOptions options;
  options.probe_indices = args.indices;
  pencil::PipelineResult result = pencil::run_pipeline(config, dataset, options);
  pencil::write_probe_csv(result.probe_rows, args.out);
  std::printf("gradprobe: %zu rows (%d epochs x %zu examples) to %s\n",
              result.probe_rows.size(), config.epochs_phase2, args.indices.size(),
              args.out.c_str());
  return kExitOk;
}

int run_report(const std::string& run_dir) {
  const fs::path report_path = fs::path(run_dir) / "report.json";
  std::ifstream in(report_path);
  if (!in) throw pencil::IoError("no report.json in " + run_dir);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw pencil::IoError(report_path.string() + ": " + e.what());
  }

  const auto number = [](const nlohmann::json& v) {
    return v.is_null() ? std::string("n/a")
                       : (std::ostringstream() << std::fixed << std::setprecision(4)
                                               << v.get<double>())
                             .str();
  };
  std::printf("run directory: %s\n", run_dir.c_str());
  std::printf("mode: %s\n", j.at("baseline_ce").get<bool>() ? "ce-baseline" : "pencil");
  std::printf("best  epoch %4d  test accuracy %s%s\n", j.at("best").at("epoch").get<int>(),
              number(j.at("best").at("test_accuracy")).c_str(),
              j.at("best").at("selected_on_test").get<bool>() ? "  (selected on test)"
                                                              : "  (selected on validation)");
  std::printf("last  epoch %4d  test accuracy %s\n", j.at("last").at("epoch").get<int>(),
              number(j.at("last").at("test_accuracy")).c_str());
  if (j.at("final_correct_count").is_null()) {
    std::printf("label metrics: absent\n");
  } else {
    long long initial = -1;
    const auto& repeats = j.at("repeats");
    if (!repeats.empty() && !repeats.front().at("initial_correct_count").is_null()) {
      initial = repeats.front().at("initial_correct_count").get<long long>();
    }
    std::printf("correct labels: final %lld of %llu train examples (initial %lld)\n",
                j.at("final_correct_count").get<long long>(),
                j.at("dataset").at("train").get<unsigned long long>(), initial);
  }

  std::printf("phase  repeat  epochs  seconds\n");
  const fs::path timings_path = fs::path(run_dir) / "timings.json";
  std::ifstream timings_in(timings_path);
  if (timings_in) {
    nlohmann::json timings;
    try {
      timings = nlohmann::json::parse(timings_in);
    } catch (const nlohmann::json::parse_error& e) {
      throw pencil::IoError(timings_path.string() + ": " + e.what());
    }
    for (const auto& t : timings.at("phases")) {
      std::printf("%5d  %6d  %6d  %7.2f\n", t.at("phase").get<int>(), t.at("repeat").get<int>(),
                  t.at("epochs").get<int>(), t.at("seconds").get<double>());
    }
  } else {
    std::printf("(timings.json missing)\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PENCIL: probabilistic end-to-end noise correction in labels"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a Gaussian-blob dataset");
  synth->add_option("--n", synth_args.n, "Number of examples")->capture_default_str();
  synth->add_option("--classes", synth_args.classes, "Number of classes")->capture_default_str();
  synth->add_option("--dim", synth_args.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--separation", synth_args.separation, "Minimum center distance")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output file (.csv or binary)")->required();

  InjectArgs inject_args;
  CLI::App* inject = app.add_subcommand("inject", "Inject label noise into a dataset");
  inject->add_option("--in", inject_args.in, "Input dataset")->required();
  inject->add_option("--kind", inject_args.kind, "symmetric | asym-circular | asym-map")
      ->capture_default_str();
  inject->add_option("--rate", inject_args.rate, "Noise rate in [0, 1]")->required();
  inject->add_option("--map", inject_args.map, "from:to pairs for asym-map (e.g. 3:5,5:3)");
  inject->add_option("--seed", inject_args.seed, "RNG seed")->capture_default_str();
  inject->add_option("--out", inject_args.out, "Output dataset")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run the three-phase training pipeline");
  train->add_option("--data", train_args.data, "Dataset file")->required();
  train->add_option("--config", train_args.config, "Run configuration (key = value lines)");
  train->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  train->add_flag("--baseline-ce", train_args.baseline_ce,
                  "Train with plain cross entropy instead (no label correction)");
  train->add_option("--seed", train_args.seed,
                    "Seed override (beats PENCIL_SEED and the config file)");

  GradcheckArgs gradcheck_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Verify closed-form gradients against finite differences");
  gradcheck->add_option("--trials", gradcheck_args.trials, "Random instances per variant")
      ->capture_default_str();
  gradcheck->add_option("--classes", gradcheck_args.classes,
                        "Fixed class count (0 sweeps 2..20)")
      ->capture_default_str();
  gradcheck->add_option("--seed", gradcheck_args.seed, "RNG seed")->capture_default_str();
  gradcheck
      ->add_flag("--self-test-negate-inverse", gradcheck_args.negate_inverse,
                 "Fault injection: negate the inverse-KL label gradient before comparing")
      ->group("");

  GradprobeArgs gradprobe_args;
  CLI::App* gradprobe = app.add_subcommand(
      "gradprobe", "Record per-epoch label-logit gradients for selected examples");
  gradprobe->add_option("--data", gradprobe_args.data, "Dataset file")->required();
  gradprobe->add_option("--config", gradprobe_args.config, "Run configuration");
  gradprobe->add_option("--indices", gradprobe_args.indices, "Dataset row indices to observe")
      ->required()
      ->delimiter(',');
  gradprobe->add_option("--out", gradprobe_args.out, "Output CSV")->required();
  gradprobe->add_option("--seed", gradprobe_args.seed, "Seed override");

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "Summarize a finished training run");
  report->add_option("--run-dir", report_dir, "Directory written by `pencil train`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (inject->parsed()) return run_inject(inject_args);
    if (train->parsed()) return run_train(train_args);
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_args);
    if (gradprobe->parsed()) return run_gradprobe(gradprobe_args);
    if (report->parsed()) return run_report(report_dir);
  } catch (const pencil::DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const pencil::OracleFailureError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitVerification;
  } catch (const pencil::InvalidInputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const pencil::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
