#include "pencil/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pencil/errors.hpp"

namespace pencil {

double LambdaSchedule::at(int epoch, int total_epochs) const {
  if (epoch < 0 || epoch >= total_epochs) {
    throw InvalidInputError("lambda schedule epoch out of range");
  }
  switch (kind) {
    case LambdaKind::kConstant:
      return value;
    case LambdaKind::kLinearToZero: {
      if (total_epochs == 1) return 0.0;
      return value * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
    }
    case LambdaKind::kPiecewise: {
      int best_start = -1;
      double current = 0.0;
      for (const auto& [start, v] : pieces) {  // pieces need not be sorted
        if (start <= epoch && start > best_start) {
          best_start = start;
          current = v;
        }
      }
      if (best_start < 0) {
        throw InvalidInputError("piecewise lambda schedule must start at epoch 0");
      }
      return current;
    }
  }
  throw InvalidInputError("unknown lambda schedule kind");
}

void RunConfig::validate() const {
  if (epochs_phase1 < 1 || epochs_phase2 < 1 || epochs_phase3 < 1) {
    throw InvalidInputError("phase epoch counts must be >= 1");
  }
  if (!(learning_rate_phase12 > 0.0) || !(learning_rate_phase3 > 0.0)) {
    throw InvalidInputError("learning rates must be > 0");
  }
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InvalidInputError("alpha and beta must be >= 0");
  if (!(init_constant > 0.0)) throw InvalidInputError("init constant K must be > 0");
  if (batch_size < 1) throw InvalidInputError("batch size must be >= 1");
  if (repeat_count < 0) throw InvalidInputError("repeat count must be >= 0");
  if (!(repeat_damping > 0.0)) throw InvalidInputError("repeat damping must be > 0");
  if (hidden_sizes.empty()) throw InvalidInputError("at least one hidden layer is required");
  for (int h : hidden_sizes) {
    if (h < 1) throw InvalidInputError("hidden sizes must be positive");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0) ||
      !(validation_fraction >= 0.0 && validation_fraction < 1.0) ||
      test_fraction + validation_fraction >= 1.0) {
    throw InvalidInputError("split fractions must lie in [0, 1) and leave a training split");
  }
  if (lambda_schedule.value < 0.0) throw InvalidInputError("lambda must be >= 0");
  bool has_epoch_zero_piece = false;
  for (const auto& [start, v] : lambda_schedule.pieces) {
    if (v < 0.0) throw InvalidInputError("lambda must be >= 0");
    if (start < 0) throw InvalidInputError("lambda piece epochs must be >= 0");
    has_epoch_zero_piece |= start == 0;
  }
  if (lambda_schedule.kind == LambdaKind::kPiecewise && !has_epoch_zero_piece) {
    throw InvalidInputError("piecewise lambda schedule needs a piece starting at epoch 0");
  }
  if (loss_variant == LossVariant::kBinaryInverse) {
    throw InvalidInputError("training supports kl_forward and kl_inverse variants only");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("config key '" + key + "': bad number '" + value + "'");
  }
}

long long parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("config key '" + key + "': bad integer '" + value + "'");
  }
}

std::vector<std::string> split(const std::string& value, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(value);
  std::string part;
  while (std::getline(stream, part, sep)) parts.push_back(trim(part));
  return parts;
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  for (const auto& part : split(value, ',')) {
    out.push_back(static_cast<int>(parse_int(part, key)));
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::stringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInputError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "epochs_phase1") {
      config.epochs_phase1 = static_cast<int>(parse_int(value, key));
    } else if (key == "epochs_phase2") {
      config.epochs_phase2 = static_cast<int>(parse_int(value, key));
    } else if (key == "epochs_phase3") {
      config.epochs_phase3 = static_cast<int>(parse_int(value, key));
    } else if (key == "learning_rate_phase12") {
      config.learning_rate_phase12 = parse_double(value, key);
    } else if (key == "learning_rate_phase3") {
      config.learning_rate_phase3 = parse_double(value, key);
    } else if (key == "lr_decay_epochs") {
      config.lr_decay_epochs = parse_int_list(value, key);
    } else if (key == "alpha") {
      config.alpha = parse_double(value, key);
    } else if (key == "beta") {
      config.beta = parse_double(value, key);
    } else if (key == "lambda_kind") {
      if (value == "constant") {
        config.lambda_schedule.kind = LambdaKind::kConstant;
      } else if (value == "linear_to_zero") {
        config.lambda_schedule.kind = LambdaKind::kLinearToZero;
      } else if (value == "piecewise") {
        config.lambda_schedule.kind = LambdaKind::kPiecewise;
      } else {
        throw InvalidInputError("config key 'lambda_kind': unknown value '" + value + "'");
      }
    } else if (key == "lambda") {
      config.lambda_schedule.value = parse_double(value, key);
    } else if (key == "lambda_pieces") {
      config.lambda_schedule.pieces.clear();
      if (!trim(value).empty()) {
        for (const auto& piece : split(value, ',')) {
          const auto colon = piece.find(':');
          if (colon == std::string::npos) {
            throw InvalidInputError("config key 'lambda_pieces': expected epoch:value pairs");
          }
          config.lambda_schedule.pieces.emplace_back(
              static_cast<int>(parse_int(trim(piece.substr(0, colon)), key)),
              parse_double(trim(piece.substr(colon + 1)), key));
        }
        std::sort(config.lambda_schedule.pieces.begin(), config.lambda_schedule.pieces.end());
      }
    } else if (key == "init_constant") {
      config.init_constant = parse_double(value, key);
    } else if (key == "batch_size") {
      config.batch_size = static_cast<int>(parse_int(value, key));
    } else if (key == "repeat_count") {
      config.repeat_count = static_cast<int>(parse_int(value, key));
    } else if (key == "repeat_damping") {
      config.repeat_damping = parse_double(value, key);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(value, key));
    } else if (key == "loss_variant") {
      if (value == "kl_inverse") {
        config.loss_variant = LossVariant::kKlInverse;
      } else if (value == "kl_forward") {
        config.loss_variant = LossVariant::kKlForward;
      } else {
        throw InvalidInputError("config key 'loss_variant': unknown value '" + value + "'");
      }
    } else if (key == "hidden_sizes") {
      config.hidden_sizes = parse_int_list(value, key);
    } else if (key == "activation") {
      if (value == "relu") {
        config.activation = Activation::kRelu;
      } else if (value == "tanh") {
        config.activation = Activation::kTanh;
      } else {
        throw InvalidInputError("config key 'activation': unknown value '" + value + "'");
      }
    } else if (key == "momentum") {
      config.momentum = parse_double(value, key);
    } else if (key == "weight_decay") {
      config.weight_decay = parse_double(value, key);
    } else if (key == "test_fraction") {
      config.test_fraction = parse_double(value, key);
    } else if (key == "validation_fraction") {
      config.validation_fraction = parse_double(value, key);
    } else {
      throw InvalidInputError("config line " + std::to_string(line_no) + ": unknown key '" +
                              key + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::kKlForward: return "kl_forward";
    case LossVariant::kKlInverse: return "kl_inverse";
    case LossVariant::kBinaryInverse: return "binary_inverse";
  }
  return "?";
}

std::string to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

std::string to_string(LambdaKind kind) {
  switch (kind) {
    case LambdaKind::kConstant: return "constant";
    case LambdaKind::kLinearToZero: return "linear_to_zero";
    case LambdaKind::kPiecewise: return "piecewise";
  }
  return "?";
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "epochs_phase1 = " << c.epochs_phase1 << '\n'
      << "epochs_phase2 = " << c.epochs_phase2 << '\n'
      << "epochs_phase3 = " << c.epochs_phase3 << '\n'
      << "learning_rate_phase12 = " << c.learning_rate_phase12 << '\n'
      << "learning_rate_phase3 = " << c.learning_rate_phase3 << '\n';
  out << "lr_decay_epochs = ";
  for (std::size_t i = 0; i < c.lr_decay_epochs.size(); ++i) {
    out << (i ? "," : "") << c.lr_decay_epochs[i];
  }
  out << '\n'
      << "alpha = " << c.alpha << '\n'
      << "beta = " << c.beta << '\n'
      << "lambda_kind = " << to_string(c.lambda_schedule.kind) << '\n'
      << "lambda = " << c.lambda_schedule.value << '\n';
  out << "lambda_pieces = ";
  for (std::size_t i = 0; i < c.lambda_schedule.pieces.size(); ++i) {
    out << (i ? "," : "") << c.lambda_schedule.pieces[i].first << ':'
        << c.lambda_schedule.pieces[i].second;
  }
  out << '\n'
      << "init_constant = " << c.init_constant << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "repeat_count = " << c.repeat_count << '\n'
      << "repeat_damping = " << c.repeat_damping << '\n'
      << "seed = " << c.seed << '\n'
      << "loss_variant = " << to_string(c.loss_variant) << '\n';
  out << "hidden_sizes = ";
  for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) {
    out << (i ? "," : "") << c.hidden_sizes[i];
  }
  out << '\n'
      << "activation = " << to_string(c.activation) << '\n'
      << "momentum = " << c.momentum << '\n'
      << "weight_decay = " << c.weight_decay << '\n'
      << "test_fraction = " << c.test_fraction << '\n'
      << "validation_fraction = " << c.validation_fraction << '\n';
  return out.str();
}

}  // namespace pencil
