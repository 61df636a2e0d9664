#include "pencil/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pencil/errors.hpp"
#include "pencil/serialize.hpp"

namespace pencil {

namespace {

constexpr char kMagic[4] = {'P', 'D', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

bool is_csv(const std::filesystem::path& path) { return path.extension() == ".csv"; }

void check_consistent(const Dataset& d) {
  if (d.noisy_labels.size() != d.size()) {
    throw InvalidInputError("dataset noisy label count does not match rows");
  }
  if (d.has_truth() && d.true_labels.size() != d.size()) {
    throw InvalidInputError("dataset true label count does not match rows");
  }
}

int derive_num_classes(const Dataset& d) {
  int max_label = -1;
  for (int v : d.true_labels) max_label = std::max(max_label, v);
  for (int v : d.noisy_labels) max_label = std::max(max_label, v);
  return max_label + 1;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (int j = 0; j < d.dim(); ++j) out << 'f' << j << ',';
  out << "true_label,noisy_label\n";
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.features.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features.at(i, j));
      out << buf << ',';
    }
    out << d.true_labels[i] << ',' << d.noisy_labels[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IoError("empty dataset file: " + path.string());

  std::size_t columns = std::count(header.begin(), header.end(), ',') + 1;
  if (columns < 3) throw IoError("dataset CSV needs features plus two label columns");
  const std::size_t dim = columns - 2;

  std::vector<double> features;
  std::vector<int> true_labels;
  std::vector<int> noisy_labels;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    for (std::size_t j = 0; j < columns; ++j) {
      if (!std::getline(row, cell, ',')) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": missing column");
      }
      if (j < dim) {
        std::size_t used = 0;
        double value = 0.0;
        try {
          value = std::stod(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != cell.size()) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                        cell + "'");
        }
        features.push_back(value);
      } else {
        int value = 0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (res.ec != std::errc{}) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad label");
        }
        (j == dim ? true_labels : noisy_labels).push_back(value);
      }
    }
  }
  Dataset d;
  d.features.rows = true_labels.size();
  d.features.cols = dim;
  d.features.data = std::move(features);
  d.true_labels = std::move(true_labels);
  d.noisy_labels = std::move(noisy_labels);
  d.num_classes = derive_num_classes(d);
  check_consistent(d);
  return d;
}

void save_binary(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  detail::write_magic(out, kMagic);
  detail::write_u32(out, kVersion);
  detail::write_u64(out, d.size());
  detail::write_u32(out, static_cast<std::uint32_t>(d.dim()));
  detail::write_u32(out, static_cast<std::uint32_t>(d.num_classes));
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.features.cols; ++j) detail::write_f64(out, d.features.at(i, j));
    detail::write_i32(out, d.true_labels[i]);
    detail::write_i32(out, d.noisy_labels[i]);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  detail::expect_magic(in, kMagic, "dataset");
  if (detail::read_u32(in) != kVersion) throw IoError("unsupported dataset version");
  const auto n = detail::read_u64(in);
  const auto dim = detail::read_u32(in);
  const auto classes = detail::read_u32(in);
  Dataset d;
  d.features = Matrix(n, dim);
  d.true_labels.resize(n);
  d.noisy_labels.resize(n);
  d.num_classes = static_cast<int>(classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) d.features.at(i, j) = detail::read_f64(in);
    d.true_labels[i] = detail::read_i32(in);
    d.noisy_labels[i] = detail::read_i32(in);
  }
  return d;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  check_consistent(dataset);
  if (!dataset.has_truth()) {
    throw InvalidInputError("dataset files always carry the true-label column");
  }
  if (is_csv(path)) {
    save_csv(dataset, path);
  } else {
    save_binary(dataset, path);
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  return is_csv(path) ? load_csv(path) : load_binary(path);
}

}  // namespace pencil
