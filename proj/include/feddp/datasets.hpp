/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Synthetic stand-in datasets and a loader for small delimited numeric files.

#ifndef FEDDP_DATASETS_HPP_
#define FEDDP_DATASETS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/model.hpp"
#include "feddp/rng.hpp"

namespace feddp {

enum class Generator { kGaussianBlobs, kTwoSpirals, kCsv };

inline std::string_view ToString(Generator g) {
  switch (g) {
    case Generator::kGaussianBlobs: return "gaussian-blobs";
    case Generator::kTwoSpirals: return "two-spirals";
    case Generator::kCsv: return "csv";
  }
  return "?";
}

struct DatasetConfig {
  Generator generator = Generator::kGaussianBlobs;
  std::size_t classes = 2;
  std::size_t samples = 600;
  std::size_t input_dim = 2;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  // Blobs per class; more than one makes the classes non-linearly separable.
  std::size_t clusters_per_class = 1;
  // Half-width of the cube the blob centres are drawn from.
  double spread = 2.0;
  double test_fraction = 0.25;
  std::string path;  // csv only

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

inline void ValidateDataset(const DatasetConfig& d) {
  if (d.generator == Generator::kCsv) {
    if (d.path.empty()) throw ValidationError("dataset.path is required for csv");
  } else {
    if (d.classes < 1) throw ValidationError("dataset.classes must be >= 1");
    if (d.samples < d.classes) {
      throw ValidationError("dataset.samples must be >= dataset.classes");
    }
    if (d.input_dim < 1) throw ValidationError("dataset.input_dim must be >= 1");
    if (d.generator == Generator::kTwoSpirals && d.input_dim < 2) {
      throw ValidationError("two-spirals needs dataset.input_dim >= 2");
    }
    if (!(d.noise_std >= 0.0)) {
      throw ValidationError("dataset.noise_std must be >= 0");
    }
    if (d.clusters_per_class < 1) {
      throw ValidationError("dataset.clusters_per_class must be >= 1");
    }
  }
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
    throw ValidationError("dataset.test_fraction must lie in (0, 1)");
  }
}

// Sample i belongs to class i mod classes, so every class is represented.
inline SampleBatch GaussianBlobs(const DatasetConfig& d) {
  CounterRng centres_rng(StreamKey({d.seed, 0xb10b5}));
  const std::size_t clusters = d.classes * d.clusters_per_class;
  std::vector<double> centres(clusters * d.input_dim);
  for (double& c : centres) c = d.spread * (2.0 * centres_rng.NextUniform() - 1.0);
  CounterRng rng(StreamKey({d.seed, 0x5a3b1e}));
  SampleBatch out;
  out.inputs = Matrix(d.samples, d.input_dim);
  out.targets.resize(d.samples);
  for (std::size_t i = 0; i < d.samples; ++i) {
    const std::size_t label = i % d.classes;
    const std::size_t cluster =
        label * d.clusters_per_class +
        static_cast<std::size_t>(rng.NextBelow(d.clusters_per_class));
    for (std::size_t j = 0; j < d.input_dim; ++j) {
      out.inputs(i, j) =
          centres[cluster * d.input_dim + j] + d.noise_std * rng.NextGaussian();
    }
    out.targets[i] = static_cast<double>(label);
  }
  return out;
}

// Interleaved spiral arms in the first two coordinates; remaining
// coordinates are pure noise.
inline SampleBatch TwoSpirals(const DatasetConfig& d) {
  CounterRng rng(StreamKey({d.seed, 0x5917a1}));
  SampleBatch out;
  out.inputs = Matrix(d.samples, d.input_dim);
  out.targets.resize(d.samples);
  for (std::size_t i = 0; i < d.samples; ++i) {
    const std::size_t label = i % d.classes;
    const double t = rng.NextUniform();
    const double angle = 3.0 * std::numbers::pi * t +
                         2.0 * std::numbers::pi * static_cast<double>(label) /
                             static_cast<double>(d.classes);
    const double radius = 0.2 + 2.0 * t;
    out.inputs(i, 0) = radius * std::cos(angle) + d.noise_std * rng.NextGaussian();
    out.inputs(i, 1) = radius * std::sin(angle) + d.noise_std * rng.NextGaussian();
    for (std::size_t j = 2; j < d.input_dim; ++j) {
      out.inputs(i, j) = d.noise_std * rng.NextGaussian();
    }
    out.targets[i] = static_cast<double>(label);
  }
  return out;
}

// Comma- or whitespace-separated rows of numbers, last column the target.
// Blank lines, '#' comments and a leading non-numeric header are skipped.
inline SampleBatch LoadDelimited(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    bool numeric = true;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (row.empty() && numeric) continue;
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": non-numeric field");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected " + std::to_string(rows.front().size()) +
                    " columns");
    }
    if (row.size() < 2) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": need at least one feature and a target");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("dataset '" + path.string() + "' is empty");
  SampleBatch out;
  out.inputs = Matrix(rows.size(), rows.front().size() - 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < rows[i].size(); ++j) out.inputs(i, j) = rows[i][j];
    out.targets.push_back(rows[i].back());
  }
  return out;
}

struct TrainTest {
  SampleBatch train;
  SampleBatch test;
};

inline TrainTest SplitTrainTest(const SampleBatch& all, double test_fraction,
                                std::uint64_t seed) {
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(StreamKey({seed, 0x7e57}));
  rng.Shuffle(std::span<std::size_t>(order));
  auto n_test = static_cast<std::size_t>(
      std::floor(test_fraction * static_cast<double>(all.size())));
  if (n_test == 0) n_test = 1;
  if (n_test >= all.size()) {
    throw ValidationError("dataset too small for a train/test split");
  }
  std::vector<std::size_t> test(order.begin(),
                                order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                                 order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {all.Select(train), all.Select(test)};
}

inline TrainTest BuildDatasets(const DatasetConfig& d) {
  ValidateDataset(d);
  SampleBatch all;
  switch (d.generator) {
    case Generator::kGaussianBlobs: all = GaussianBlobs(d); break;
    case Generator::kTwoSpirals: all = TwoSpirals(d); break;
    case Generator::kCsv: all = LoadDelimited(d.path); break;
  }
  return SplitTrainTest(all, d.test_fraction, d.seed);
}

}  // namespace feddp

#endif  // FEDDP_DATASETS_HPP_
