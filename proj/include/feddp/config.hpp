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

// Experiment configuration files.
//
// Input syntax: '#' comments, optional "[section]" headers, and
// "key = value" lines. Keys inside a section are prefixed with
// "section.". Every key has a default except model.kind,
// federation.clients and federation.rounds. Unknown keys are rejected.
//
// The resolved dump (DumpConfig) is the normative form: first line
// "# feddp-config/1", then every key as "section.key = value" in the fixed
// order of kFields, with derived values (model dimensions, the noise
// multiplier implied by privacy.epsilon) filled in. A dump re-parses to the
// same configuration.

#ifndef FEDDP_CONFIG_HPP_
#define FEDDP_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "feddp/accountant.hpp"
#include "feddp/comm_metrics.hpp"
#include "feddp/datasets.hpp"
#include "feddp/errors.hpp"
#include "feddp/orchestrator.hpp"

namespace feddp {

inline constexpr const char* kConfigVersionLine = "# feddp-config/1";

struct RunConfig {
  ExperimentConfig experiment;
  DatasetConfig dataset;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void Bad(const std::string& key, const std::string& value,
                             const std::string& expected) {
  throw ValidationError(key + ": invalid value '" + value + "' (expected " +
                        expected + ")");
}

inline std::uint64_t ToU64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    Bad(key, v, "a non-negative integer");
  }
  return out;
}

inline std::size_t ToSize(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(ToU64(key, v));
}

inline double ToReal(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) Bad(key, v, "a real number");
    return d;
  } catch (const std::logic_error&) {
    Bad(key, v, "a real number");
  }
}

inline bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  Bad(key, v, "true or false");
}

inline std::string Real(double v) { return FormatReal(v); }

template <typename Enum>
Enum ToEnum(const std::string& key, const std::string& v,
            std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += (names.empty() ? "" : " | ") + std::string(name);
  }
  Bad(key, v, names);
}

inline std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Sentinel for model dimensions derived from the dataset.
inline constexpr std::size_t kAuto = 0;

inline std::string SizeOrAuto(std::size_t v) {
  return v == kAuto ? "auto" : std::to_string(v);
}

inline std::size_t ParseSizeOrAuto(const std::string& key, const std::string& v) {
  return v == "auto" ? kAuto : ToSize(key, v);
}

inline const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"model.kind",
       [](RunConfig& c, const std::string& v) {
         c.experiment.model.kind = ToEnum<ModelKind>(
             "model.kind", v,
             {{"linear-regression", ModelKind::kLinearRegression},
              {"logistic-regression", ModelKind::kLogisticRegression},
              {"mlp", ModelKind::kMlp}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.model.kind)); }},
      {"model.input_dim",
       [](RunConfig& c, const std::string& v) {
         c.experiment.model.input_dim = ParseSizeOrAuto("model.input_dim", v);
       },
       [](const RunConfig& c) { return SizeOrAuto(c.experiment.model.input_dim); }},
      {"model.hidden_dim",
       [](RunConfig& c, const std::string& v) {
         c.experiment.model.hidden_dim = ToSize("model.hidden_dim", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.model.hidden_dim); }},
      {"model.output_dim",
       [](RunConfig& c, const std::string& v) {
         c.experiment.model.output_dim = ParseSizeOrAuto("model.output_dim", v);
       },
       [](const RunConfig& c) { return SizeOrAuto(c.experiment.model.output_dim); }},
      {"model.activation",
       [](RunConfig& c, const std::string& v) {
         c.experiment.model.activation = ToEnum<Activation>(
             "model.activation", v,
             {{"relu", Activation::kRelu}, {"tanh", Activation::kTanh}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.model.activation)); }},

      {"federation.clients",
       [](RunConfig& c, const std::string& v) {
         c.experiment.clients = ToSize("federation.clients", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.clients); }},
      {"federation.rounds",
       [](RunConfig& c, const std::string& v) {
         c.experiment.rounds = ToSize("federation.rounds", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.rounds); }},
      {"federation.local_epochs",
       [](RunConfig& c, const std::string& v) {
         c.experiment.local_epochs = ToSize("federation.local_epochs", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.local_epochs); }},
      {"federation.batch_size",
       [](RunConfig& c, const std::string& v) {
         c.experiment.batch_size = ToSize("federation.batch_size", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.batch_size); }},
      {"federation.participation",
       [](RunConfig& c, const std::string& v) {
         c.experiment.participation = ToReal("federation.participation", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.participation); }},
      {"federation.aggregation",
       [](RunConfig& c, const std::string& v) {
         c.experiment.aggregation = ToEnum<AggregationOp>(
             "federation.aggregation", v,
             {{"fedavg", AggregationOp::kFedAvg},
              {"fednova", AggregationOp::kFedNova}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.aggregation)); }},
      {"federation.partition",
       [](RunConfig& c, const std::string& v) {
         c.experiment.partition = ToEnum<PartitionScheme>(
             "federation.partition", v,
             {{"iid", PartitionScheme::kIid},
              {"dirichlet", PartitionScheme::kDirichlet}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.partition)); }},
      {"federation.tau_unit",
       [](RunConfig& c, const std::string& v) {
         c.experiment.tau_unit = ToEnum<TauUnit>(
             "federation.tau_unit", v,
             {{"steps", TauUnit::kSteps}, {"epochs", TauUnit::kEpochs}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.tau_unit)); }},
      {"federation.dirichlet_alpha",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dirichlet_alpha = ToReal("federation.dirichlet_alpha", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dirichlet_alpha); }},

      {"dp.clip_norm",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.clip_norm = ToReal("dp.clip_norm", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.clip_norm); }},
      {"dp.noise_multiplier",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.noise_multiplier = ToReal("dp.noise_multiplier", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.noise_multiplier); }},
      {"dp.learning_rate",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.learning_rate = ToReal("dp.learning_rate", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.learning_rate); }},
      {"dp.optimizer",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.optimizer = ToEnum<OptimizerKind>(
             "dp.optimizer", v,
             {{"sgd", OptimizerKind::kSgd}, {"adam", OptimizerKind::kAdam}});
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.dp.optimizer == OptimizerKind::kSgd ? "sgd" : "adam");
       }},
      {"dp.adam_beta1",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.adam_beta1 = ToReal("dp.adam_beta1", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.adam_beta1); }},
      {"dp.adam_beta2",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.adam_beta2 = ToReal("dp.adam_beta2", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.adam_beta2); }},
      {"dp.adam_eps",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.adam_eps = ToReal("dp.adam_eps", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.dp.adam_eps); }},
      {"dp.noise_placement",
       [](RunConfig& c, const std::string& v) {
         c.experiment.dp.noise_placement = ToEnum<NoisePlacement>(
             "dp.noise_placement", v,
             {{"after-mean", NoisePlacement::kAfterMean},
              {"before-mean", NoisePlacement::kBeforeMean}});
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.dp.noise_placement == NoisePlacement::kAfterMean
                                ? "after-mean"
                                : "before-mean");
       }},
      {"dp.sampler",
       [](RunConfig& c, const std::string& v) {
         c.experiment.sampler = ToEnum<SamplerMode>(
             "dp.sampler", v,
             {{"tls", SamplerMode::kTls}, {"poisson", SamplerMode::kPoisson}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.sampler)); }},

      {"privacy.delta",
       [](RunConfig& c, const std::string& v) {
         c.experiment.delta = ToReal("privacy.delta", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.delta); }},
      {"privacy.epsilon",
       [](RunConfig& c, const std::string& v) {
         if (v == "none") {
           c.experiment.target_epsilon.reset();
         } else {
           c.experiment.target_epsilon = ToReal("privacy.epsilon", v);
         }
       },
       [](const RunConfig& c) {
         return c.experiment.target_epsilon ? Real(*c.experiment.target_epsilon)
                                            : std::string("none");
       }},

      {"mask.layers",
       [](RunConfig& c, const std::string& v) {
         c.experiment.mask_layers = v == "all" ? std::vector<std::string>{}
                                               : SplitList(v);
       },
       [](const RunConfig& c) {
         if (c.experiment.mask_layers.empty()) return std::string("all");
         std::string out;
         for (const auto& l : c.experiment.mask_layers) {
           out += (out.empty() ? "" : ",") + l;
         }
         return out;
       }},

      {"seeds.global",
       [](RunConfig& c, const std::string& v) {
         c.experiment.seeds.global = ToU64("seeds.global", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.seeds.global); }},
      {"seeds.data",
       [](RunConfig& c, const std::string& v) {
         c.experiment.seeds.data = ToU64("seeds.data", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.seeds.data); }},
      {"seeds.noise",
       [](RunConfig& c, const std::string& v) {
         c.experiment.seeds.noise = ToU64("seeds.noise", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.seeds.noise); }},

      {"pretrain.epochs",
       [](RunConfig& c, const std::string& v) {
         c.experiment.pretrain.epochs = ToSize("pretrain.epochs", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.pretrain.epochs); }},
      {"pretrain.lr",
       [](RunConfig& c, const std::string& v) {
         c.experiment.pretrain.lr = ToReal("pretrain.lr", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.pretrain.lr); }},
      {"pretrain.public_fraction",
       [](RunConfig& c, const std::string& v) {
         c.experiment.pretrain.public_fraction = ToReal("pretrain.public_fraction", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.pretrain.public_fraction); }},

      {"comm.bandwidth_mbps",
       [](RunConfig& c, const std::string& v) {
         c.experiment.comm.bandwidth_mbps = ToReal("comm.bandwidth_mbps", v);
       },
       [](const RunConfig& c) { return Real(c.experiment.comm.bandwidth_mbps); }},
      {"comm.full_model_bytes",
       [](RunConfig& c, const std::string& v) {
         c.experiment.comm.full_model_bytes =
             v == "auto" ? 0 : ToU64("comm.full_model_bytes", v);
       },
       [](const RunConfig& c) {
         return c.experiment.comm.full_model_bytes == 0
                    ? std::string("auto")
                    : std::to_string(c.experiment.comm.full_model_bytes);
       }},
      {"comm.overhead_bytes",
       [](RunConfig& c, const std::string& v) {
         c.experiment.comm.overhead_bytes = ToU64("comm.overhead_bytes", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.comm.overhead_bytes); }},
      {"comm.encoding",
       [](RunConfig& c, const std::string& v) {
         c.experiment.encoding = ToEnum<Encoding>(
             "comm.encoding", v,
             {{"dense-f32", Encoding::kDenseF32},
              {"sparse-idx32-f32", Encoding::kSparseIdx32F32}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.experiment.encoding)); }},
      {"comm.masked_broadcast",
       [](RunConfig& c, const std::string& v) {
         c.experiment.masked_broadcast = ToBool("comm.masked_broadcast", v);
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.masked_broadcast ? "true" : "false");
       }},

      {"dataset.generator",
       [](RunConfig& c, const std::string& v) {
         c.dataset.generator = ToEnum<Generator>(
             "dataset.generator", v,
             {{"gaussian-blobs", Generator::kGaussianBlobs},
              {"two-spirals", Generator::kTwoSpirals},
              {"csv", Generator::kCsv}});
       },
       [](const RunConfig& c) { return std::string(ToString(c.dataset.generator)); }},
      {"dataset.classes",
       [](RunConfig& c, const std::string& v) {
         c.dataset.classes = ToSize("dataset.classes", v);
       },
       [](const RunConfig& c) { return std::to_string(c.dataset.classes); }},
      {"dataset.samples",
       [](RunConfig& c, const std::string& v) {
         c.dataset.samples = ToSize("dataset.samples", v);
       },
       [](const RunConfig& c) { return std::to_string(c.dataset.samples); }},
      {"dataset.input_dim",
       [](RunConfig& c, const std::string& v) {
         c.dataset.input_dim = ToSize("dataset.input_dim", v);
       },
       [](const RunConfig& c) { return std::to_string(c.dataset.input_dim); }},
      {"dataset.noise_std",
       [](RunConfig& c, const std::string& v) {
         c.dataset.noise_std = ToReal("dataset.noise_std", v);
       },
       [](const RunConfig& c) { return Real(c.dataset.noise_std); }},
      {"dataset.clusters_per_class",
       [](RunConfig& c, const std::string& v) {
         c.dataset.clusters_per_class = ToSize("dataset.clusters_per_class", v);
       },
       [](const RunConfig& c) { return std::to_string(c.dataset.clusters_per_class); }},
      {"dataset.spread",
       [](RunConfig& c, const std::string& v) {
         c.dataset.spread = ToReal("dataset.spread", v);
       },
       [](const RunConfig& c) { return Real(c.dataset.spread); }},
      {"dataset.seed",
       [](RunConfig& c, const std::string& v) {
         c.dataset.seed = ToU64("dataset.seed", v);
       },
       [](const RunConfig& c) { return std::to_string(c.dataset.seed); }},
      {"dataset.test_fraction",
       [](RunConfig& c, const std::string& v) {
         c.dataset.test_fraction = ToReal("dataset.test_fraction", v);
       },
       [](const RunConfig& c) { return Real(c.dataset.test_fraction); }},
      {"dataset.path",
       [](RunConfig& c, const std::string& v) { c.dataset.path = v; },
       [](const RunConfig& c) { return c.dataset.path; }},

      {"run.threads",
       [](RunConfig& c, const std::string& v) {
         c.experiment.threads = ToSize("run.threads", v);
       },
       [](const RunConfig& c) { return std::to_string(c.experiment.threads); }},
      {"run.wall_clock",
       [](RunConfig& c, const std::string& v) {
         c.experiment.wall_clock = ToBool("run.wall_clock", v);
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.wall_clock ? "true" : "false");
       }},
      {"run.label",
       [](RunConfig& c, const std::string& v) { c.experiment.label = v; },
       [](const RunConfig& c) { return c.experiment.label; }},
  };
  return fields;
}

inline const Field* FindField(std::string_view key) {
  for (const auto& f : Fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

inline void SetKey(RunConfig& cfg, const std::string& key,
                   const std::string& value, const std::string& where) {
  const Field* f = FindField(key);
  if (f == nullptr) {
    throw ValidationError(where + "unknown configuration key '" + key + "'");
  }
  f->set(cfg, value);
}

}  // namespace config_detail

// Defaults mirror a small two-client selective-tuning run.
inline RunConfig DefaultRunConfig() {
  RunConfig c;
  c.experiment.model = {ModelKind::kMlp, config_detail::kAuto, 16,
                        config_detail::kAuto, Activation::kTanh};
  c.experiment.clients = 0;
  c.experiment.rounds = 0;
  c.experiment.local_epochs = 5;
  c.experiment.batch_size = 32;
  c.experiment.mask_layers = {"head.weight", "head.bias"};
  return c;
}

inline std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& f : config_detail::Fields()) keys.emplace_back(f.key);
  return keys;
}

inline std::string DumpConfig(const RunConfig& cfg) {
  std::string out = std::string(kConfigVersionLine) + "\n";
  for (const auto& f : config_detail::Fields()) {
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

// Fills derived values: model dimensions from the dataset and the noise
// multiplier implied by a target epsilon. Validates everything.
inline void ResolveConfig(RunConfig& cfg) {
  auto& ex = cfg.experiment;
  if (ex.clients == 0) throw ValidationError("federation.clients must be >= 1");
  ValidateDataset(cfg.dataset);
  const TrainTest data = BuildDatasets(cfg.dataset);
  if (ex.model.input_dim == config_detail::kAuto) {
    ex.model.input_dim = data.train.inputs.cols;
  }
  if (ex.model.output_dim == config_detail::kAuto) {
    switch (ex.model.kind) {
      case ModelKind::kLinearRegression: ex.model.output_dim = 1; break;
      case ModelKind::kLogisticRegression: ex.model.output_dim = 2; break;
      case ModelKind::kMlp: {
        double max_label = 0.0;
        for (double y : data.train.targets) max_label = std::max(max_label, y);
        ex.model.output_dim = std::max<std::size_t>(
            2, static_cast<std::size_t>(max_label) + 1);
        break;
      }
    }
  }
  if (ex.model.kind != ModelKind::kMlp) ex.model.hidden_dim = 0;
  try {
    ValidateSpec(ex.model);
  } catch (const StructuralError& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  if (ex.model.input_dim != data.train.inputs.cols) {
    throw ValidationError("model.input_dim " + std::to_string(ex.model.input_dim) +
                          " does not match dataset width " +
                          std::to_string(data.train.inputs.cols));
  }
  ValidateExperiment(ex);
  if (ex.target_epsilon) {
    const DataSplit split = SplitPublic(data.train, ex);
    if (split.private_data.size() < ex.clients) {
      throw ValidationError("federation.clients exceeds the private sample count");
    }
    const auto shards = PartitionData(split.private_data, ex.clients, ex.partition,
                                      ex.dirichlet_alpha, ex.seeds.data);
    std::size_t smallest = shards.front().n_k;
    for (const auto& s : shards) smallest = std::min(smallest, s.n_k);
    ex.dp.noise_multiplier = ResolveSigma(ex, smallest);
  }
}

inline RunConfig ParseConfigText(std::string_view text,
                                 const std::vector<std::string>& overrides = {}) {
  using config_detail::Trim;
  RunConfig cfg = DefaultRunConfig();
  std::map<std::string, bool> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto hash = line.find('#');
    const std::string body = Trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ValidationError(where + "unterminated section");
      section = Trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where + "expected 'key = value'");
    }
    std::string key = Trim(std::string_view(body).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    config_detail::SetKey(cfg, key, Trim(std::string_view(body).substr(eq + 1)), where);
    seen[key] = true;
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("override '" + o + "' is not key=value");
    }
    const std::string key = Trim(std::string_view(o).substr(0, eq));
    config_detail::SetKey(cfg, key, Trim(std::string_view(o).substr(eq + 1)),
                          "override: ");
    seen[key] = true;
  }
  for (const char* required : {"model.kind", "federation.clients", "federation.rounds"}) {
    if (!seen.count(required)) {
      throw ValidationError(std::string(required) + " is required");
    }
  }
  ResolveConfig(cfg);
  return cfg;
}

inline RunConfig ParseConfigFile(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {}) {
  if (!std::filesystem::exists(path)) {
    throw IoError("config file '" + path.string() + "' does not exist");
  }
  return ParseConfigText(ReadTextFile(path), overrides);
}

}  // namespace feddp

#endif  // FEDDP_CONFIG_HPP_
