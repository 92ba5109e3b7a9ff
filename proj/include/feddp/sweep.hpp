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

// Grid sweeps over (clients, rounds, target epsilon). Each cell runs the
// four variants full/selective x FedAvg/FedNova on seeds derived from the
// cell index, so no two cells share a random stream.

#ifndef FEDDP_SWEEP_HPP_
#define FEDDP_SWEEP_HPP_

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "feddp/comm_metrics.hpp"
#include "feddp/config.hpp"
#include "feddp/datasets.hpp"
#include "feddp/orchestrator.hpp"
#include "feddp/rng.hpp"

namespace feddp {

struct SweepGrid {
  std::vector<std::size_t> clients;
  std::vector<std::size_t> rounds;
  std::vector<double> epsilons;
};

struct SweepRow {
  std::size_t clients = 0;
  std::size_t rounds = 0;
  double target_epsilon = 0.0;
  double epsilon = 0.0;
  double ft_fedavg = 0.0;
  double sel_fedavg = 0.0;
  double ft_fednova = 0.0;
  double sel_fednova = 0.0;
  std::string error;  // empty on success
};

enum class Variant { kFullFedAvg, kSelFedAvg, kFullFedNova, kSelFedNova };

inline const char* VariantName(Variant v) {
  switch (v) {
    case Variant::kFullFedAvg: return "FT-FA";
    case Variant::kSelFedAvg: return "Sel-FA";
    case Variant::kFullFedNova: return "FT-FN";
    case Variant::kSelFedNova: return "Sel-FN";
  }
  return "?";
}

inline std::vector<std::string> SelectiveLayers(const ExperimentConfig& base) {
  if (!base.mask_layers.empty()) return base.mask_layers;
  return {"head.weight", "head.bias"};
}

// Configuration of cell `index` for one variant.
inline ExperimentConfig SweepCellConfig(const ExperimentConfig& base,
                                        std::size_t index, std::size_t clients,
                                        std::size_t rounds, double epsilon,
                                        Variant variant) {
  ExperimentConfig cfg = base;
  cfg.clients = clients;
  cfg.rounds = rounds;
  cfg.target_epsilon = epsilon;
  cfg.seeds.global = DerivedSeed(base.seeds.global, index);
  cfg.seeds.data = DerivedSeed(base.seeds.data, index);
  cfg.seeds.noise = DerivedSeed(base.seeds.noise, index);
  const bool selective =
      variant == Variant::kSelFedAvg || variant == Variant::kSelFedNova;
  cfg.mask_layers = selective ? SelectiveLayers(base) : std::vector<std::string>{};
  cfg.aggregation =
      variant == Variant::kFullFedAvg || variant == Variant::kSelFedAvg
          ? AggregationOp::kFedAvg
          : AggregationOp::kFedNova;
  return cfg;
}

inline constexpr const char* kSweepFile = "sweep.csv";

inline std::string RenderSweepCsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "# feddp-sweep/1\n"
      << "clients,rounds,target_epsilon,epsilon,ft_fa,sel_fa,ft_fn,sel_fn,error\n";
  for (const auto& r : rows) {
    out << r.clients << ',' << r.rounds << ',' << FormatReal(r.target_epsilon)
        << ',' << FormatReal(r.epsilon) << ',' << FormatReal(r.ft_fedavg) << ','
        << FormatReal(r.sel_fedavg) << ',' << FormatReal(r.ft_fednova) << ','
        << FormatReal(r.sel_fednova) << ',' << r.error << '\n';
  }
  return out.str();
}

inline std::vector<SweepRow> RunSweep(
    const RunConfig& base, const SweepGrid& grid,
    const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  if (grid.clients.empty() || grid.rounds.empty() || grid.epsilons.empty()) {
    throw ValidationError("sweep grid must list at least one value per axis");
  }
  const TrainTest data = BuildDatasets(base.dataset);
  std::vector<SweepRow> rows;
  std::size_t index = 0;
  for (std::size_t k : grid.clients) {
    for (std::size_t t : grid.rounds) {
      for (double eps : grid.epsilons) {
        SweepRow row;
        row.clients = k;
        row.rounds = t;
        row.target_epsilon = eps;
        try {
          for (Variant v : {Variant::kFullFedAvg, Variant::kSelFedAvg,
                            Variant::kFullFedNova, Variant::kSelFedNova}) {
            ExperimentConfig cfg =
                SweepCellConfig(base.experiment, index, k, t, eps, v);
            char label[96];
            std::snprintf(label, sizeof(label), "K%zu-T%zu-eps%g %s", k, t, eps,
                          VariantName(v));
            cfg.label = label;
            const ExperimentResult r = RunExperiment(cfg, data.train, data.test);
            if (r.error) throw NumericError(*r.error);
            const double acc =
                r.records.empty() ? 0.0 : r.records.back().global_accuracy;
            switch (v) {
              case Variant::kFullFedAvg: row.ft_fedavg = acc; break;
              case Variant::kSelFedAvg:
                row.sel_fedavg = acc;
                row.epsilon = r.records.empty() ? 0.0
                                                : r.records.back().epsilon_to_date;
                break;
              case Variant::kFullFedNova: row.ft_fednova = acc; break;
              case Variant::kSelFedNova: row.sel_fednova = acc; break;
            }
            if (out_dir) {
              char sub[32];
              std::snprintf(sub, sizeof(sub), "cell-%03zu", index);
              WriteRecords(r.records, *out_dir / sub / VariantName(v),
                           {cfg.label, r.mask.trainable_count(),
                            r.mask.total_count()});
            }
          }
        } catch (const Error& e) {
          row.error = e.what();
          for (char& c : row.error) {
            if (c == ',' || c == '\n') c = ';';
          }
        }
        rows.push_back(row);
        ++index;
      }
    }
  }
  if (out_dir) WriteTextFile(*out_dir / kSweepFile, RenderSweepCsv(rows));
  return rows;
}

}  // namespace feddp

#endif  // FEDDP_SWEEP_HPP_
