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

// End-to-end simulation of federated DP training with selective tuning.
//
// Each round the server draws the participating clients, every selected
// client copies the global model and runs E epochs of sampled, clipped and
// perturbed steps on the trainable coordinates only, and the server folds
// the masked deltas back in with the configured aggregation operator.
//
// All randomness comes from counter-based streams keyed by
// (seed, client, round, epoch, batch), so results do not depend on how
// client work is scheduled across threads.

#ifndef FEDDP_ORCHESTRATOR_HPP_
#define FEDDP_ORCHESTRATOR_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "feddp/accountant.hpp"
#include "feddp/aggregation.hpp"
#include "feddp/comm_metrics.hpp"
#include "feddp/dp_optimizer.hpp"
#include "feddp/errors.hpp"
#include "feddp/model.hpp"
#include "feddp/partition.hpp"
#include "feddp/rng.hpp"

namespace feddp {

enum class PartitionScheme { kIid, kDirichlet };

inline std::string_view ToString(PartitionScheme s) {
  return s == PartitionScheme::kIid ? "iid" : "dirichlet";
}

// What a client reports as tau, its amount of local work. FedNova divides
// each update by it.
enum class TauUnit { kSteps, kEpochs };

inline std::string_view ToString(TauUnit u) {
  return u == TauUnit::kSteps ? "steps" : "epochs";
}

struct Seeds {
  std::uint64_t global = 0;
  std::uint64_t data = 1;
  std::uint64_t noise = 2;

  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct PretrainConfig {
  std::size_t epochs = 0;  // 0 disables pretraining
  double lr = 0.1;
  double public_fraction = 0.2;

  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

struct ExperimentConfig {
  ModelSpec model;
  std::size_t clients = 1;
  std::size_t rounds = 0;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double participation = 1.0;
  DpConfig dp;
  SamplerMode sampler = SamplerMode::kTls;
  double delta = kDefaultDelta;
  // When set, dp.noise_multiplier is derived from it before the run.
  std::optional<double> target_epsilon;
  std::vector<std::string> mask_layers;  // empty means every layer
  AggregationOp aggregation = AggregationOp::kFedAvg;
  TauUnit tau_unit = TauUnit::kSteps;
  PartitionScheme partition = PartitionScheme::kIid;
  double dirichlet_alpha = 0.5;
  Seeds seeds;
  PretrainConfig pretrain;
  CommModel comm{1456.0 / 174.72, 0, 0};  // full_model_bytes 0 means 4 * d
  Encoding encoding = Encoding::kDenseF32;
  bool masked_broadcast = false;
  std::size_t threads = 1;
  bool wall_clock = false;
  std::string label;

  std::size_t SelectedPerRound() const {
    return static_cast<std::size_t>(
        std::ceil(participation * static_cast<double>(clients) - 1e-12));
  }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.model == b.model && a.clients == b.clients &&
           a.rounds == b.rounds && a.local_epochs == b.local_epochs &&
           a.batch_size == b.batch_size && a.participation == b.participation &&
           a.dp == b.dp && a.sampler == b.sampler && a.delta == b.delta &&
           a.target_epsilon == b.target_epsilon &&
           a.mask_layers == b.mask_layers && a.aggregation == b.aggregation &&
           a.tau_unit == b.tau_unit &&
           a.partition == b.partition &&
           a.dirichlet_alpha == b.dirichlet_alpha && a.seeds == b.seeds &&
           a.pretrain == b.pretrain &&
           a.comm.bandwidth_mbps == b.comm.bandwidth_mbps &&
           a.comm.full_model_bytes == b.comm.full_model_bytes &&
           a.comm.overhead_bytes == b.comm.overhead_bytes &&
           a.encoding == b.encoding &&
           a.masked_broadcast == b.masked_broadcast &&
           a.threads == b.threads && a.wall_clock == b.wall_clock &&
           a.label == b.label;
  }
};

inline void ValidateExperiment(const ExperimentConfig& cfg) {
  ValidateSpec(cfg.model);
  if (cfg.clients < 1) throw ValidationError("federation.clients must be >= 1");
  if (cfg.local_epochs < 1) {
    throw ValidationError("federation.local_epochs must be >= 1");
  }
  if (cfg.batch_size < 1) {
    throw ValidationError("federation.batch_size must be >= 1");
  }
  if (!(cfg.participation > 0.0 && cfg.participation <= 1.0)) {
    throw ValidationError("federation.participation must lie in (0, 1]");
  }
  if (cfg.SelectedPerRound() < 1) {
    throw ValidationError("federation.participation selects no clients");
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ValidationError("privacy.delta must lie in (0, 1)");
  }
  if (cfg.target_epsilon && !(*cfg.target_epsilon > 0.0)) {
    throw ValidationError("privacy.epsilon must be > 0");
  }
  if (!(cfg.dirichlet_alpha > 0.0)) {
    throw ValidationError("federation.dirichlet_alpha must be > 0");
  }
  if (!(cfg.pretrain.public_fraction >= 0.0 &&
        cfg.pretrain.public_fraction < 1.0)) {
    throw ValidationError("pretrain.public_fraction must lie in [0, 1)");
  }
  if (cfg.threads < 1) throw ValidationError("run.threads must be >= 1");
  try {
    cfg.dp.Validate();
  } catch (const DomainError& e) {
    throw ValidationError(std::string("dp: ") + e.what());
  }
  if (!(cfg.comm.bandwidth_mbps > 0.0)) {
    throw ValidationError("comm.bandwidth_mbps must be > 0");
  }
  if (cfg.partition == PartitionScheme::kDirichlet && !cfg.model.is_classifier()) {
    throw ValidationError("dirichlet partitioning requires a classifier");
  }
  try {
    const std::vector<std::string>& names = cfg.mask_layers;
    if (!names.empty()) MakeMask(MakeLayout(cfg.model), names);
  } catch (const StructuralError& e) {
    throw ValidationError(std::string("mask.layers: ") + e.what());
  }
}

inline PartitionMask MaskFor(const ExperimentConfig& cfg) {
  const Layout layout = MakeLayout(cfg.model);
  if (cfg.mask_layers.empty()) return FullMask(layout);
  return MakeMask(layout, std::span<const std::string>(cfg.mask_layers));
}

struct ClientShard {
  std::uint32_t client_id = 0;
  SampleBatch data;
  std::size_t n_k = 0;
  std::uint64_t rng_seed = 0;
};

inline std::uint64_t ClientSeed(std::uint64_t noise_seed, std::uint32_t id) {
  return StreamKey({noise_seed, 0xc1e47, id});
}

namespace detail {

inline std::vector<ClientShard> MakeShards(
    const SampleBatch& dataset,
    const std::vector<std::vector<std::size_t>>& assignment,
    std::uint64_t seed) {
  std::vector<ClientShard> shards;
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    std::vector<std::size_t> rows = assignment[k];
    std::sort(rows.begin(), rows.end());
    ClientShard s;
    s.client_id = static_cast<std::uint32_t>(k);
    s.data = dataset.Select(rows);
    s.n_k = rows.size();
    s.rng_seed = ClientSeed(seed, s.client_id);
    shards.push_back(std::move(s));
  }
  return shards;
}

}  // namespace detail

// Disjoint shards covering the dataset. IID sizes differ by at most one;
// Dirichlet draws per-class client proportions and resamples until every
// client holds at least one row.
inline std::vector<ClientShard> PartitionData(const SampleBatch& dataset,
                                              std::size_t clients,
                                              PartitionScheme scheme,
                                              double alpha,
                                              std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (clients == 0) throw StructuralError("cannot partition over zero clients");
  if (clients > n) {
    throw StructuralError("cannot split " + std::to_string(n) + " rows over " +
                          std::to_string(clients) + " clients");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(StreamKey({seed, 0xd474}));
  rng.Shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> assignment(clients);

  if (scheme == PartitionScheme::kIid) {
    std::size_t at = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      const std::size_t size = n / clients + (k < n % clients ? 1 : 0);
      assignment[k].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                           order.begin() + static_cast<std::ptrdiff_t>(at + size));
      at += size;
    }
    return detail::MakeShards(dataset, assignment, seed);
  }

  if (!(alpha > 0.0)) throw DomainError("dirichlet alpha must be > 0");
  std::size_t num_classes = 0;
  for (double y : dataset.targets) {
    if (y < 0.0 || y != std::floor(y)) {
      throw StructuralError("dirichlet partitioning needs class-index targets");
    }
    num_classes = std::max(num_classes, static_cast<std::size_t>(y) + 1);
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i : order) {
    by_class[static_cast<std::size_t>(dataset.targets[i])].push_back(i);
  }
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (auto& a : assignment) a.clear();
    for (const auto& rows : by_class) {
      std::vector<double> share(clients);
      double total = 0.0;
      for (double& s : share) total += (s = rng.NextGamma(alpha));
      std::size_t at = 0;
      double cumulative = 0.0;
      for (std::size_t k = 0; k < clients; ++k) {
        cumulative += share[k] / total;
        const std::size_t end =
            k + 1 == clients
                ? rows.size()
                : std::min(rows.size(),
                           static_cast<std::size_t>(std::floor(
                               cumulative * static_cast<double>(rows.size()))));
        for (; at < end; ++at) assignment[k].push_back(rows[at]);
      }
    }
    const bool all_filled =
        std::all_of(assignment.begin(), assignment.end(),
                    [](const auto& a) { return !a.empty(); });
    if (all_filled) return detail::MakeShards(dataset, assignment, seed);
  }
  throw StructuralError("dirichlet partition left a client empty after " +
                        std::to_string(kMaxAttempts) + " attempts");
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // 0 for regression models
};

inline EvalResult Evaluate(const ModelSpec& spec, const ParameterVector& params,
                           const SampleBatch& test_set) {
  if (test_set.size() == 0) throw StructuralError("empty test set");
  const ForwardResult fwd = Forward(spec, params, test_set);
  EvalResult r;
  for (double l : fwd.losses) r.loss += l;
  r.loss /= static_cast<double>(test_set.size());
  if (spec.is_classifier()) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      if (ArgMax(fwd.predictions.row(i)) ==
          static_cast<std::size_t>(test_set.targets[i])) {
        ++correct;
      }
    }
    r.accuracy =
        static_cast<double>(correct) / static_cast<double>(test_set.size());
  }
  return r;
}

struct LocalTraining {
  DpConfig dp;
  SamplerMode sampler = SamplerMode::kTls;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  TauUnit tau_unit = TauUnit::kSteps;
};

// Batch size actually used on a shard of n rows.
inline std::size_t EffectiveBatch(std::size_t batch_size, std::size_t n) {
  return std::min(batch_size, n);
}

// E epochs of private steps over the trainable coordinates of a copy of w_t.
inline MaskedUpdate RunLocal(const ModelSpec& spec, const ClientShard& client,
                             const ParameterVector& w_t,
                             const PartitionMask& mask,
                             const LocalTraining& local, std::uint32_t round) {
  if (local.epochs < 1) {
    throw StructuralError("local training needs at least one epoch");
  }
  if (client.n_k == 0 || client.data.size() != client.n_k) {
    throw StructuralError("client " + std::to_string(client.client_id) +
                          " has an inconsistent shard");
  }
  local.dp.Validate();
  CheckAligned(w_t, mask, "local training");
  ParameterVector w = w_t;
  AdamMoments moments;
  std::size_t steps = 0;
  SamplerPlan plan{local.sampler, EffectiveBatch(local.batch_size, client.n_k),
                   client.n_k, 0};
  for (std::size_t epoch = 1; epoch <= local.epochs; ++epoch) {
    plan.seed = StreamKey({client.rng_seed, round, epoch, 0x5a3b1e});
    const auto batches = EpochPlan(plan);
    for (std::size_t m = 0; m < batches.size(); ++m) {
      if (batches[m].empty()) continue;
      const SampleBatch batch = client.data.Select(batches[m]);
      const Matrix grads = PerSampleGradients(spec, w, batch);
      const Matrix clipped =
          ClipPerSample(GatherMasked(grads, mask), local.dp.clip_norm);
      const std::vector<double> noisy = NoisyMean(
          clipped, local.dp.noise_multiplier, local.dp.clip_norm,
          StreamKey({client.rng_seed, round, epoch, m}),
          local.dp.noise_placement);
      ++steps;
      w = DpStep(w, mask, noisy, local.dp, steps, moments);
      for (std::size_t i : mask.indices) {
        if (!std::isfinite(w.values[i])) {
          throw NumericError("client " + std::to_string(client.client_id) +
                             " diverged in round " + std::to_string(round) +
                             ", epoch " + std::to_string(epoch));
        }
      }
    }
  }
  const std::size_t tau =
      local.tau_unit == TauUnit::kSteps ? steps : local.epochs;
  return ExtractMaskedUpdate(w, w_t, mask, client.client_id, round, tau,
                             client.n_k);
}

struct ExperimentResult {
  std::vector<RoundRecord> records;
  ParameterVector final_params;
  ParameterVector initial_params;
  PartitionMask mask;
  double sigma = 0.0;
  std::optional<std::string> error;  // set when the run aborted early
};

// Noise multiplier that meets the target epsilon for the client with the
// largest sampling ratio if it took part in every round.
inline double ResolveSigma(const ExperimentConfig& cfg,
                           std::size_t smallest_shard) {
  if (!cfg.target_epsilon) return cfg.dp.noise_multiplier;
  const std::size_t b = EffectiveBatch(cfg.batch_size, smallest_shard);
  const double q =
      static_cast<double>(b) / static_cast<double>(smallest_shard);
  return SigmaForTarget(q, cfg.rounds * cfg.local_epochs, cfg.delta,
                        *cfg.target_epsilon);
}

struct DataSplit {
  SampleBatch public_data;
  SampleBatch private_data;
};

// The public prefix of a seeded permutation is used for non-private
// pretraining; the rest is distributed to clients.
inline DataSplit SplitPublic(const SampleBatch& dataset,
                             const ExperimentConfig& cfg) {
  if (cfg.pretrain.epochs == 0 || cfg.pretrain.public_fraction == 0.0) {
    return {SampleBatch{}, dataset};
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(StreamKey({cfg.seeds.data, 0x9ab11c}));
  rng.Shuffle(std::span<std::size_t>(order));
  const auto n_public = static_cast<std::size_t>(
      std::floor(cfg.pretrain.public_fraction *
                 static_cast<double>(dataset.size())));
  std::vector<std::size_t> pub(order.begin(),
                               order.begin() + static_cast<std::ptrdiff_t>(n_public));
  std::vector<std::size_t> priv(order.begin() + static_cast<std::ptrdiff_t>(n_public),
                                order.end());
  std::sort(pub.begin(), pub.end());
  std::sort(priv.begin(), priv.end());
  return {dataset.Select(pub), dataset.Select(priv)};
}

inline ParameterVector InitialModel(const ExperimentConfig& cfg,
                                    const SampleBatch& public_data) {
  if (cfg.pretrain.epochs == 0 || public_data.size() == 0) {
    return InitializeParameters(cfg.model, cfg.seeds.global);
  }
  return Pretrain(cfg.model, public_data, cfg.pretrain.epochs, cfg.pretrain.lr,
                  cfg.seeds.global);
}

// Ascending ids of the clients drawn without replacement for `round`.
inline std::vector<std::uint32_t> SelectClients(const ExperimentConfig& cfg,
                                                std::size_t round) {
  std::vector<std::uint32_t> ids(cfg.clients);
  std::iota(ids.begin(), ids.end(), std::uint32_t{0});
  const std::size_t m = cfg.SelectedPerRound();
  if (m < cfg.clients) {
    CounterRng rng(StreamKey({cfg.seeds.global, round, 0x5e1ec7}));
    rng.Shuffle(std::span<std::uint32_t>(ids));
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

namespace detail {

inline std::vector<MaskedUpdate> RunClients(
    const ExperimentConfig& cfg, const std::vector<ClientShard>& shards,
    std::span<const std::uint32_t> selected, const ParameterVector& w_t,
    const PartitionMask& mask, const LocalTraining& local,
    std::uint32_t round) {
  std::vector<MaskedUpdate> updates(selected.size());
  std::vector<std::exception_ptr> errors(selected.size());
  auto work = [&](std::size_t slot) {
    try {
      updates[slot] = RunLocal(cfg.model, shards[selected[slot]], w_t, mask,
                               local, round);
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(cfg.threads, selected.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < selected.size(); ++s) work(s);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < selected.size(); s += workers) work(s);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return updates;
}

}  // namespace detail

// Largest per-client epsilon so far; +inf once a noiseless client has
// trained.
inline double EpsilonToDate(const ExperimentConfig& cfg, double sigma,
                            const std::vector<ClientShard>& shards,
                            const std::vector<std::size_t>& participations) {
  double eps = 0.0;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (participations[k] == 0) continue;
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    const std::size_t b = EffectiveBatch(cfg.batch_size, shards[k].n_k);
    PrivacyParams p;
    p.q = static_cast<double>(b) / static_cast<double>(shards[k].n_k);
    p.sigma = sigma;
    p.epochs = participations[k] * cfg.local_epochs;
    p.delta = cfg.delta;
    p.clip_norm = cfg.dp.clip_norm;
    eps = std::max(eps, EpsilonOf(p));
  }
  return eps;
}

// Receives each round's client updates before aggregation.
using UpdateObserver = std::function<void(std::span<const MaskedUpdate>)>;

inline ExperimentResult RunExperiment(const ExperimentConfig& cfg,
                                      const SampleBatch& dataset,
                                      const SampleBatch& test_set,
                                      const UpdateObserver& observer = {}) {
  ValidateExperiment(cfg);
  CheckBatch(cfg.model, dataset);
  CheckBatch(cfg.model, test_set);
  const DataSplit split = SplitPublic(dataset, cfg);
  const std::vector<ClientShard> shards =
      PartitionData(split.private_data, cfg.clients, cfg.partition,
                    cfg.dirichlet_alpha, cfg.seeds.data);
  std::size_t smallest = shards.front().n_k;
  for (const auto& s : shards) smallest = std::min(smallest, s.n_k);

  ExperimentResult result;
  result.mask = MaskFor(cfg);
  result.sigma = ResolveSigma(cfg, smallest);
  result.initial_params = InitialModel(cfg, split.public_data);
  result.final_params = result.initial_params;

  LocalTraining local{cfg.dp, cfg.sampler, cfg.batch_size, cfg.local_epochs,
                      cfg.tau_unit};
  local.dp.noise_multiplier = result.sigma;

  CommModel comm = cfg.comm;
  if (comm.full_model_bytes == 0) {
    comm.full_model_bytes = DenseModelBytes(result.mask.total_count());
  }
  const std::uint64_t bytes_up = TrafficPerRound(result.mask, comm, cfg.encoding);
  const std::uint64_t bytes_down =
      cfg.masked_broadcast
          ? bytes_up
          : TrafficPerRound(FullMask(result.mask.layout), comm, Encoding::kDenseF32);

  std::vector<std::size_t> participations(cfg.clients, 0);
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto round = static_cast<std::uint32_t>(t);
    const std::vector<std::uint32_t> selected = SelectClients(cfg, t);
    try {
      const std::vector<MaskedUpdate> updates = detail::RunClients(
          cfg, shards, selected, result.final_params, result.mask, local, round);
      if (observer) observer(updates);
      result.final_params =
          Aggregate(result.final_params, updates, result.mask, cfg.aggregation);
      for (std::uint32_t id : selected) ++participations[id];
      const EvalResult eval = Evaluate(cfg.model, result.final_params, test_set);

      RoundRecord r;
      r.round = t + 1;
      r.global_loss = eval.loss;
      r.global_accuracy = eval.accuracy;
      r.epsilon_to_date = EpsilonToDate(cfg, result.sigma, shards, participations);
      r.bytes_up_per_client = bytes_up;
      r.bytes_down_per_client = bytes_down;
      r.modeled_delay_s = DelaySeconds(bytes_up, comm);
      r.participants = selected.size();
      if (cfg.wall_clock) {
        r.wall_time_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      }
      result.records.push_back(r);
    } catch (const NumericError& e) {
      result.error = "round " + std::to_string(t + 1) + ": " + e.what();
      break;
    }
  }
  return result;
}

// Single-party DP training: one client holding all private data, with no
// communication accounted.
inline ExperimentResult RunCentralized(ExperimentConfig cfg,
                                       const SampleBatch& dataset,
                                       const SampleBatch& test_set) {
  cfg.clients = 1;
  cfg.participation = 1.0;
  ExperimentResult r = RunExperiment(cfg, dataset, test_set);
  for (auto& rec : r.records) {
    rec.bytes_up_per_client = 0;
    rec.bytes_down_per_client = 0;
    rec.modeled_delay_s = 0.0;
  }
  return r;
}

}  // namespace feddp

#endif  // FEDDP_ORCHESTRATOR_HPP_
