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

// Server-side aggregation: w_{t+1} = w_t + sum_k p_k A(delta_k), with p_k
// normalized over the participating clients and A the identity (FedAvg) or
// division by the local step count (FedNova).

#ifndef FEDDP_AGGREGATION_HPP_
#define FEDDP_AGGREGATION_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/model.hpp"
#include "feddp/partition.hpp"

namespace feddp {

enum class AggregationOp { kFedAvg, kFedNova };

inline std::string_view ToString(AggregationOp op) {
  return op == AggregationOp::kFedAvg ? "fedavg" : "fednova";
}

struct ClientWeight {
  std::uint32_t client_id = 0;
  double p = 0.0;
};

struct SampleCount {
  std::uint32_t client_id = 0;
  std::size_t n = 0;
};

inline std::vector<ClientWeight> ComputeWeights(
    std::span<const SampleCount> counts) {
  if (counts.empty()) throw StructuralError("no clients to weight");
  std::size_t total = 0;
  for (const auto& c : counts) {
    if (c.n == 0) {
      throw DomainError("client " + std::to_string(c.client_id) +
                        " has no samples and cannot participate");
    }
    total += c.n;
  }
  std::vector<ClientWeight> w;
  w.reserve(counts.size());
  for (const auto& c : counts) {
    w.push_back({c.client_id,
                 static_cast<double>(c.n) / static_cast<double>(total)});
  }
  return w;
}

inline ParameterVector Aggregate(const ParameterVector& w_t,
                                 std::span<const MaskedUpdate> updates,
                                 const PartitionMask& mask, AggregationOp op) {
  if (updates.empty()) throw StructuralError("aggregation over no updates");
  CheckAligned(w_t, mask, "aggregate");
  const std::uint32_t round = updates.front().round;
  std::vector<const MaskedUpdate*> ordered;
  for (const auto& u : updates) {
    if (u.round != round) {
      throw ProtocolError("updates from rounds " + std::to_string(round) +
                          " and " + std::to_string(u.round) +
                          " cannot be aggregated together");
    }
    if (op == AggregationOp::kFedNova && u.tau == 0) {
      throw DomainError("fednova requires tau >= 1 (client " +
                        std::to_string(u.client_id) + ")");
    }
    ValidateUpdate(u, mask);
    ordered.push_back(&u);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->client_id == ordered[i - 1]->client_id) {
      throw ProtocolError("duplicate update from client " +
                          std::to_string(ordered[i]->client_id));
    }
  }

  std::vector<SampleCount> counts;
  for (const auto* u : ordered) counts.push_back({u->client_id, u->n_k});
  const std::vector<ClientWeight> weights = ComputeWeights(counts);

  std::vector<double> acc(w_t.size(), 0.0);
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const double p = weights[k].p;
    const double tau = static_cast<double>(ordered[k]->tau);
    for (const auto& e : ordered[k]->entries) {
      const double transformed =
          op == AggregationOp::kFedNova ? e.delta / tau : e.delta;
      acc[e.index] += p * transformed;
    }
  }
  ParameterVector out = w_t;
  for (std::size_t i : mask.indices) out.values[i] = w_t.values[i] + acc[i];
  return out;
}

}  // namespace feddp

#endif  // FEDDP_AGGREGATION_HPP_
