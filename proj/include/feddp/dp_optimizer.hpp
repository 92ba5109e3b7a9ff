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

// Client-side private optimization: per-sample clipping, Gaussian
// perturbation of the clipped mean, mini-batch sampling, and the masked
// parameter step.

#ifndef FEDDP_DP_OPTIMIZER_HPP_
#define FEDDP_DP_OPTIMIZER_HPP_

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/model.hpp"
#include "feddp/partition.hpp"
#include "feddp/rng.hpp"

namespace feddp {

enum class OptimizerKind { kSgd, kAdam };

// Where the N(0, sigma^2 C^2 I) draw enters. kAfterMean adds it to the
// averaged clipped gradient; kBeforeMean adds it to the clipped sum, so the
// mean sees noise of standard deviation sigma C / |B|.
enum class NoisePlacement { kAfterMean, kBeforeMean };

struct DpConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 1.0;
  double learning_rate = 0.05;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  NoisePlacement noise_placement = NoisePlacement::kAfterMean;

  void Validate() const {
    if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) {
      throw DomainError("clip norm must be a positive finite number");
    }
    if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
      throw DomainError("noise multiplier must be >= 0");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw DomainError("learning rate must be > 0");
    }
    if (optimizer == OptimizerKind::kAdam) {
      if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) ||
          !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw DomainError("adam decay rates must lie in (0, 1)");
      }
      if (!(adam_eps > 0.0)) throw DomainError("adam epsilon must be > 0");
    }
  }

  friend bool operator==(const DpConfig&, const DpConfig&) = default;
};

enum class SamplerMode { kTls, kPoisson };

inline std::string_view ToString(SamplerMode m) {
  return m == SamplerMode::kTls ? "tls" : "poisson";
}

struct SamplerPlan {
  SamplerMode mode = SamplerMode::kTls;
  std::size_t batch_size = 1;
  std::size_t dataset_size = 1;
  std::uint64_t seed = 0;

  double q() const {
    return static_cast<double>(batch_size) / static_cast<double>(dataset_size);
  }

  void Validate() const {
    if (batch_size == 0) throw StructuralError("batch size must be >= 1");
    if (dataset_size == 0) throw StructuralError("dataset size must be >= 1");
    if (batch_size > dataset_size) {
      throw StructuralError("batch size " + std::to_string(batch_size) +
                            " exceeds dataset size " +
                            std::to_string(dataset_size));
    }
  }
};

// Rows whose norm exceeds C by less than this relative slack are treated as
// already clipped. Rescaled rows can land a few ulps above C; the slack makes
// clipping idempotent.
inline constexpr double kClipSlack = 1e-12;

// g_i / max(1, ||g_i|| / C) for every row.
inline Matrix ClipPerSample(const Matrix& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw DomainError("clip norm must be > 0");
  Matrix out = grads;
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto row = out.row(i);
    double sq = 0.0;
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite gradient in sample " + std::to_string(i));
      }
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm * (1.0 + kClipSlack)) {
      const double scale = norm / clip_norm;
      for (double& v : row) v /= scale;
    }
  }
  return out;
}

inline std::uint64_t NoiseStreamKey(std::uint64_t noise_seed) {
  return StreamKey({noise_seed, 0x6e6f697365ULL});
}

// Clipped mean plus N(0, sigma^2 C^2 I), drawn from the stream keyed by
// `noise_seed`. sigma = 0 returns the exact mean.
inline std::vector<double> NoisyMean(
    const Matrix& clipped, double sigma, double clip_norm,
    std::uint64_t noise_seed,
    NoisePlacement placement = NoisePlacement::kAfterMean) {
  if (clipped.rows == 0) throw StructuralError("noisy mean of an empty batch");
  if (!(sigma >= 0.0)) throw DomainError("noise multiplier must be >= 0");
  const double n = static_cast<double>(clipped.rows);
  std::vector<double> mean(clipped.cols, 0.0);
  for (std::size_t i = 0; i < clipped.rows; ++i) {
    for (std::size_t j = 0; j < clipped.cols; ++j) mean[j] += clipped(i, j);
  }
  for (double& m : mean) m /= n;
  if (sigma == 0.0) return mean;
  const double stddev = placement == NoisePlacement::kAfterMean
                            ? sigma * clip_norm
                            : sigma * clip_norm / n;
  CounterRng rng(NoiseStreamKey(noise_seed));
  for (double& m : mean) m += stddev * rng.NextGaussian();
  return mean;
}

// One epoch of sampling without replacement: a seeded shuffle of 0..N-1 cut
// into consecutive batches of B. The final batch keeps the remainder.
inline std::vector<std::vector<std::size_t>> TlsEpochPlan(
    const SamplerPlan& plan) {
  plan.Validate();
  std::vector<std::size_t> order(plan.dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(StreamKey({plan.seed, 0x7115}));
  rng.Shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
    const std::size_t end = std::min(order.size(), start + plan.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// ceil(N / B) independent Poisson draws with rate q = B / N. Batches may be
// empty or repeat samples across steps.
inline std::vector<std::vector<std::size_t>> PoissonEpochPlan(
    const SamplerPlan& plan) {
  plan.Validate();
  const double q = plan.q();
  const std::size_t steps =
      (plan.dataset_size + plan.batch_size - 1) / plan.batch_size;
  CounterRng rng(StreamKey({plan.seed, 0x9015}));
  std::vector<std::vector<std::size_t>> batches(steps);
  for (auto& batch : batches) {
    for (std::size_t i = 0; i < plan.dataset_size; ++i) {
      if (rng.NextUniform() < q) batch.push_back(i);
    }
  }
  return batches;
}

inline std::vector<std::vector<std::size_t>> EpochPlan(const SamplerPlan& plan) {
  return plan.mode == SamplerMode::kTls ? TlsEpochPlan(plan)
                                        : PoissonEpochPlan(plan);
}

// First and second moment buffers over the trainable coordinates, owned by a
// single client's training loop.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

// theta <- theta - lr * u on masked coordinates; every other coordinate is
// copied through untouched. `grad` is indexed by mask order. For adam,
// step_index counts from 1.
inline ParameterVector DpStep(const ParameterVector& params,
                              const PartitionMask& mask,
                              std::span<const double> grad, const DpConfig& cfg,
                              std::size_t step_index, AdamMoments& moments) {
  if (grad.size() != mask.trainable_count()) {
    throw StructuralError("gradient length " + std::to_string(grad.size()) +
                          " does not match mask popcount " +
                          std::to_string(mask.trainable_count()));
  }
  CheckAligned(params, mask, "dp step");
  ParameterVector out = params;
  const double lr = cfg.learning_rate;
  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < grad.size(); ++k) {
      out.values[mask.indices[k]] -= lr * grad[k];
    }
    return out;
  }
  if (step_index == 0) {
    throw DomainError("adam step index starts at 1");
  }
  if (moments.first.empty()) {
    moments.first.assign(grad.size(), 0.0);
    moments.second.assign(grad.size(), 0.0);
  }
  if (moments.first.size() != grad.size()) {
    throw StructuralError("adam moments do not match the mask");
  }
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double t = static_cast<double>(step_index);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    moments.first[k] = b1 * moments.first[k] + (1.0 - b1) * grad[k];
    moments.second[k] = b2 * moments.second[k] + (1.0 - b2) * grad[k] * grad[k];
    const double m_hat = moments.first[k] / c1;
    const double v_hat = moments.second[k] / c2;
    out.values[mask.indices[k]] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
  return out;
}

inline ParameterVector DpStep(const ParameterVector& params,
                              const PartitionMask& mask,
                              std::span<const double> grad, const DpConfig& cfg,
                              std::size_t step_index) {
  if (cfg.optimizer != OptimizerKind::kSgd) {
    throw StructuralError("adam steps require a moment buffer");
  }
  AdamMoments unused;
  return DpStep(params, mask, grad, cfg, step_index, unused);
}

// Columns of `grads` at the mask's trainable coordinates.
inline Matrix GatherMasked(const Matrix& grads, const PartitionMask& mask) {
  Matrix out(grads.rows, mask.trainable_count());
  for (std::size_t i = 0; i < grads.rows; ++i) {
    for (std::size_t k = 0; k < mask.trainable_count(); ++k) {
      out(i, k) = grads(i, mask.indices[k]);
    }
  }
  return out;
}

}  // namespace feddp

#endif  // FEDDP_DP_OPTIMIZER_HPP_
