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

// Closed-form (epsilon, delta) accounting for subsampled Gaussian DP-SGD:
//
//   epsilon = (q / sigma) * sqrt(2 * E * ln(1 / delta))
//
// with sampling ratio q = B / N, noise multiplier sigma and E the total
// number of epochs a client's data has been through (local epochs times the
// rounds it took part in).

#ifndef FEDDP_ACCOUNTANT_HPP_
#define FEDDP_ACCOUNTANT_HPP_

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "feddp/errors.hpp"

namespace feddp {

inline constexpr double kDefaultDelta = 1e-4;
inline constexpr const char* kAccountantFormula = "tls-sqrt-composition";

struct PrivacyParams {
  double q = 1.0;
  double sigma = 1.0;
  std::size_t epochs = 0;
  double delta = kDefaultDelta;
  double clip_norm = 1.0;  // reporting only
};

struct PrivacyReport {
  double epsilon = 0.0;
  double delta = kDefaultDelta;
  std::size_t per_round_epochs = 0;
  std::size_t rounds = 0;
  std::string formula = kAccountantFormula;
};

namespace detail {

inline void CheckQDelta(double q, double delta) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw DomainError("sampling ratio q must lie in (0, 1], got " +
                      std::to_string(q));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("delta must lie in (0, 1), got " + std::to_string(delta));
  }
}

// sqrt(2 E ln(1/delta)); shared by the forward and inverse maps so both use
// the same expression tree.
inline double CompositionRoot(std::size_t epochs, double delta) {
  return std::sqrt(2.0 * static_cast<double>(epochs) * std::log(1.0 / delta));
}

}  // namespace detail

inline double EpsilonOf(const PrivacyParams& p) {
  detail::CheckQDelta(p.q, p.delta);
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
    throw DomainError("noise multiplier must be > 0 for accounting");
  }
  return (p.q / p.sigma) * detail::CompositionRoot(p.epochs, p.delta);
}

// Inverse map. With zero epochs no noise is required and 0 is returned.
// Rounding is resolved upward: the returned sigma never accounts to more
// than the target.
inline double SigmaForTarget(double q, std::size_t epochs, double delta,
                             double target_epsilon) {
  detail::CheckQDelta(q, delta);
  if (!(target_epsilon > 0.0) || !std::isfinite(target_epsilon)) {
    throw DomainError("target epsilon must be > 0");
  }
  const double root = detail::CompositionRoot(epochs, delta);
  double sigma = q * root / target_epsilon;
  while (sigma > 0.0 && (q / sigma) * root > target_epsilon) {
    sigma = std::nextafter(sigma, std::numeric_limits<double>::infinity());
  }
  return sigma;
}

inline PrivacyReport ComposeRounds(const PrivacyParams& per_round,
                                   std::size_t rounds) {
  PrivacyParams total = per_round;
  total.epochs = rounds * per_round.epochs;
  PrivacyReport r;
  r.epsilon = EpsilonOf(total);
  r.delta = per_round.delta;
  r.per_round_epochs = per_round.epochs;
  r.rounds = rounds;
  return r;
}

}  // namespace feddp

#endif  // FEDDP_ACCOUNTANT_HPP_
