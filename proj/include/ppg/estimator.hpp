#pragma once

#include <string>
#include <vector>

#include "ppg/core.hpp"
#include "ppg/credit.hpp"
#include "ppg/env.hpp"
#include "ppg/policy.hpp"
#include "ppg/types.hpp"

namespace ppg {

inline constexpr Scalar kDefaultEpsilonStd = 1e-8;

// Moments of the pooled credited sums within one trajectory group.
struct GroupStats {
  std::string key;
  Scalar mean = 0.0;
  Scalar std = 0.0;  // population
  int count = 0;     // pooled (trajectory, step) values
};

// Credited sums w_{i,t} = sum over the scheme's reward indices of r_{i,l},
// as a B x n matrix.
MatrixX credited_weights(const Batch& batch, const CreditScheme& scheme);

// Credited sums standardized per group, pooled jointly over trajectories and
// steps. Groups whose population std falls below epsilon_std yield all zeros.
MatrixX group_advantages(const Batch& batch, const CreditScheme& scheme,
                         Scalar epsilon_std = kDefaultEpsilonStd,
                         std::vector<GroupStats>* stats = nullptr);

GradientEstimate empirical_ppg(const Batch& batch, const LogLinearPolicy& policy,
                               const CreditScheme& scheme, int num_threads = 1);

// Classic estimator. Coincides coordinatewise with empirical_ppg under the
// full scheme; weighting by the total reward instead would add only terms
// with zero expectation.
GradientEstimate empirical_pg(const Batch& batch, const LogLinearPolicy& policy,
                              int num_threads = 1);

// Same arithmetic on a logged batch, optionally with advantage weights. No
// propensity correction is applied.
GradientEstimate offline_ppg(const Batch& batch, const LogLinearPolicy& policy,
                             const CreditScheme& scheme, bool use_advantage,
                             Scalar epsilon_std = kDefaultEpsilonStd, int num_threads = 1);

// Exact expectation of the credited-score sum by full enumeration. With
// sampling_policy set, trajectories follow that policy's law while the scores
// stay those of `policy`.
VectorX exact_gradient(const EnvSpec& env, const LogLinearPolicy& policy,
                       const CreditScheme& scheme,
                       const LogLinearPolicy* sampling_policy = nullptr,
                       long max_total = kEnumerationCap, bool monotonize = false);

// The same expectation assembled per reward step: enumerate the conditioning
// prefix before the earliest credited action, then the credited continuation,
// differentiating only the continuation's log-probabilities. Requires every
// action-index set to be a contiguous block ending at its own step, which
// holds for all built-in schemes.
VectorX stepwise_conditional_gradient(const EnvSpec& env, const LogLinearPolicy& policy,
                                      const CreditScheme& scheme);

}  // namespace ppg
