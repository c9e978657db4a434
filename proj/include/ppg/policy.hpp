#pragma once

#include <string>

#include "ppg/core.hpp"
#include "ppg/rng.hpp"
#include "ppg/types.hpp"

namespace ppg {

// Maps (context, history, action) to a feature vector of fixed dimension.
// Built-ins: tabular, a one-hot over (step, last-observation bucket, action);
// concat, context features followed by an action one-hot and an observation
// one-hot. Bucket 0 stands for "no observation yet".
class FeatureMap {
 public:
  static FeatureMap tabular(int horizon, int num_observations, int num_actions);
  static FeatureMap concat(int context_dim, int num_observations, int num_actions);
  static FeatureMap from_json(const std::string& name, int horizon, int context_dim,
                              int num_observations, int num_actions);

  int dimension() const { return dimension_; }
  int num_actions() const { return num_actions_; }
  const std::string& name() const { return name_; }
  int horizon() const { return horizon_; }
  int context_dim() const { return context_dim_; }
  int num_observations() const { return num_observations_; }

  VectorX features(const Context& context, const History& history, int action) const;

  // Column a holds features(context, history, a).
  MatrixX feature_matrix(const Context& context, const History& history) const;

  // Per-coordinate bound on |phi(a) - sum_a' p(a') phi(a')| over probability
  // vectors p. Context and observation blocks cancel in that difference, so
  // only the action-varying one-hot block contributes.
  Scalar score_bound() const { return 1.0; }

 private:
  enum class Kind { Tabular, Concat };

  FeatureMap() = default;

  Kind kind_ = Kind::Tabular;
  std::string name_;
  int dimension_ = 0;
  int num_actions_ = 0;
  int horizon_ = 0;           // tabular only
  int context_dim_ = 0;       // concat only
  int num_observations_ = 0;
};

// Softmax policy with logits <theta, phi(context, history, a)>.
struct LogLinearPolicy {
  VectorX theta;
  FeatureMap feature_map;

  LogLinearPolicy(VectorX theta_in, FeatureMap map);

  int dimension() const { return feature_map.dimension(); }

  static LogLinearPolicy zeros(FeatureMap map);
  static LogLinearPolicy gaussian(FeatureMap map, Scalar scale, Rng& rng);
};

VectorX action_probs(const LogLinearPolicy& policy, const Context& context,
                     const History& history);

// log pi(action | context, history), via log-sum-exp against the max logit.
Scalar log_prob(const LogLinearPolicy& policy, const Context& context, const History& history,
                int action);

// phi(a) - sum_a' pi(a') phi(a'); the score vector of the softmax.
VectorX grad_log_prob(const LogLinearPolicy& policy, const Context& context,
                      const History& history, int action);

int sample_action(const LogLinearPolicy& policy, const Context& context, const History& history,
                  Rng& rng);

// Checkpoint JSON: {"feature_map": {"name": .., "params": {..}}, "d": .., "theta": [..]}.
void save_policy(const std::string& path, const LogLinearPolicy& policy);
LogLinearPolicy load_policy(const std::string& path);

}  // namespace ppg
