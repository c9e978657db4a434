#include "ppg/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "ppg/parallel.hpp"

namespace ppg {

namespace {

// sum_t weights[t-1] * grad log pi(a_t | context, tau_{t-1}).
VectorX weighted_score_sum(const Trajectory& traj, const LogLinearPolicy& policy,
                           const VectorX& weights) {
  VectorX acc = VectorX::Zero(policy.dimension());
  History history;
  history.reserve(traj.steps.size());
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const Step& step = traj.steps[t];
    if (weights[static_cast<Eigen::Index>(t)] != 0.0) {
      acc += weights[static_cast<Eigen::Index>(t)] *
             grad_log_prob(policy, traj.context, history, step.action);
    }
    history.push_back(ActionObs{step.action, step.observation});
  }
  return acc;
}

GradientEstimate weighted_estimate(const Batch& batch, const LogLinearPolicy& policy,
                                   const MatrixX& weights, std::string label, int num_threads) {
  const int B = batch.size();
  std::vector<VectorX> partial(static_cast<std::size_t>(B));
  parallel_for(B, num_threads, [&](int i) {
    const VectorX row = weights.row(i).transpose();
    partial[static_cast<std::size_t>(i)] = weighted_score_sum(batch[i], policy, row);
  });
  VectorX sum = VectorX::Zero(policy.dimension());
  for (int i = 0; i < B; ++i) sum += partial[static_cast<std::size_t>(i)];
  sum /= static_cast<Scalar>(B);
  GradientEstimate estimate;
  estimate.values = std::move(sum);
  estimate.scheme_label = std::move(label);
  estimate.batch_size = B;
  return estimate;
}

}  // namespace

MatrixX credited_weights(const Batch& batch, const CreditScheme& scheme) {
  const int B = batch.size();
  const int n = batch.horizon();
  const auto sets = scheme.reward_sets(n);
  MatrixX weights(B, n);
  for (int i = 0; i < B; ++i) {
    const VectorX rewards = step_rewards(batch[i]);
    for (int t = 1; t <= n; ++t) {
      Scalar credited = 0.0;
      for (int l : sets[static_cast<std::size_t>(t - 1)]) credited += rewards[l - 1];
      weights(i, t - 1) = credited;
    }
  }
  return weights;
}

MatrixX group_advantages(const Batch& batch, const CreditScheme& scheme, Scalar epsilon_std,
                         std::vector<GroupStats>* stats) {
  const int B = batch.size();
  const int n = batch.horizon();
  const MatrixX weights = credited_weights(batch, scheme);
  std::map<std::string, std::vector<int>> groups;
  for (int i = 0; i < B; ++i) groups[batch[i].context.group_key].push_back(i);
  MatrixX out(B, n);
  if (stats) stats->clear();
  for (const auto& [key, rows] : groups) {
    const Scalar count = static_cast<Scalar>(rows.size()) * static_cast<Scalar>(n);
    Scalar mean = 0.0;
    for (int i : rows) mean += weights.row(i).sum();
    mean /= count;
    Scalar variance = 0.0;
    for (int i : rows) variance += (weights.row(i).array() - mean).square().sum();
    variance /= count;
    const Scalar std_dev = std::sqrt(variance);
    for (int i : rows) {
      if (std_dev < epsilon_std) {
        out.row(i).setZero();
      } else {
        out.row(i) = (weights.row(i).array() - mean) / std_dev;
      }
    }
    if (stats) {
      stats->push_back(GroupStats{key, mean, std_dev, static_cast<int>(rows.size()) * n});
    }
  }
  return out;
}

GradientEstimate empirical_ppg(const Batch& batch, const LogLinearPolicy& policy,
                               const CreditScheme& scheme, int num_threads) {
  return weighted_estimate(batch, policy, credited_weights(batch, scheme), scheme.label(),
                           num_threads);
}

GradientEstimate empirical_pg(const Batch& batch, const LogLinearPolicy& policy,
                              int num_threads) {
  return weighted_estimate(batch, policy, credited_weights(batch, CreditScheme::full()), "pg",
                           num_threads);
}

GradientEstimate offline_ppg(const Batch& batch, const LogLinearPolicy& policy,
                             const CreditScheme& scheme, bool use_advantage, Scalar epsilon_std,
                             int num_threads) {
  const MatrixX weights = use_advantage ? group_advantages(batch, scheme, epsilon_std)
                                        : credited_weights(batch, scheme);
  return weighted_estimate(batch, policy, weights, scheme.label(), num_threads);
}

VectorX exact_gradient(const EnvSpec& env, const LogLinearPolicy& policy,
                       const CreditScheme& scheme, const LogLinearPolicy* sampling_policy,
                       long max_total, bool monotonize) {
  const LogLinearPolicy& sampler = sampling_policy ? *sampling_policy : policy;
  const auto outcomes = enumerate_trajectories(env, sampler, max_total, monotonize);
  const int n = env.horizon;
  const auto sets = scheme.reward_sets(n);
  VectorX gradient = VectorX::Zero(policy.dimension());
  VectorX weights(n);
  for (const auto& [traj, prob] : outcomes) {
    const VectorX rewards = step_rewards(traj);
    for (int t = 1; t <= n; ++t) {
      Scalar credited = 0.0;
      for (int l : sets[static_cast<std::size_t>(t - 1)]) credited += rewards[l - 1];
      weights[t - 1] = credited;
    }
    gradient += prob * weighted_score_sum(traj, policy, weights);
  }
  return gradient;
}

namespace {

// All histories of the given length with their probabilities under the policy.
void enumerate_prefixes(const EnvSpec& env, const LogLinearPolicy& policy, const Context& context,
                        int length, History& history, Scalar prob,
                        std::vector<std::pair<History, Scalar>>& out) {
  if (static_cast<int>(history.size()) == length) {
    out.emplace_back(history, prob);
    return;
  }
  const VectorX action_p = action_probs(policy, context, history);
  for (int a = 0; a < env.num_actions; ++a) {
    if (action_p[a] <= 0.0) continue;
    const VectorX obs_p = env.transition(context, history, a);
    for (int y = 0; y < env.num_observations; ++y) {
      if (obs_p[y] <= 0.0) continue;
      history.push_back(ActionObs{a, y});
      enumerate_prefixes(env, policy, context, length, history, prob * action_p[a] * obs_p[y], out);
      history.pop_back();
    }
  }
}

// Continuation over steps first..target; only these steps contribute score
// terms, the prefix probability stays undifferentiated.
void accumulate_continuation(const EnvSpec& env, const LogLinearPolicy& policy,
                             const Context& context, int target, History& history,
                             Scalar cont_prob, const VectorX& score_sum, Scalar prefix_prob,
                             VectorX& gradient) {
  if (static_cast<int>(history.size()) == target) {
    History before(history.begin(), history.end() - 1);
    const Scalar reward =
        env.prefix_score(context, history) - env.prefix_score(context, before);
    gradient += prefix_prob * cont_prob * reward * score_sum;
    return;
  }
  const VectorX action_p = action_probs(policy, context, history);
  for (int a = 0; a < env.num_actions; ++a) {
    if (action_p[a] <= 0.0) continue;
    const VectorX score = score_sum + grad_log_prob(policy, context, history, a);
    const VectorX obs_p = env.transition(context, history, a);
    for (int y = 0; y < env.num_observations; ++y) {
      if (obs_p[y] <= 0.0) continue;
      history.push_back(ActionObs{a, y});
      accumulate_continuation(env, policy, context, target, history, cont_prob * action_p[a] * obs_p[y],
                              score, prefix_prob, gradient);
      history.pop_back();
    }
  }
}

}  // namespace

VectorX stepwise_conditional_gradient(const EnvSpec& env, const LogLinearPolicy& policy,
                                      const CreditScheme& scheme) {
  if (env.horizon > 4) throw ValidationError("stepwise oracle supports horizon <= 4");
  const int n = env.horizon;
  VectorX gradient = VectorX::Zero(policy.dimension());
  for (int t = 1; t <= n; ++t) {
    const auto action_set = scheme.action_indices(t, n);
    if (action_set.empty()) continue;
    const int first = action_set.front();
    if (action_set.back() != t ||
        static_cast<int>(action_set.size()) != t - first + 1) {
      throw ValidationError("stepwise oracle needs contiguous action-index sets ending at each step");
    }
    for (const auto& [context, q] : env.context_distribution) {
      if (q <= 0.0) continue;
      std::vector<std::pair<History, Scalar>> prefixes;
      History scratch;
      enumerate_prefixes(env, policy, context, first - 1, scratch, 1.0, prefixes);
      for (auto& [prefix, prefix_prob] : prefixes) {
        History history = prefix;
        accumulate_continuation(env, policy, context, t, history, 1.0,
                                VectorX::Zero(policy.dimension()), q * prefix_prob, gradient);
      }
    }
  }
  return gradient;
}

}  // namespace ppg
