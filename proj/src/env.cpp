#include "ppg/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ppg {

namespace {

constexpr Scalar kProbTol = 1e-12;

void validate_observation_probs(const EnvSpec& env, const VectorX& probs) {
  if (probs.size() != env.num_observations) {
    throw ValidationError("transition returned " + std::to_string(probs.size()) +
                          " probabilities, expected " + std::to_string(env.num_observations));
  }
  Scalar sum = 0.0;
  for (Eigen::Index y = 0; y < probs.size(); ++y) {
    if (!(probs[y] >= 0.0)) throw ValidationError("negative transition probability");
    sum += probs[y];
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    throw ValidationError("transition probabilities sum to " + std::to_string(sum));
  }
}

}  // namespace

void EnvSpec::validate() const {
  if (name.empty()) throw ValidationError("environment needs a name");
  if (num_actions < 2) throw ValidationError("environment needs at least 2 actions");
  if (num_observations < 1) throw ValidationError("environment needs at least 1 observation");
  if (horizon < 1) throw ValidationError("environment needs horizon >= 1");
  if (!transition || !prefix_score) throw ValidationError("environment rules not set");
  if (context_distribution.empty()) throw ValidationError("empty context distribution");
  Scalar sum = 0.0;
  for (const auto& [context, prob] : context_distribution) {
    if (!(prob >= 0.0)) throw ValidationError("negative context probability");
    if (context.group_key.empty()) throw ValidationError("context group_key must be non-empty");
    if (!context.features.allFinite()) throw ValidationError("non-finite context features");
    sum += prob;
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    throw ValidationError("context probabilities sum to " + std::to_string(sum));
  }
  for (std::size_t i = 0; i < context_distribution.size(); ++i) {
    for (std::size_t j = i + 1; j < context_distribution.size(); ++j) {
      if (context_distribution[i].first.id == context_distribution[j].first.id) {
        throw ValidationError("duplicate context id " +
                              std::to_string(context_distribution[i].first.id));
      }
    }
  }
  for (const auto& [context, prob] : context_distribution) {
    if (prefix_score(context, History{}) != 0.0) {
      throw ValidationError("prefix score at the empty history must be 0");
    }
  }
  if (!(max_abs_step_reward >= 0.0) || !std::isfinite(max_abs_step_reward)) {
    throw ValidationError("max_abs_step_reward must be finite and nonnegative");
  }
  if (min_total_reward > max_total_reward) throw ValidationError("reward range is inverted");
}

EnvState reset(const EnvSpec& env, Rng& rng) {
  std::vector<Scalar> probs;
  probs.reserve(env.context_distribution.size());
  for (const auto& [context, prob] : env.context_distribution) probs.push_back(prob);
  const int k = rng.categorical(probs);
  return EnvState{env.context_distribution[static_cast<std::size_t>(k)].first, History{}};
}

std::pair<int, EnvState> env_step(const EnvSpec& env, const EnvState& state, int action,
                                  Rng& rng) {
  if (static_cast<int>(state.history.size()) >= env.horizon) {
    throw ValidationError("episode complete");
  }
  if (action < 0 || action >= env.num_actions) {
    throw ValidationError("action " + std::to_string(action) + " outside alphabet of size " +
                          std::to_string(env.num_actions));
  }
  const VectorX probs = env.transition(state.context, state.history, action);
  validate_observation_probs(env, probs);
  const int observation =
      rng.categorical(std::span<const Scalar>(probs.data(), static_cast<std::size_t>(probs.size())));
  EnvState next = state;
  next.history.push_back(ActionObs{action, observation});
  return {observation, std::move(next)};
}

Scalar prefix_reward(const EnvSpec& env, const Context& context, const History& history, int t) {
  if (t < 0 || t > env.horizon || t > static_cast<int>(history.size())) {
    throw ValidationError("prefix index " + std::to_string(t) + " out of range");
  }
  const History prefix(history.begin(), history.begin() + t);
  return env.prefix_score(context, prefix);
}

Trajectory rollout(const EnvSpec& env, const LogLinearPolicy& policy, Rng& rng, bool monotonize) {
  EnvState state = reset(env, rng);
  Trajectory traj;
  traj.context = state.context;
  traj.steps.reserve(static_cast<std::size_t>(env.horizon));
  Scalar prev = 0.0;  // monotonize folds the running max into this
  for (int t = 1; t <= env.horizon; ++t) {
    const int action = sample_action(policy, state.context, state.history, rng);
    auto [observation, next] = env_step(env, state, action, rng);
    state = std::move(next);
    Scalar score = env.prefix_score(state.context, state.history);
    if (monotonize) score = std::max(prev, score);
    const Scalar reward = score - prev;
    prev = score;
    traj.steps.push_back(Step{action, observation, reward});
    traj.total_reward += reward;
  }
  return traj;
}

namespace {

struct Enumerator {
  const EnvSpec& env;
  const LogLinearPolicy& policy;
  long max_total;
  bool monotonize;
  std::vector<std::pair<Trajectory, Scalar>> out;

  void dfs(const Context& context, History& history, std::vector<Step>& steps, Scalar prob,
           Scalar prev_score) {
    const int t = static_cast<int>(history.size());
    if (t == env.horizon) {
      if (static_cast<long>(out.size()) >= max_total) {
        throw ValidationError("enumeration cap exceeded");
      }
      Trajectory traj;
      traj.context = context;
      traj.steps = steps;
      for (const Step& step : steps) traj.total_reward += step.reward;
      out.emplace_back(std::move(traj), prob);
      return;
    }
    const VectorX action_p = action_probs(policy, context, history);
    for (int a = 0; a < env.num_actions; ++a) {
      if (action_p[a] <= 0.0) continue;
      const VectorX obs_p = env.transition(context, history, a);
      validate_observation_probs(env, obs_p);
      for (int y = 0; y < env.num_observations; ++y) {
        if (obs_p[y] <= 0.0) continue;
        history.push_back(ActionObs{a, y});
        Scalar score = env.prefix_score(context, history);
        if (monotonize) score = std::max(prev_score, score);
        steps.push_back(Step{a, y, score - prev_score});
        dfs(context, history, steps, prob * action_p[a] * obs_p[y], score);
        steps.pop_back();
        history.pop_back();
      }
    }
  }
};

}  // namespace

std::vector<std::pair<Trajectory, Scalar>> enumerate_trajectories(const EnvSpec& env,
                                                                  const LogLinearPolicy& policy,
                                                                  long max_total,
                                                                  bool monotonize) {
  Enumerator enumerator{env, policy, max_total, monotonize, {}};
  History history;
  std::vector<Step> steps;
  for (const auto& [context, q] : env.context_distribution) {
    if (q <= 0.0) continue;
    enumerator.dfs(context, history, steps, q, 0.0);
  }
  return enumerator.out;
}

EnvSpec make_micro_coin(int horizon, const std::string& bits) {
  if (bits.empty()) throw ValidationError("micro-coin needs a nonempty bit string");
  std::vector<int> pattern;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ValidationError("micro-coin bits must be 0 or 1");
    pattern.push_back(c - '0');
  }
  EnvSpec env;
  env.name = "micro-coin";
  env.num_actions = 2;
  env.num_observations = 1;
  env.horizon = horizon;
  env.context_distribution = {{Context{}, 1.0}};
  env.transition = [](const Context&, const History&, int) { return VectorX::Ones(1); };
  env.prefix_score = [pattern](const Context&, const History& history) {
    Scalar score = 0.0;
    for (std::size_t l = 0; l < history.size(); ++l) {
      if (history[l].action == pattern[l % pattern.size()]) score += 1.0;
    }
    return score;
  };
  env.max_abs_step_reward = 1.0;
  env.min_total_reward = 0.0;
  env.max_total_reward = static_cast<Scalar>(horizon);
  env.validate();
  return env;
}

EnvSpec make_bandit_chain(int horizon, int num_actions) {
  EnvSpec env;
  env.name = "bandit-chain";
  env.num_actions = num_actions;
  env.num_observations = 1;
  env.horizon = horizon;
  env.context_distribution = {{Context{}, 1.0}};
  env.transition = [](const Context&, const History&, int) { return VectorX::Ones(1); };
  env.prefix_score = [num_actions](const Context&, const History& history) {
    Scalar score = 0.0;
    for (std::size_t l = 0; l < history.size(); ++l) {
      if (history[l].action == static_cast<int>(l) % num_actions) score += 1.0;
    }
    return score;
  };
  env.max_abs_step_reward = 1.0;
  env.min_total_reward = 0.0;
  env.max_total_reward = static_cast<Scalar>(horizon);
  env.validate();
  return env;
}

std::vector<int> persona_probe_order(int num_attributes, std::uint64_t probe_seed) {
  std::vector<int> order(static_cast<std::size_t>(num_attributes));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(probe_seed, {0x70726f6265ULL});
  for (int i = num_attributes - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

std::vector<int> persona_bits(std::uint64_t persona_index, int num_attributes) {
  const std::uint64_t word = mix64(persona_index + 1);
  std::vector<int> bits(static_cast<std::size_t>(num_attributes));
  for (int k = 0; k < num_attributes; ++k) bits[static_cast<std::size_t>(k)] = (word >> k) & 1;
  return bits;
}

EnvSpec make_persona_drift(int num_attributes, int horizon, int num_personas,
                           std::uint64_t probe_seed) {
  if (num_attributes < 1 || num_attributes > 6) {
    throw ValidationError("persona-drift supports 1..6 attributes");
  }
  if (horizon < 1 || horizon > 20) throw ValidationError("persona-drift supports horizon 1..20");
  if (num_personas < 1 || num_personas > (1 << num_attributes)) {
    throw ValidationError("num_personas outside 1..2^attributes");
  }
  const std::vector<int> order = persona_probe_order(num_attributes, probe_seed);
  // Attribute probed at step t (1-based); the observation after step t
  // announces the attribute probed at t + 1.
  auto attr_at = [order, num_attributes](int t) {
    return order[static_cast<std::size_t>((t - 1) % num_attributes)];
  };

  EnvSpec env;
  env.name = "persona-drift";
  env.num_actions = 2;
  env.num_observations = num_attributes;
  env.horizon = horizon;
  for (int p = 0; p < num_personas; ++p) {
    const std::vector<int> bits = persona_bits(static_cast<std::uint64_t>(p), num_attributes);
    Context context;
    context.id = static_cast<std::uint64_t>(p);
    context.features = VectorX(num_attributes);
    for (int k = 0; k < num_attributes; ++k) context.features[k] = static_cast<Scalar>(bits[k]);
    context.group_key = "persona-" + std::to_string(p);
    env.context_distribution.emplace_back(std::move(context),
                                          1.0 / static_cast<Scalar>(num_personas));
  }
  env.transition = [attr_at, num_attributes](const Context&, const History& history, int) {
    VectorX probs = VectorX::Zero(num_attributes);
    probs[attr_at(static_cast<int>(history.size()) + 2)] = 1.0;
    return probs;
  };
  // A step scores 1 when its assertion and every earlier assertion of the same
  // attribute equal the persona's value; one wrong assertion poisons the
  // attribute from then on.
  env.prefix_score = [attr_at](const Context& context, const History& history) {
    Scalar score = 0.0;
    for (int l = 1; l <= static_cast<int>(history.size()); ++l) {
      const int attr = attr_at(l);
      const int truth = static_cast<int>(context.features[attr]);
      bool consistent = true;
      for (int m = 1; m <= l; ++m) {
        if (attr_at(m) == attr && history[static_cast<std::size_t>(m - 1)].action != truth) {
          consistent = false;
          break;
        }
      }
      if (consistent) score += 1.0;
    }
    return score;
  };
  env.max_abs_step_reward = 1.0;
  env.min_total_reward = 0.0;
  env.max_total_reward = static_cast<Scalar>(horizon);
  env.validate();
  return env;
}

}  // namespace ppg
