#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ppg/core.hpp"
#include "ppg/policy.hpp"
#include "ppg/rng.hpp"
#include "ppg/types.hpp"

namespace ppg {

inline constexpr long kEnumerationCap = 1L << 20;

// A finite episodic environment: context distribution q, observation rule
// p(y_t | x, tau_{t-1}, a_t), and a prefix score f(x, tau_t) from which all
// per-step rewards are telescoped. Dynamics never depend on the policy.
struct EnvSpec {
  std::string name;
  int num_actions = 2;
  int num_observations = 1;
  int horizon = 1;
  std::vector<std::pair<Context, Scalar>> context_distribution;
  std::function<VectorX(const Context&, const History&, int action)> transition;
  std::function<Scalar(const Context&, const History&)> prefix_score;  // f(x, tau_0) = 0
  // Known bounds used by the concentration study and acceptance margins.
  Scalar max_abs_step_reward = 0.0;
  Scalar min_total_reward = 0.0;
  Scalar max_total_reward = 0.0;

  void validate() const;
};

struct EnvState {
  Context context;
  History history;
};

EnvState reset(const EnvSpec& env, Rng& rng);

std::pair<int, EnvState> env_step(const EnvSpec& env, const EnvState& state, int action,
                                  Rng& rng);

// f(x, tau_t) evaluated on the first t pairs of history.
Scalar prefix_reward(const EnvSpec& env, const Context& context, const History& history, int t);

// One full episode under the policy; per-step rewards telescoped from
// prefix_score, through a running max first when monotonize is set.
Trajectory rollout(const EnvSpec& env, const LogLinearPolicy& policy, Rng& rng,
                   bool monotonize = false);

// Every nonzero-probability trajectory with its probability. Throws
// "enumeration cap exceeded" when the reachable support passes max_total.
std::vector<std::pair<Trajectory, Scalar>> enumerate_trajectories(
    const EnvSpec& env, const LogLinearPolicy& policy, long max_total = kEnumerationCap,
    bool monotonize = false);

// Built-ins. micro-coin: one context hides a bit string, actions guess bits,
// each match scores 1. persona-drift: contexts are binary-attribute personas,
// a shuffled round-robin schedule probes attributes, assertions score 1 only
// while consistent with the persona and all earlier assertions. bandit-chain:
// independent per-step bandits with a rotating correct arm.
EnvSpec make_micro_coin(int horizon, const std::string& bits = "10");
EnvSpec make_persona_drift(int num_attributes, int horizon, int num_personas = 1,
                           std::uint64_t probe_seed = 0);
EnvSpec make_bandit_chain(int horizon, int num_actions = 3);

// Deterministic pieces of persona-drift, exposed so tests can construct
// histories with known scores.
std::vector<int> persona_probe_order(int num_attributes, std::uint64_t probe_seed);
std::vector<int> persona_bits(std::uint64_t persona_index, int num_attributes);

}  // namespace ppg
