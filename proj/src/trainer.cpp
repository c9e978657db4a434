#include "ppg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ppg/parallel.hpp"

namespace ppg {

namespace {

constexpr std::uint64_t kEvalTag = 0x6576616cULL;     // per-iteration value estimates
constexpr std::uint64_t kOfflineTag = 0x6f66666cULL;  // per-iteration index draws
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;  // per-epoch permutations

Scalar step_size(const TrainConfig& config, int iteration) {
  if (config.schedule == LearningRateSchedule::Constant) return config.learning_rate;
  return config.learning_rate / std::sqrt(static_cast<Scalar>(iteration));
}

std::pair<Scalar, Scalar> iteration_value(const EnvSpec* env, const LogLinearPolicy& policy,
                                          const TrainConfig& config, int iteration) {
  if (!env || config.value_eval == ValueEvalMode::None) {
    return {std::numeric_limits<Scalar>::quiet_NaN(), std::numeric_limits<Scalar>::quiet_NaN()};
  }
  return evaluate_value(*env, policy, config.value_eval, config.eval_rollouts,
                        derive_seed(config.seed, {kEvalTag, static_cast<std::uint64_t>(iteration)}),
                        config.num_threads);
}

// Shared ascent loop; gradient_fn produces the update direction for the
// current policy at iteration j.
template <typename GradientFn>
TrainResult ascend(const EnvSpec* eval_env, LogLinearPolicy policy, const TrainConfig& config,
                   GradientFn&& gradient_fn) {
  TrainHistory history;
  for (int j = 1; j <= config.max_iterations; ++j) {
    const VectorX gradient = gradient_fn(policy, j);
    const Scalar grad_norm = gradient.norm();
    const bool converged = grad_norm < config.convergence_tol;
    if (!converged) {
      policy.theta += step_size(config, j) * gradient;
      if (!policy.theta.allFinite()) {
        throw DivergenceError("divergence at iteration " + std::to_string(j), j);
      }
    }
    const auto [value, value_stderr] = iteration_value(eval_env, policy, config, j);
    history.rows.push_back(HistoryRow{j, grad_norm, value, value_stderr});
    if (converged) break;
  }
  return TrainResult{std::move(policy), std::move(history)};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(convergence_tol >= 0.0)) throw ValidationError("convergence_tol must be >= 0");
  if (!(epsilon_std >= 0.0)) throw ValidationError("epsilon_std must be >= 0");
  if (value_eval == ValueEvalMode::MonteCarlo && eval_rollouts < 1) {
    throw ValidationError("eval_rollouts must be >= 1");
  }
  if (num_threads < 1) throw ValidationError("num_threads must be >= 1");
  if (gradient_mode == GradientMode::Exact && use_advantage) {
    throw ValidationError("use_advantage requires sampled gradients");
  }
}

TrainResult train_online(const EnvSpec& env, const LogLinearPolicy& initial_policy,
                         const TrainConfig& config) {
  config.validate();
  if (initial_policy.feature_map.num_actions() != env.num_actions) {
    throw ValidationError("policy and environment disagree on the action count");
  }
  return ascend(&env, initial_policy, config, [&](const LogLinearPolicy& policy, int j) {
    if (config.gradient_mode == GradientMode::Exact) {
      return exact_gradient(env, policy, config.scheme, nullptr, kEnumerationCap,
                            config.monotonize);
    }
    std::vector<Trajectory> rolled(static_cast<std::size_t>(config.batch_size));
    parallel_for(config.batch_size, config.num_threads, [&](int i) {
      Rng rng = Rng::stream(config.seed,
                            {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i)});
      rolled[static_cast<std::size_t>(i)] = rollout(env, policy, rng, config.monotonize);
    });
    Batch batch = Batch::from_trajectories(std::move(rolled));
    return offline_ppg(batch, policy, config.scheme, config.use_advantage, config.epsilon_std,
                       config.num_threads)
        .values;
  });
}

TrainResult train_offline(const Batch& dataset, const LogLinearPolicy& initial_policy,
                          const TrainConfig& config, const EnvSpec* eval_env) {
  config.validate();
  if (config.gradient_mode == GradientMode::Exact) {
    throw ValidationError("offline training needs sampled gradients");
  }
  const int size = dataset.size();
  if (config.without_replacement && config.batch_size > size) {
    throw ValidationError("batch size exceeds dataset for without-replacement sampling");
  }
  std::vector<int> order(static_cast<std::size_t>(size));
  std::iota(order.begin(), order.end(), 0);
  int cursor = size;  // forces a shuffle before the first draw
  int epoch = 0;
  return ascend(eval_env, initial_policy, config, [&](const LogLinearPolicy& policy, int j) {
    std::vector<Trajectory> sampled;
    sampled.reserve(static_cast<std::size_t>(config.batch_size));
    if (config.without_replacement) {
      for (int i = 0; i < config.batch_size; ++i) {
        if (cursor >= size) {
          Rng rng = Rng::stream(config.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch++)});
          for (int k = size - 1; k > 0; --k) {
            const int m = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k) + 1));
            std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(m)]);
          }
          cursor = 0;
        }
        sampled.push_back(dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor++)])]);
      }
    } else {
      Rng rng = Rng::stream(config.seed, {kOfflineTag, static_cast<std::uint64_t>(j)});
      for (int i = 0; i < config.batch_size; ++i) {
        sampled.push_back(dataset[rng.uniform_below(static_cast<std::uint64_t>(size))]);
      }
    }
    Batch batch(std::move(sampled), dataset.horizon());
    return offline_ppg(batch, policy, config.scheme, config.use_advantage, config.epsilon_std,
                       config.num_threads)
        .values;
  });
}

std::pair<Scalar, Scalar> evaluate_value(const EnvSpec& env, const LogLinearPolicy& policy,
                                         ValueEvalMode mode, int num_rollouts,
                                         std::uint64_t seed, int num_threads) {
  if (mode == ValueEvalMode::None) {
    return {std::numeric_limits<Scalar>::quiet_NaN(), std::numeric_limits<Scalar>::quiet_NaN()};
  }
  if (mode == ValueEvalMode::Exact) {
    const auto outcomes = enumerate_trajectories(env, policy);
    Scalar value = 0.0;
    for (const auto& [traj, prob] : outcomes) value += prob * traj.total_reward;
    return {value, 0.0};
  }
  if (num_rollouts < 1) throw ValidationError("num_rollouts must be >= 1");
  std::vector<Scalar> totals(static_cast<std::size_t>(num_rollouts));
  parallel_for(num_rollouts, num_threads, [&](int i) {
    Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(i)});
    totals[static_cast<std::size_t>(i)] = rollout(env, policy, rng).total_reward;
  });
  Scalar mean = 0.0;
  for (Scalar v : totals) mean += v;
  mean /= static_cast<Scalar>(num_rollouts);
  if (num_rollouts == 1) return {mean, 0.0};
  Scalar ss = 0.0;
  for (Scalar v : totals) ss += (v - mean) * (v - mean);
  const Scalar sample_var = ss / static_cast<Scalar>(num_rollouts - 1);
  return {mean, std::sqrt(sample_var / static_cast<Scalar>(num_rollouts))};
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "iter,grad_norm,value,value_stderr\n";
  for (const HistoryRow& row : history.rows) {
    out << row.iteration << ',' << format_real(row.grad_norm) << ',' << format_real(row.value)
        << ',' << format_real(row.value_stderr) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ppg
