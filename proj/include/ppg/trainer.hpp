#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ppg/core.hpp"
#include "ppg/credit.hpp"
#include "ppg/env.hpp"
#include "ppg/estimator.hpp"
#include "ppg/policy.hpp"
#include "ppg/types.hpp"

namespace ppg {

enum class LearningRateSchedule { Constant, InverseSqrt };
enum class GradientMode { Sampled, Exact };
enum class ValueEvalMode { Exact, MonteCarlo, None };

struct TrainConfig {
  LearningRateSchedule schedule = LearningRateSchedule::Constant;
  Scalar learning_rate = 0.05;  // the constant alpha, or alpha_0 / sqrt(j)
  int batch_size = 16;
  int max_iterations = 100;
  Scalar convergence_tol = 0.0;
  std::uint64_t seed = 0;
  CreditScheme scheme = CreditScheme::full();
  bool use_advantage = false;
  Scalar epsilon_std = kDefaultEpsilonStd;
  GradientMode gradient_mode = GradientMode::Sampled;
  ValueEvalMode value_eval = ValueEvalMode::Exact;
  int eval_rollouts = 1000;
  bool monotonize = false;
  bool without_replacement = false;  // offline resampling mode
  int num_threads = 1;

  void validate() const;
};

// One row per iteration: the norm of the applied update direction and the
// policy value after the update (before it, when the tolerance stops the run).
struct HistoryRow {
  int iteration = 0;
  Scalar grad_norm = 0.0;
  Scalar value = 0.0;
  Scalar value_stderr = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
};

struct TrainResult {
  LogLinearPolicy policy;
  TrainHistory history;
};

// Plain gradient ascent, theta <- theta + alpha_j g. Stops at the iteration
// cap or when the gradient norm falls under convergence_tol.
TrainResult train_online(const EnvSpec& env, const LogLinearPolicy& initial_policy,
                         const TrainConfig& config);

// Same loop over a logged dataset: each iteration resamples batch_size
// trajectories uniformly with replacement (or without, in shuffled epochs).
// eval_env is only used for the value column; pass nullptr to skip.
TrainResult train_offline(const Batch& dataset, const LogLinearPolicy& initial_policy,
                          const TrainConfig& config, const EnvSpec* eval_env = nullptr);

// Exact mode enumerates (std_error 0); Monte Carlo averages num_rollouts
// seeded rollouts and reports the standard error of the mean.
std::pair<Scalar, Scalar> evaluate_value(const EnvSpec& env, const LogLinearPolicy& policy,
                                         ValueEvalMode mode, int num_rollouts,
                                         std::uint64_t seed, int num_threads = 1);

// Columns: iter,grad_norm,value,value_stderr. Reals carry 17 significant
// digits, so identical runs produce identical bytes.
void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace ppg
