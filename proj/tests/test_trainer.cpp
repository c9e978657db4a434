#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "ppg/env.hpp"
#include "ppg/estimator.hpp"
#include "ppg/trainer.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ppg::LogLinearPolicy uniform_policy(const ppg::EnvSpec& env) {
  return ppg::LogLinearPolicy::zeros(
      ppg::FeatureMap::tabular(env.horizon, env.num_observations, env.num_actions));
}

ppg::Batch logged_dataset(const ppg::EnvSpec& env, int count, std::uint64_t seed) {
  const ppg::LogLinearPolicy rho = uniform_policy(env);
  std::vector<ppg::Trajectory> trajs;
  for (int i = 0; i < count; ++i) {
    ppg::Rng rng = ppg::Rng::stream(seed, {static_cast<std::uint64_t>(i)});
    trajs.push_back(ppg::rollout(env, rho, rng));
  }
  return ppg::Batch(std::move(trajs), env.horizon);
}

}  // namespace

TEST_CASE("train config validation") {
  ppg::TrainConfig config;
  config.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(config.validate(), "learning rate must be positive", ppg::ValidationError);
  config = {};
  config.batch_size = 0;
  CHECK_THROWS_WITH_AS(config.validate(), "batch size must be >= 1", ppg::ValidationError);
  config = {};
  config.max_iterations = 0;
  CHECK_THROWS_WITH_AS(config.validate(), "max_iterations must be >= 1", ppg::ValidationError);
  config = {};
  config.convergence_tol = -1.0;
  CHECK_THROWS_WITH_AS(config.validate(), "convergence_tol must be >= 0", ppg::ValidationError);
  config = {};
  config.num_threads = 0;
  CHECK_THROWS_WITH_AS(config.validate(), "num_threads must be >= 1", ppg::ValidationError);
  config = {};
  config.gradient_mode = ppg::GradientMode::Exact;
  config.use_advantage = true;
  CHECK_THROWS_WITH_AS(config.validate(), "use_advantage requires sampled gradients",
                       ppg::ValidationError);
  config = {};
  config.validate();
}

TEST_CASE("one sampled iteration applies exactly one scaled update") {
  const ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  const ppg::LogLinearPolicy initial = uniform_policy(env);

  ppg::TrainConfig config;
  config.seed = 7;
  config.batch_size = 5;
  config.max_iterations = 1;
  config.learning_rate = 0.125;
  config.scheme = ppg::CreditScheme::greedy();
  config.value_eval = ppg::ValueEvalMode::Exact;
  const ppg::TrainResult result = ppg::train_online(env, initial, config);

  // Recreate the iteration-1 rollout batch from the same seed streams.
  std::vector<ppg::Trajectory> trajs;
  for (int i = 0; i < config.batch_size; ++i) {
    ppg::Rng rng = ppg::Rng::stream(config.seed, {1, static_cast<std::uint64_t>(i)});
    trajs.push_back(ppg::rollout(env, initial, rng));
  }
  const ppg::VectorX g =
      ppg::empirical_ppg(ppg::Batch(std::move(trajs), 2), initial, config.scheme).values;
  const ppg::VectorX expected = initial.theta + config.learning_rate * g;
  CHECK((result.policy.theta - expected).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(result.history.rows.size() == 1);
  CHECK(result.history.rows[0].iteration == 1);
  CHECK(result.history.rows[0].grad_norm == g.norm());
  CHECK(result.history.rows[0].value_stderr == 0.0);
}

TEST_CASE("zero rewards leave the policy unchanged") {
  ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  env.prefix_score = [](const ppg::Context&, const ppg::History&) { return 0.0; };
  env.max_abs_step_reward = 0.0;
  env.max_total_reward = 0.0;
  const ppg::LogLinearPolicy initial = uniform_policy(env);
  ppg::TrainConfig config;
  config.seed = 11;
  config.max_iterations = 3;
  config.value_eval = ppg::ValueEvalMode::None;
  const ppg::TrainResult result = ppg::train_online(env, initial, config);
  CHECK((result.policy.theta - initial.theta).cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.history.rows.size() == 3);

  // A positive tolerance stops the run on the first zero-norm update.
  config.convergence_tol = 1e-9;
  const ppg::TrainResult stopped = ppg::train_online(env, initial, config);
  CHECK(stopped.history.rows.size() == 1);
  CHECK(stopped.history.rows[0].grad_norm == 0.0);
}

TEST_CASE("exact-gradient ascent improves the value monotonically") {
  const ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  ppg::TrainConfig config;
  config.gradient_mode = ppg::GradientMode::Exact;
  config.learning_rate = 0.5;
  config.max_iterations = 25;
  config.value_eval = ppg::ValueEvalMode::Exact;
  const ppg::TrainResult result = ppg::train_online(env, uniform_policy(env), config);
  REQUIRE(result.history.rows.size() == 25);
  double prev = 1.0;  // the uniform-policy value
  for (const ppg::HistoryRow& row : result.history.rows) {
    CHECK(row.value >= prev - 1e-12);
    prev = row.value;
  }
  CHECK(result.history.rows.back().value > 1.5);
}

TEST_CASE("non-finite updates raise a divergence error") {
  const ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  ppg::TrainConfig config;
  config.seed = 13;
  config.learning_rate = std::numeric_limits<double>::infinity();
  config.max_iterations = 5;
  config.value_eval = ppg::ValueEvalMode::None;
  try {
    ppg::train_online(env, uniform_policy(env), config);
    FAIL("expected divergence");
  } catch (const ppg::DivergenceError& e) {
    CHECK(e.iteration == 1);
    CHECK(std::string(e.what()).find("divergence at iteration") != std::string::npos);
  }

  // A degenerate advantage (single trajectory, one step, no std floor) turns
  // the update into 0/0.
  const ppg::EnvSpec tiny = ppg::make_micro_coin(1, "1");
  ppg::TrainConfig nan_config;
  nan_config.seed = 13;
  nan_config.batch_size = 1;
  nan_config.use_advantage = true;
  nan_config.epsilon_std = 0.0;
  nan_config.value_eval = ppg::ValueEvalMode::None;
  CHECK_THROWS_AS(ppg::train_online(tiny, uniform_policy(tiny), nan_config),
                  ppg::DivergenceError);
}

TEST_CASE("inverse sqrt schedule shrinks later steps") {
  const ppg::EnvSpec env = ppg::make_micro_coin(1, "1");
  const ppg::LogLinearPolicy initial = uniform_policy(env);
  ppg::TrainConfig config;
  config.gradient_mode = ppg::GradientMode::Exact;
  config.schedule = ppg::LearningRateSchedule::InverseSqrt;
  config.learning_rate = 0.1;
  config.max_iterations = 2;
  config.value_eval = ppg::ValueEvalMode::None;
  const ppg::TrainResult result = ppg::train_online(env, initial, config);

  ppg::LogLinearPolicy manual = initial;
  const ppg::VectorX g1 = ppg::exact_gradient(env, manual, config.scheme);
  manual.theta += (0.1 / std::sqrt(1.0)) * g1;
  const ppg::VectorX g2 =
      ppg::exact_gradient(env, ppg::LogLinearPolicy(manual.theta, manual.feature_map),
                          config.scheme);
  manual.theta += (0.1 / std::sqrt(2.0)) * g2;
  CHECK((result.policy.theta - manual.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("offline training is deterministic and honors sampling modes") {
  const ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  const ppg::Batch dataset = logged_dataset(env, 40, 17);
  ppg::TrainConfig config;
  config.seed = 19;
  config.batch_size = 8;
  config.max_iterations = 6;
  config.scheme = ppg::CreditScheme::greedy();
  config.use_advantage = true;
  config.value_eval = ppg::ValueEvalMode::Exact;

  const ppg::TrainResult a = ppg::train_offline(dataset, uniform_policy(env), config, &env);
  const ppg::TrainResult b = ppg::train_offline(dataset, uniform_policy(env), config, &env);
  CHECK((a.policy.theta - b.policy.theta).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.history.rows.size() == b.history.rows.size());
  for (std::size_t i = 0; i < a.history.rows.size(); ++i) {
    CHECK(a.history.rows[i].value == b.history.rows[i].value);
    CHECK(a.history.rows[i].grad_norm == b.history.rows[i].grad_norm);
  }

  config.without_replacement = true;
  const ppg::TrainResult c = ppg::train_offline(dataset, uniform_policy(env), config, &env);
  const ppg::TrainResult d = ppg::train_offline(dataset, uniform_policy(env), config, &env);
  CHECK((c.policy.theta - d.policy.theta).cwiseAbs().maxCoeff() == 0.0);

  config.batch_size = 41;
  CHECK_THROWS_WITH_AS(ppg::train_offline(dataset, uniform_policy(env), config),
                       "batch size exceeds dataset for without-replacement sampling",
                       ppg::ValidationError);
  config.batch_size = 8;
  config.without_replacement = false;
  config.gradient_mode = ppg::GradientMode::Exact;
  config.use_advantage = false;
  CHECK_THROWS_WITH_AS(ppg::train_offline(dataset, uniform_policy(env), config),
                       "offline training needs sampled gradients", ppg::ValidationError);

  // Without an eval environment the value columns are NaN placeholders.
  config.gradient_mode = ppg::GradientMode::Sampled;
  const ppg::TrainResult e = ppg::train_offline(dataset, uniform_policy(env), config);
  CHECK(std::isnan(e.history.rows[0].value));
}

TEST_CASE("offline lookahead training beats the logging policy on persona drift") {
  const ppg::EnvSpec env = ppg::make_persona_drift(4, 10);
  const ppg::Batch dataset = logged_dataset(env, 5000, 42);
  ppg::TrainConfig config;
  config.seed = 42;
  config.learning_rate = 1.0;
  config.batch_size = 32;
  config.max_iterations = 200;
  config.scheme = ppg::CreditScheme::lookahead(2);
  config.use_advantage = true;
  config.value_eval = ppg::ValueEvalMode::None;

  const ppg::TrainResult result = ppg::train_offline(dataset, uniform_policy(env), config);
  const double rho_value =
      ppg::evaluate_value(env, uniform_policy(env), ppg::ValueEvalMode::Exact, 0, 0).first;
  const double trained_value =
      ppg::evaluate_value(env, result.policy, ppg::ValueEvalMode::Exact, 0, 0).first;
  CHECK(trained_value > rho_value);
}

TEST_CASE("value evaluation modes") {
  const ppg::EnvSpec env = ppg::make_micro_coin(2, "10");
  const ppg::LogLinearPolicy uniform = uniform_policy(env);

  const auto [exact, exact_se] = ppg::evaluate_value(env, uniform, ppg::ValueEvalMode::Exact, 0, 0);
  CHECK(exact == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact_se == 0.0);

  // A sharply peaked policy on the correct actions reaches the maximum value.
  ppg::LogLinearPolicy optimal = uniform;
  optimal.theta[(0 * 2 + 0) * 2 + 1] = 40.0;  // step 1, empty history: guess 1
  optimal.theta[(1 * 2 + 1) * 2 + 0] = 40.0;  // step 2, observed 0: guess 0
  const auto [best, best_se] =
      ppg::evaluate_value(env, ppg::LogLinearPolicy(optimal.theta, optimal.feature_map),
                          ppg::ValueEvalMode::Exact, 0, 0);
  CHECK(std::abs(best - 2.0) <= 1e-12);
  CHECK(best_se == 0.0);

  const auto [mc, mc_se] =
      ppg::evaluate_value(env, uniform, ppg::ValueEvalMode::MonteCarlo, 100000, 23);
  CHECK(mc_se > 0.0);
  CHECK(std::abs(mc - 1.0) <= 5.0 * mc_se);
  const auto [mc2, mc2_se] =
      ppg::evaluate_value(env, uniform, ppg::ValueEvalMode::MonteCarlo, 100000, 23);
  CHECK(mc == mc2);
  CHECK(mc_se == mc2_se);

  const auto [none, none_se] = ppg::evaluate_value(env, uniform, ppg::ValueEvalMode::None, 0, 0);
  CHECK(std::isnan(none));
  CHECK(std::isnan(none_se));

  CHECK_THROWS_WITH_AS(ppg::evaluate_value(env, uniform, ppg::ValueEvalMode::MonteCarlo, 0, 0),
                       "num_rollouts must be >= 1", ppg::ValidationError);
}

TEST_CASE("history csv layout and determinism") {
  ppg::TrainHistory history;
  history.rows.push_back({1, 0.5, 1.25, 0.0});
  history.rows.push_back({2, 0.25, 1.5, 0.125});
  const std::string path = "trainer_history_test.csv";
  ppg::write_history_csv(path, history);
  const std::string first = slurp(path);
  CHECK(first ==
        "iter,grad_norm,value,value_stderr\n"
        "1,0.5,1.25,0\n"
        "2,0.25,1.5,0.125\n");
  ppg::write_history_csv(path, history);
  CHECK(slurp(path) == first);
  std::remove(path.c_str());

  CHECK_THROWS_AS(ppg::write_history_csv("missing_dir/x/history.csv", history), ppg::IoError);
}
