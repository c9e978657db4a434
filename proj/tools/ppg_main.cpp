#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppg/analysis.hpp"
#include "ppg/config.hpp"
#include "ppg/core.hpp"
#include "ppg/credit.hpp"
#include "ppg/env.hpp"
#include "ppg/estimator.hpp"
#include "ppg/policy.hpp"
#include "ppg/rng.hpp"
#include "ppg/trainer.hpp"
#include "ppg/types.hpp"

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kGenTag = 0x67656eULL;

struct CliArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  bool force = false;
};

struct RunContext {
  nlohmann::json config;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out_dir;
  bool force = false;
};

template <typename T>
T json_get(const nlohmann::json& value, const std::string& name) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ppg::ValidationError("config key " + name + " has the wrong type");
  }
}

template <typename T>
T top_or(const nlohmann::json& config, const std::string& key, T fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : json_get<T>(*it, key);
}

template <typename T>
T section_or(const nlohmann::json& config, const std::string& section, const std::string& key,
             T fallback) {
  const auto sec = config.find(section);
  if (sec == config.end()) return fallback;
  const auto it = sec->find(key);
  return it == sec->end() ? fallback : json_get<T>(*it, "[" + section + "] " + key);
}

RunContext make_context(const CliArgs& args, bool seed_flag_required) {
  RunContext run;
  run.config = ppg::load_config_file(args.config_path);
  if (seed_flag_required && !args.seed) {
    throw ppg::ValidationError("--seed is required for train and study");
  }
  run.seed = args.seed ? *args.seed : top_or<std::uint64_t>(run.config, "seed", 0);
  run.threads = args.threads ? *args.threads : top_or<int>(run.config, "threads", 1);
  if (run.threads < 1) throw ppg::ValidationError("threads must be >= 1");
  run.out_dir =
      args.out ? fs::path(*args.out) : fs::path(top_or<std::string>(run.config, "output_dir", "out"));
  run.force = args.force;
  return run;
}

fs::path prepare_output(const RunContext& run, const std::string& filename) {
  std::error_code ec;
  fs::create_directories(run.out_dir, ec);
  if (ec) throw ppg::IoError("cannot create output directory: " + run.out_dir.string());
  fs::path target = run.out_dir / filename;
  if (fs::exists(target) && !run.force) {
    throw ppg::ValidationError("output exists: " + target.string() + " (use --force to overwrite)");
  }
  return target;
}

ppg::LogLinearPolicy resolve_policy(const RunContext& run, const ppg::EnvSpec& env,
                                    const std::string& section) {
  const std::string checkpoint =
      section_or<std::string>(run.config, section, "policy_checkpoint", "");
  if (!checkpoint.empty()) return ppg::load_policy(checkpoint);
  return ppg::policy_from_config(run.config, env, run.seed);
}

int cmd_gen_dataset(const CliArgs& args) {
  const RunContext run = make_context(args, false);
  const ppg::EnvSpec env = ppg::env_from_config(run.config);
  const ppg::LogLinearPolicy rho = resolve_policy(run, env, "gen");
  const int count =
      section_or<int>(run.config, "gen", "count", top_or<int>(run.config, "count", 0));
  if (count < 1) throw ppg::ValidationError("count must be >= 1");
  const bool monotonize = section_or<bool>(run.config, "gen", "monotonize", false);
  const fs::path target = prepare_output(run, "dataset.jsonl");

  std::vector<ppg::Trajectory> trajectories;
  trajectories.reserve(static_cast<std::size_t>(count));
  ppg::Scalar total = 0.0;
  for (int i = 0; i < count; ++i) {
    ppg::Rng rng = ppg::Rng::stream(run.seed, {kGenTag, static_cast<std::uint64_t>(i)});
    trajectories.push_back(ppg::rollout(env, rho, rng, monotonize));
    total += trajectories.back().total_reward;
  }
  const ppg::Batch batch = ppg::Batch::from_trajectories(std::move(trajectories));
  ppg::write_trajectories(target.string(), batch);
  std::cout << "wrote " << target.string() << ": count=" << count << " horizon=" << env.horizon
            << " mean_total_reward=" << ppg::format_real(total / count) << "\n";
  return 0;
}

int cmd_train(const CliArgs& args) {
  const RunContext run = make_context(args, true);
  const ppg::EnvSpec env = ppg::env_from_config(run.config);
  const ppg::TrainConfig train = ppg::train_from_config(run.config, run.seed, run.threads);
  const ppg::LogLinearPolicy initial = ppg::policy_from_config(run.config, env, run.seed);
  const std::string mode = top_or<std::string>(run.config, "mode", "online");
  const fs::path policy_path = prepare_output(run, "policy.json");
  const fs::path history_path = prepare_output(run, "history.csv");

  const ppg::TrainResult result = [&] {
    if (mode == "online") return ppg::train_online(env, initial, train);
    if (mode == "offline") {
      const std::string dataset_path =
          section_or<std::string>(run.config, "train", "dataset_path",
                                  top_or<std::string>(run.config, "dataset_path", ""));
      if (dataset_path.empty()) throw ppg::ValidationError("offline mode requires dataset_path");
      const ppg::Batch dataset = ppg::read_trajectories(dataset_path);
      return ppg::train_offline(dataset, initial, train, &env);
    }
    throw ppg::ValidationError("unknown train mode: " + mode);
  }();

  ppg::save_policy(policy_path.string(), result.policy);
  ppg::write_history_csv(history_path.string(), result.history);
  std::cout << "wrote " << policy_path.string() << " and " << history_path.string() << "\n";
  if (!result.history.rows.empty()) {
    const ppg::HistoryRow& last = result.history.rows.back();
    std::cout << "iterations=" << last.iteration
              << " final_value=" << ppg::format_real(last.value)
              << " grad_norm=" << ppg::format_real(last.grad_norm) << "\n";
  }
  return 0;
}

int cmd_study(const CliArgs& args) {
  const RunContext run = make_context(args, true);
  const ppg::EnvSpec env = ppg::env_from_config(run.config);
  const ppg::LogLinearPolicy policy = resolve_policy(run, env, "study");
  const std::vector<std::string> scheme_specs = section_or<std::vector<std::string>>(
      run.config, "study", "schemes", {"greedy", "full"});
  std::vector<ppg::CreditScheme> schemes;
  schemes.reserve(scheme_specs.size());
  for (const std::string& spec : scheme_specs) schemes.push_back(ppg::CreditScheme::parse(spec));
  const auto batch_sizes =
      section_or<std::vector<int>>(run.config, "study", "batch_sizes", {64});
  const int replications = section_or<int>(run.config, "study", "replications", 1000);
  const auto epsilon_grid = section_or<std::vector<ppg::Scalar>>(run.config, "study",
                                                                "epsilon_grid", {0.25, 0.5, 1.0, 2.0});
  const fs::path target = prepare_output(run, "study.csv");

  const std::vector<ppg::StudyRow> rows = ppg::concentration_study(
      env, policy, schemes, batch_sizes, replications, epsilon_grid, run.seed, run.threads);
  ppg::write_study_csv(target.string(), rows);
  std::cout << "wrote " << target.string() << ": rows=" << rows.size() << "\n";
  return 0;
}

int cmd_eval(const CliArgs& args) {
  const RunContext run = make_context(args, false);
  const ppg::EnvSpec env = ppg::env_from_config(run.config);
  const ppg::LogLinearPolicy policy = resolve_policy(run, env, "eval");
  const std::string mode = section_or<std::string>(run.config, "eval", "mode", "exact");
  const int rollouts = section_or<int>(run.config, "eval", "rollouts", 100000);
  ppg::ValueEvalMode eval_mode = ppg::ValueEvalMode::Exact;
  if (mode == "mc") {
    eval_mode = ppg::ValueEvalMode::MonteCarlo;
  } else if (mode != "exact") {
    throw ppg::ValidationError("unknown eval mode: " + mode);
  }
  const auto [value, std_error] =
      ppg::evaluate_value(env, policy, eval_mode, rollouts, run.seed, run.threads);
  std::cout << "{\"value\": " << ppg::format_real(value) << ", \"std_error\": "
            << ppg::format_real(std_error) << "}\n";
  return 0;
}

struct CheckReport {
  bool all_pass = true;

  void numeric(const std::string& name, ppg::Scalar max_err, ppg::Scalar tol) {
    const bool pass = std::isfinite(max_err) && max_err <= tol;
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": max error "
              << ppg::format_real(max_err) << " (tolerance " << ppg::format_real(tol) << ")\n";
    if (!pass) all_pass = false;
  }

  void failure(const std::string& name, const std::string& message) {
    std::cout << "FAIL " << name << ": " << message << "\n";
    all_pass = false;
  }
};

ppg::Scalar duality_error(const ppg::CreditScheme& scheme, int n, ppg::Rng& rng) {
  ppg::VectorX weights(n);
  for (int t = 0; t < n; ++t) weights[t] = 2.0 * rng.uniform() - 1.0;
  std::vector<ppg::VectorX> scores;
  scores.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    ppg::VectorX g(3);
    for (int k = 0; k < 3; ++k) g[k] = 2.0 * rng.uniform() - 1.0;
    scores.push_back(std::move(g));
  }
  const ppg::DualitySides sides = ppg::check_duality(scheme, n, weights, scores);
  return (sides.reward_major - sides.action_major).cwiseAbs().maxCoeff();
}

std::vector<int> segment_split(int n) {
  if (n <= 1) return {1};
  const int first = (n + 1) / 2;
  return {first, n - first};
}

int cmd_check(const CliArgs& args) {
  const RunContext run = make_context(args, false);
  const ppg::EnvSpec env = ppg::env_from_config(run.config);
  const ppg::LogLinearPolicy policy = ppg::policy_from_config(run.config, env, run.seed);

  std::vector<std::pair<ppg::Trajectory, ppg::Scalar>> support;
  try {
    support = ppg::enumerate_trajectories(env, policy);
  } catch (const ppg::ValidationError&) {
    throw ppg::ValidationError("check requires enumerable environment");
  }

  CheckReport report;

  {
    // Per-step rewards from prefix scores must sum back to the final score.
    ppg::Rng rng = ppg::Rng::stream(run.seed, {1});
    ppg::Scalar max_err = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const int n = 1 + static_cast<int>(rng.uniform_below(32));
      ppg::VectorX values = ppg::VectorX::Zero(n + 1);
      for (int t = 1; t <= n; ++t) values[t] = values[t - 1] + 2.0 * rng.uniform() - 1.0;
      const ppg::PrefixScoreSeries series(values);
      const ppg::VectorX rewards = ppg::telescope(series);
      const ppg::Scalar err =
          std::abs(rewards.sum() - values[n]) / std::max(1.0, std::abs(values[n]));
      max_err = std::max(max_err, err);
      const ppg::VectorX mono = ppg::telescope(ppg::monotonize(series));
      if (mono.minCoeff() < 0.0) max_err = std::numeric_limits<ppg::Scalar>::infinity();
    }
    report.numeric("telescoping", max_err, 1e-12);
  }

  {
    // Reward-major and action-major credited sums agree for every scheme.
    ppg::Rng rng = ppg::Rng::stream(run.seed, {2});
    ppg::Scalar max_err = 0.0;
    const int n_env = env.horizon;
    const std::vector<ppg::CreditScheme> builtins = {
        ppg::CreditScheme::full(), ppg::CreditScheme::greedy(), ppg::CreditScheme::lookahead(2),
        ppg::CreditScheme::segments(segment_split(n_env))};
    for (const ppg::CreditScheme& scheme : builtins) {
      max_err = std::max(max_err, duality_error(scheme, n_env, rng));
    }
    for (int rep = 0; rep < 500; ++rep) {
      const int n = 1 + static_cast<int>(rng.uniform_below(10));
      std::vector<std::vector<int>> sets(static_cast<std::size_t>(n));
      for (int t = 1; t <= n; ++t) {
        for (int l = t; l <= n; ++l) {
          if (rng.uniform() < 0.5) sets[t - 1].push_back(l);
        }
      }
      max_err = std::max(max_err, duality_error(ppg::CreditScheme::custom(sets), n, rng));
    }
    report.numeric("credit duality", max_err, 1e-12);
  }

  {
    // The policy score averages to zero at every reachable state.
    ppg::Scalar max_err = 0.0;
    int states = 0;
    for (const auto& [traj, prob] : support) {
      ppg::History history;
      for (int t = 0; t < traj.horizon() && states < 2000; ++t, ++states) {
        const ppg::VectorX probs = ppg::action_probs(policy, traj.context, history);
        ppg::VectorX sum = ppg::VectorX::Zero(policy.theta.size());
        for (int a = 0; a < env.num_actions; ++a) {
          sum += probs[a] * ppg::grad_log_prob(policy, traj.context, history, a);
        }
        max_err = std::max(max_err, sum.cwiseAbs().maxCoeff());
        history.push_back({traj.steps[static_cast<std::size_t>(t)].action,
                           traj.steps[static_cast<std::size_t>(t)].observation});
      }
      if (states >= 2000) break;
    }
    report.numeric("score identity", max_err, 1e-12);
  }

  {
    // Enumerated gradient vs central differences of the enumerated value, on a
    // random coordinate subset.
    const auto value_of = [&](const ppg::VectorX& theta) {
      const ppg::LogLinearPolicy perturbed(theta, policy.feature_map);
      ppg::Scalar v = 0.0;
      for (const auto& [traj, prob] : ppg::enumerate_trajectories(env, perturbed)) {
        v += prob * traj.total_reward;
      }
      return v;
    };
    const ppg::VectorX grad = ppg::exact_gradient(env, policy, ppg::CreditScheme::full());
    const int d = static_cast<int>(policy.theta.size());
    ppg::Rng rng = ppg::Rng::stream(run.seed, {3});
    std::vector<int> coords(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) coords[static_cast<std::size_t>(j)] = j;
    for (int j = d - 1; j > 0; --j) {
      std::swap(coords[static_cast<std::size_t>(j)],
                coords[rng.uniform_below(static_cast<std::uint64_t>(j) + 1)]);
    }
    if (d > 12) coords.resize(12);
    const ppg::Scalar h = 1e-5;
    ppg::Scalar max_err = 0.0;
    for (int j : coords) {
      ppg::VectorX plus = policy.theta;
      ppg::VectorX minus = policy.theta;
      plus[j] += h;
      minus[j] -= h;
      const ppg::Scalar fd = (value_of(plus) - value_of(minus)) / (2.0 * h);
      max_err = std::max(max_err, std::abs(fd - grad[j]));
    }
    report.numeric("gradient vs finite differences", max_err, 1e-6);
  }

  if (env.horizon <= 4) {
    // The per-step conditional decomposition must match the enumerated
    // credited gradient for every built-in scheme.
    ppg::Scalar max_err = 0.0;
    const std::vector<ppg::CreditScheme> builtins = {
        ppg::CreditScheme::full(), ppg::CreditScheme::greedy(), ppg::CreditScheme::lookahead(2),
        ppg::CreditScheme::segments(segment_split(env.horizon))};
    for (const ppg::CreditScheme& scheme : builtins) {
      const ppg::VectorX a = ppg::exact_gradient(env, policy, scheme);
      const ppg::VectorX b = ppg::stepwise_conditional_gradient(env, policy, scheme);
      max_err = std::max(max_err, (a - b).cwiseAbs().maxCoeff());
    }
    report.numeric("stepwise oracle", max_err, 1e-10);
  } else {
    std::cout << "SKIP stepwise oracle: horizon > 4\n";
  }

  {
    try {
      const ppg::CreditScheme scheme = ppg::scheme_from_config(run.config);
      scheme.reward_sets(env.horizon);
      ppg::Rng rng = ppg::Rng::stream(run.seed, {4});
      report.numeric("configured scheme (" + scheme.label() + ")",
                     duality_error(scheme, env.horizon, rng), 1e-12);
    } catch (const ppg::ValidationError& e) {
      report.failure("configured scheme", e.what());
    } catch (const ppg::IoError& e) {
      report.failure("configured scheme", e.what());
    }
  }

  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"credited policy-gradient experiment runner"};
  app.require_subcommand(1);

  CliArgs args;
  const auto add_common = [&args](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--seed", args.seed, "root RNG seed (overrides the config)");
    cmd->add_option("--threads", args.threads, "worker cap (overrides the config)");
    cmd->add_option("--out", args.out, "output directory (overrides the config)");
    cmd->add_flag("--force", args.force, "overwrite existing outputs");
  };

  CLI::App* gen = app.add_subcommand("gen-dataset", "sample a logged dataset to JSONL");
  CLI::App* train = app.add_subcommand("train", "run the ascent loop, write policy + history");
  CLI::App* study = app.add_subcommand("study", "tabulate estimator concentration to CSV");
  CLI::App* check = app.add_subcommand("check", "run the identity and oracle suites");
  CLI::App* eval = app.add_subcommand("eval", "report the value of a policy");
  for (CLI::App* cmd : {gen, train, study, check, eval}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_dataset(args);
    if (train->parsed()) return cmd_train(args);
    if (study->parsed()) return cmd_study(args);
    if (check->parsed()) return cmd_check(args);
    if (eval->parsed()) return cmd_eval(args);
  } catch (const ppg::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ppg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ppg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
