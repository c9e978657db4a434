#include "ppg/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace ppg {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;

std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

// Cuts an unquoted # comment; double-quoted strings may contain #.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (ch == '"' && (k == 0 || line[k - 1] != '\\')) in_string = !in_string;
    if (ch == '#' && !in_string) return line.substr(0, k);
  }
  return line;
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char ch : key) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') return false;
  }
  return true;
}

[[noreturn]] void fail_line(int line_number, const std::string& what) {
  throw ValidationError("config parse error at line " + std::to_string(line_number) + ": " + what);
}

const nlohmann::json* find_key(const nlohmann::json& config, const std::string& section,
                               const std::string& key) {
  const nlohmann::json* table = &config;
  if (!section.empty()) {
    const auto it = config.find(section);
    if (it == config.end()) return nullptr;
    table = &*it;
  }
  const auto it = table->find(key);
  return it == table->end() ? nullptr : &*it;
}

std::string describe(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

template <typename T>
T get_as(const nlohmann::json& value, const std::string& section, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config key " + describe(section, key) + " has the wrong type");
  }
}

template <typename T>
T get_or(const nlohmann::json& config, const std::string& section, const std::string& key,
         T fallback) {
  const nlohmann::json* value = find_key(config, section, key);
  return value ? get_as<T>(*value, section, key) : fallback;
}

template <typename T>
T require(const nlohmann::json& config, const std::string& section, const std::string& key) {
  const nlohmann::json* value = find_key(config, section, key);
  if (!value) throw ValidationError("missing config key " + describe(section, key));
  return get_as<T>(*value, section, key);
}

}  // namespace

nlohmann::json parse_config_text(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* current = &root;
  std::istringstream stream(text);
  std::string raw;
  int line_number = 0;
  while (std::getline(stream, raw)) {
    ++line_number;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_line(line_number, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) fail_line(line_number, "bad section name");
      current = &root[name];
      if (current->is_null()) *current = nlohmann::json::object();
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail_line(line_number, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value_text = trim(line.substr(eq + 1));
    if (!valid_key(key)) fail_line(line_number, "bad key");
    if (value_text.empty()) fail_line(line_number, "missing value");
    try {
      (*current)[key] = nlohmann::json::parse(value_text);
    } catch (const nlohmann::json::exception&) {
      fail_line(line_number, "unsupported value: " + value_text);
    }
  }
  return root;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

EnvSpec env_from_config(const nlohmann::json& config) {
  const std::string name = require<std::string>(config, "env", "name");
  if (name == "micro-coin") {
    return make_micro_coin(require<int>(config, "env", "horizon"),
                           get_or<std::string>(config, "env", "bits", "10"));
  }
  if (name == "persona-drift") {
    return make_persona_drift(get_or<int>(config, "env", "attributes", 4),
                              require<int>(config, "env", "horizon"),
                              get_or<int>(config, "env", "personas", 1),
                              get_or<std::uint64_t>(config, "env", "probe_seed", 0));
  }
  if (name == "bandit-chain") {
    return make_bandit_chain(require<int>(config, "env", "horizon"),
                             get_or<int>(config, "env", "arms", 3));
  }
  throw ValidationError("unknown environment: " + name);
}

LogLinearPolicy policy_from_config(const nlohmann::json& config, const EnvSpec& env,
                                   std::uint64_t seed) {
  const std::string map_name = get_or<std::string>(config, "policy", "feature_map", "tabular");
  FeatureMap map = [&] {
    if (map_name == "tabular") {
      return FeatureMap::tabular(env.horizon, env.num_observations, env.num_actions);
    }
    if (map_name == "concat") {
      const int context_dim =
          static_cast<int>(env.context_distribution.front().first.features.size());
      return FeatureMap::concat(context_dim, env.num_observations, env.num_actions);
    }
    throw ValidationError("unknown feature map: " + map_name);
  }();
  const std::string init = get_or<std::string>(config, "policy", "init", "zeros");
  if (init == "zeros") return LogLinearPolicy::zeros(std::move(map));
  if (init == "gaussian") {
    Rng rng = Rng::stream(seed, {kInitTag});
    return LogLinearPolicy::gaussian(std::move(map),
                                     get_or<Scalar>(config, "policy", "init_scale", 0.1), rng);
  }
  throw ValidationError("unknown policy init: " + init);
}

CreditScheme scheme_from_config(const nlohmann::json& config) {
  return CreditScheme::parse(get_or<std::string>(config, "scheme", "spec", "full"));
}

TrainConfig train_from_config(const nlohmann::json& config, std::uint64_t seed, int num_threads) {
  TrainConfig train;
  train.seed = seed;
  train.num_threads = num_threads;
  train.scheme = scheme_from_config(config);
  train.learning_rate = get_or<Scalar>(config, "train", "learning_rate", 0.05);
  const std::string schedule = get_or<std::string>(config, "train", "schedule", "constant");
  if (schedule == "constant") {
    train.schedule = LearningRateSchedule::Constant;
  } else if (schedule == "inverse_sqrt") {
    train.schedule = LearningRateSchedule::InverseSqrt;
  } else {
    throw ValidationError("unknown schedule: " + schedule);
  }
  train.batch_size = get_or<int>(config, "train", "batch_size", 16);
  train.max_iterations = get_or<int>(config, "train", "max_iterations", 100);
  train.convergence_tol = get_or<Scalar>(config, "train", "convergence_tol", 0.0);
  train.use_advantage = get_or<bool>(config, "train", "use_advantage", false);
  train.epsilon_std = get_or<Scalar>(config, "train", "epsilon_std", kDefaultEpsilonStd);
  train.gradient_mode = get_or<bool>(config, "train", "exact_gradient", false)
                            ? GradientMode::Exact
                            : GradientMode::Sampled;
  train.monotonize = get_or<bool>(config, "train", "monotonize", false);
  train.without_replacement = get_or<bool>(config, "train", "without_replacement", false);
  const std::string eval_mode = get_or<std::string>(config, "train", "value_eval", "exact");
  if (eval_mode == "exact") {
    train.value_eval = ValueEvalMode::Exact;
  } else if (eval_mode == "mc") {
    train.value_eval = ValueEvalMode::MonteCarlo;
  } else if (eval_mode == "none") {
    train.value_eval = ValueEvalMode::None;
  } else {
    throw ValidationError("unknown value_eval mode: " + eval_mode);
  }
  train.eval_rollouts = get_or<int>(config, "train", "eval_rollouts", 1000);
  return train;
}

}  // namespace ppg
