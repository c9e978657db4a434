#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ppg/env.hpp"
#include "ppg/policy.hpp"
#include "ppg/trainer.hpp"
#include "ppg/types.hpp"

namespace ppg {

// Minimal TOML subset: [section] headers and key = value lines where the
// value is JSON-compatible (double-quoted strings, numbers, booleans, flat
// arrays), with # comments. Everything an experiment file needs, nothing more.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

// Builders resolving the [env], [policy], [scheme], and [train] tables.
EnvSpec env_from_config(const nlohmann::json& config);
LogLinearPolicy policy_from_config(const nlohmann::json& config, const EnvSpec& env,
                                   std::uint64_t seed);
CreditScheme scheme_from_config(const nlohmann::json& config);
TrainConfig train_from_config(const nlohmann::json& config, std::uint64_t seed, int num_threads);

}  // namespace ppg
