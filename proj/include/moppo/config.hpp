#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moppo/metrics.hpp"
#include "moppo/ppo.hpp"

namespace moppo {

/// Training plus reward-pipeline settings, as read from a config file.
struct RunConfig {
  TrainConfig train;
  RewardConfig reward;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

nlohmann::json normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

/// `key = value` lines named after the TrainConfig fields, plus the reward
/// keys alpha, beta, delta, capacity, spread_iterations, route_rounds,
/// history_increment, overflow_penalty and ace_ks. `#` starts a comment,
/// `[section]` lines are ignored, strings may be double-quoted, lists are
/// written `[a, b]` and `fixed_preference = none` clears the field.
/// Unknown keys and bad values raise ParseError.
struct KeyValue {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

std::vector<KeyValue> parse_key_values(std::string_view text);
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
/// Applies one setting; throws InputError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace moppo
