#include "moppo/config.hpp"

#include <charconv>
#include <sstream>

namespace moppo {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw InputError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InputError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, std::string v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw InputError("'" + key + "' expects a list like [a, b]");
  std::vector<double> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text) {
  std::vector<KeyValue> out;
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty() || (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos)) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, 1, "expected 'key = value'");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, 1, "missing key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.push_back({lineno, std::move(key), std::move(value)});
    if (end == text.size()) break;
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
  TrainConfig& t = c.train;
  RewardConfig& r = c.reward;
  if (key == "gamma") t.gamma = to_double(key, v);
  else if (key == "lambda") t.lambda = to_double(key, v);
  else if (key == "clip") t.clip = to_double(key, v);
  else if (key == "c1") t.c1 = to_double(key, v);
  else if (key == "c2") t.c2 = to_double(key, v);
  else if (key == "lr") t.lr = to_double(key, v);
  else if (key == "batch") t.batch = to_uint(key, v);
  else if (key == "epochs") t.epochs = to_uint(key, v);
  else if (key == "buffer_episodes") t.buffer_episodes = to_uint(key, v);
  else if (key == "total_updates") t.total_updates = to_uint(key, v);
  else if (key == "bins") t.bins = to_uint(key, v);
  else if (key == "resample_fraction") t.resample_fraction = to_double(key, v);
  else if (key == "resample_boost") t.resample_boost = to_double(key, v);
  else if (key == "standardize_advantages") t.standardize_advantages = to_bool(key, v);
  else if (key == "early_stop") t.early_stop = to_bool(key, v);
  else if (key == "stop_threshold") t.stop_threshold = to_double(key, v);
  else if (key == "stop_window") t.stop_window = to_uint(key, v);
  else if (key == "checkpoint_every") t.checkpoint_every = to_uint(key, v);
  else if (key == "normalizer_samples") t.normalizer_samples = to_uint(key, v);
  else if (key == "threads") t.threads = static_cast<int>(to_uint(key, v));
  else if (key == "seed") t.seed = to_uint(key, v);
  else if (key == "hidden") t.network.hidden = to_uint(key, v);
  else if (key == "preference_hidden") t.network.preference_hidden = to_uint(key, v);
  else if (key == "fixed_preference") {
    if (v == "none" || v.empty()) {
      t.fixed_preference.reset();
    } else {
      const auto list = to_list(key, v);
      if (list.size() != kObjectives) throw InputError("'fixed_preference' expects two weights");
      t.fixed_preference = Preference{list[0], list[1]};
    }
  } else if (key == "alpha") r.weights.alpha = to_double(key, v);
  else if (key == "beta") r.weights.beta = to_double(key, v);
  else if (key == "delta") r.weights.delta = to_double(key, v);
  else if (key == "capacity") r.capacity = to_double(key, v);
  else if (key == "spread_iterations") r.spread.iterations = static_cast<int>(to_uint(key, v));
  else if (key == "route_rounds") r.route.max_rounds = static_cast<int>(to_uint(key, v));
  else if (key == "history_increment") r.route.history_increment = to_double(key, v);
  else if (key == "overflow_penalty") r.route.overflow_penalty = to_double(key, v);
  else if (key == "ace_ks") r.ks = to_list(key, v);
  else throw InputError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  for (const auto& kv : parse_key_values(text)) {
    try {
      apply_setting(base, kv.key, kv.value);
    } catch (const InputError& e) {
      throw ParseError(kv.line, 1, e.what());
    }
  }
  return base;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = train.to_json();
  j["threads"] = train.threads;
  j["alpha"] = reward.weights.alpha;
  j["beta"] = reward.weights.beta;
  j["delta"] = reward.weights.delta;
  j["capacity"] = reward.capacity;
  j["spread_iterations"] = reward.spread.iterations;
  j["route_rounds"] = reward.route.max_rounds;
  j["history_increment"] = reward.route.history_increment;
  j["overflow_penalty"] = reward.route.overflow_penalty;
  j["ace_ks"] = reward.ks;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.train = TrainConfig::from_json(j);
  c.train.threads = j.value("threads", 1);
  c.reward.weights.alpha = j.value("alpha", c.reward.weights.alpha);
  c.reward.weights.beta = j.value("beta", c.reward.weights.beta);
  c.reward.weights.delta = j.value("delta", c.reward.weights.delta);
  c.reward.capacity = j.value("capacity", c.reward.capacity);
  c.reward.spread.iterations = j.value("spread_iterations", c.reward.spread.iterations);
  c.reward.route.max_rounds = j.value("route_rounds", c.reward.route.max_rounds);
  c.reward.route.history_increment = j.value("history_increment", c.reward.route.history_increment);
  c.reward.route.overflow_penalty = j.value("overflow_penalty", c.reward.route.overflow_penalty);
  c.reward.ks = j.value("ace_ks", c.reward.ks);
  return c;
}

nlohmann::json normalizer_to_json(const Normalizer& n) {
  return {{"wl_scale", n.wl_scale},
          {"cong_scale", n.cong_scale},
          {"anchor_scale", n.anchor_scale},
          {"sample_count", n.sample_count}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.wl_scale = j.at("wl_scale");
  n.cong_scale = j.at("cong_scale");
  n.anchor_scale = j.at("anchor_scale");
  n.sample_count = j.value("sample_count", std::size_t{0});
  if (!(n.wl_scale > 0 && n.cong_scale > 0 && n.anchor_scale > 0)) throw InputError("normalizer scales must be positive");
  return n;
}

}  // namespace moppo
