#include "moppo/ppo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace moppo {

Preference sample_preference(Rng& rng) {
  const double u = rng.uniform();
  return {u, 1.0 - u};
}

double scalarize(const RewardVector& r, const Preference& w) {
  double s = 0;
  for (std::size_t k = 0; k < kObjectives; ++k) s += w[k] * r[k];
  return s;
}

std::size_t preference_bin(const Preference& w, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::floor(w[0] * static_cast<double>(bins)));
  return std::min(b, bins - 1);
}

std::vector<double> resample_weights(std::span<const std::optional<double>> bin_means, double boost) {
  const std::size_t n = bin_means.size();
  std::vector<double> w(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  std::vector<double> seen;
  for (const auto& m : bin_means) {
    if (m) seen.push_back(*m);
  }
  if (seen.empty()) return w;
  std::sort(seen.begin(), seen.end());
  const std::size_t h = seen.size() / 2;
  const double median = seen.size() % 2 ? seen[h] : 0.5 * (seen[h - 1] + seen[h]);
  double max_deficit = 0;
  for (const auto& m : bin_means) {
    if (m) max_deficit = std::max(max_deficit, median - *m);
  }
  if (max_deficit <= 0) return w;
  double total = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const double deficit = bin_means[b] ? std::max(0.0, median - *bin_means[b]) : 0.0;
    w[b] = 1.0 + boost * deficit / max_deficit;
    total += w[b];
  }
  for (double& x : w) x /= total;
  return w;
}

Preference sample_preference_weighted(Rng& rng, std::span<const double> bin_weights, double fraction) {
  if (bin_weights.empty() || rng.uniform() >= fraction) return sample_preference(rng);
  double u = rng.uniform();
  std::size_t b = 0;
  for (; b + 1 < bin_weights.size(); ++b) {
    if (u < bin_weights[b]) break;
    u -= bin_weights[b];
  }
  const double width = 1.0 / static_cast<double>(bin_weights.size());
  const double w1 = std::min(1.0, (static_cast<double>(b) + rng.uniform()) * width);
  return {w1, 1.0 - w1};
}

GaeResult compute_gae(std::span<const RewardVector> rewards, std::span<const RewardVector> values, double gamma,
                      double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1) throw std::invalid_argument("compute_gae: values must have one more entry than rewards");
  GaeResult out;
  out.advantages.assign(T, RewardVector{});
  out.returns.assign(T, RewardVector{});
  RewardVector next{};
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t k = 0; k < kObjectives; ++k) {
      const double delta = rewards[t][k] + gamma * values[t + 1][k] - values[t][k];
      next[k] = delta + gamma * lambda * next[k];
      out.advantages[t][k] = next[k];
      out.returns[t][k] = next[k] + values[t][k];
    }
  }
  return out;
}

Trajectory run_episode(const PlacementEnv& env, const StateEncoder& encoder, const ActorCritic& net,
                       const Preference& w, Rng& rng, bool greedy) {
  Trajectory traj;
  traj.preference = w;
  PlacementState s = env.reset(w);
  while (!s.done) {
    Transition tr;
    tr.features = encoder.encode(s);
    tr.mask = env.legal_mask(s);
    tr.preference = w;
    const auto probs = net.probabilities(tr.features, w, tr.mask);
    std::size_t a = 0;
    if (greedy) {
      a = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
      double u = rng.uniform();
      std::size_t last = 0;
      for (a = 0; a < probs.size(); ++a) {
        if (probs[a] <= 0) continue;
        last = a;
        if (u < probs[a]) break;
        u -= probs[a];
      }
      if (a == probs.size()) a = last;
    }
    tr.action = a;
    tr.log_prob = std::log(probs[a]);
    tr.value = net.value(tr.features, w);
    env.step(s, static_cast<int>(a));
    traj.steps.push_back(std::move(tr));
  }
  traj.reward = s.reward;
  traj.stuck = s.stuck;
  traj.raw = s.raw;
  traj.actions = s.actions;
  return traj;
}

void assign_advantages(Trajectory& t, double gamma, double lambda) {
  const std::size_t T = t.steps.size();
  if (T == 0) return;
  std::vector<RewardVector> rewards(T, RewardVector{});
  rewards.back() = t.reward;
  std::vector<RewardVector> values;
  for (const auto& s : t.steps) values.push_back(s.value);
  values.push_back(RewardVector{});
  const GaeResult g = compute_gae(rewards, values, gamma, lambda);
  for (std::size_t i = 0; i < T; ++i) {
    t.steps[i].advantage = g.advantages[i];
    t.steps[i].target = g.returns[i];
  }
}

Batch Batch::from(std::span<const Transition* const> transitions) {
  if (transitions.empty()) throw std::invalid_argument("empty batch");
  const std::size_t n = transitions.size(), d = transitions[0]->features.size();
  Batch b;
  b.features = Matrix(n, d);
  b.preferences = Matrix(n, kObjectives);
  b.advantages = Matrix(n, kObjectives);
  b.targets = Matrix(n, kObjectives);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = *transitions[i];
    std::copy(t.features.begin(), t.features.end(), b.features.data.begin() + i * d);
    b.masks.insert(b.masks.end(), t.mask.begin(), t.mask.end());
    b.actions.push_back(t.action);
    b.old_log_probs.push_back(t.log_prob);
    for (std::size_t k = 0; k < kObjectives; ++k) {
      b.preferences(i, k) = t.preference[k];
      b.advantages(i, k) = t.advantage[k];
      b.targets(i, k) = t.target[k];
    }
  }
  return b;
}

std::vector<double> scalarized_advantages(const Batch& batch, bool standardize) {
  const std::size_t n = batch.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kObjectives; ++k) a[i] += batch.preferences(i, k) * batch.advantages(i, k);
  }
  if (standardize && n > 0) {
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    double var = 0;
    for (double x : a) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& x : a) x = (x - mean) / (sd + 1e-8);
  }
  return a;
}

Var clip_objective(Tape& tape, ActorCritic& net, const Batch& batch, double clip, bool standardize_advantages) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!std::isfinite(batch.old_log_probs[i])) {
      throw std::domain_error("transition " + std::to_string(i) + " has behavior probability 0; ratio undefined");
    }
  }
  Var logp = net.policy_log_probs(tape, batch.features, batch.preferences, batch.masks);
  Var lp = gather_cols(logp, batch.actions);
  Var ratio = exp(sub(lp, tape.constant(Matrix(batch.size(), 1, batch.old_log_probs))));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!std::isfinite(ratio.value().data[i])) {
      throw std::domain_error("non-finite importance ratio at transition " + std::to_string(i));
    }
  }
  Var adv = tape.constant(Matrix(batch.size(), 1, scalarized_advantages(batch, standardize_advantages)));
  return mean(minimum(mul(ratio, adv), mul(clamp(ratio, 1.0 - clip, 1.0 + clip), adv)));
}

Var value_loss(Tape& tape, ActorCritic& net, const Batch& batch) {
  Var v = net.values(tape, batch.features, batch.preferences);
  Var diff = sub(v, tape.constant(batch.targets));
  return mean(abs(sum_cols(mul(diff, tape.constant(batch.preferences)))));
}

Var policy_entropy(Tape& tape, ActorCritic& net, const Batch& batch) {
  return mean(entropy_rows(net.policy_log_probs(tape, batch.features, batch.preferences, batch.masks)));
}

LossTerms total_objective(Tape& tape, ActorCritic& net, const Batch& batch, double clip, double c1, double c2,
                          bool standardize_advantages) {
  LossTerms t;
  t.clip = clip_objective(tape, net, batch, clip, standardize_advantages);
  t.value = value_loss(tape, net, batch);
  t.entropy = policy_entropy(tape, net, batch);
  t.objective = add(sub(t.clip, scale(t.value, c1)), scale(t.entropy, c2));
  return t;
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(gamma > 0 && gamma <= 1, "gamma must lie in (0, 1]");
  require(lambda >= 0 && lambda <= 1, "lambda must lie in [0, 1]");
  require(clip > 0, "clip must be positive");
  require(c1 >= 0 && c2 >= 0, "c1 and c2 must be non-negative");
  require(lr > 0, "lr must be positive");
  require(batch >= 1, "batch must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
  require(buffer_episodes >= 1, "buffer_episodes must be at least 1");
  require(bins >= 1, "bins must be at least 1");
  require(resample_fraction >= 0 && resample_fraction <= 1, "resample_fraction must lie in [0, 1]");
  require(resample_boost >= 0, "resample_boost must be non-negative");
  require(stop_threshold >= 0, "stop_threshold must be non-negative");
  require(stop_window >= 1, "stop_window must be at least 1");
  require(normalizer_samples >= 1, "normalizer_samples must be at least 1");
  require(network.hidden >= 1 && network.preference_hidden >= 1, "network widths must be positive");
  if (fixed_preference) check_preference(*fixed_preference);
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"gamma", gamma},
                   {"lambda", lambda},
                   {"clip", clip},
                   {"c1", c1},
                   {"c2", c2},
                   {"lr", lr},
                   {"batch", batch},
                   {"epochs", epochs},
                   {"buffer_episodes", buffer_episodes},
                   {"total_updates", total_updates},
                   {"bins", bins},
                   {"resample_fraction", resample_fraction},
                   {"resample_boost", resample_boost},
                   {"standardize_advantages", standardize_advantages},
                   {"early_stop", early_stop},
                   {"stop_threshold", stop_threshold},
                   {"stop_window", stop_window},
                   {"checkpoint_every", checkpoint_every},
                   {"normalizer_samples", normalizer_samples},
                   {"seed", seed},
                   {"hidden", network.hidden},
                   {"preference_hidden", network.preference_hidden}};
  j["fixed_preference"] = fixed_preference ? nlohmann::json(*fixed_preference) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("gamma", c.gamma);
  get("lambda", c.lambda);
  get("clip", c.clip);
  get("c1", c.c1);
  get("c2", c.c2);
  get("lr", c.lr);
  get("batch", c.batch);
  get("epochs", c.epochs);
  get("buffer_episodes", c.buffer_episodes);
  get("total_updates", c.total_updates);
  get("bins", c.bins);
  get("resample_fraction", c.resample_fraction);
  get("resample_boost", c.resample_boost);
  get("standardize_advantages", c.standardize_advantages);
  get("early_stop", c.early_stop);
  get("stop_threshold", c.stop_threshold);
  get("stop_window", c.stop_window);
  get("checkpoint_every", c.checkpoint_every);
  get("normalizer_samples", c.normalizer_samples);
  get("seed", c.seed);
  get("hidden", c.network.hidden);
  get("preference_hidden", c.network.preference_hidden);
  if (j.contains("fixed_preference") && !j.at("fixed_preference").is_null()) {
    c.fixed_preference = j.at("fixed_preference").get<Preference>();
  }
  return c;
}

nlohmann::json UpdateLog::to_json() const {
  nlohmann::json bins_json = nlohmann::json::array();
  for (const auto& b : bin_returns) bins_json.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
  return {{"update", update},       {"lr", lr},           {"clip", clip},
          {"value", value},         {"entropy", entropy}, {"objective", objective},
          {"mean_return", mean_return}, {"episodes", episodes}, {"transitions", transitions},
          {"stuck", stuck},         {"bin_returns", bins_json}, {"seconds", seconds}};
}

// ---------------------------------------------------------------- training

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kShuffleTag = 0x5aff1e;

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int i = 1; i < t; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace

ActorCritic initial_network(const PlacementEnv& env, const TrainConfig& config) {
  const StateEncoder encoder(env);
  return ActorCritic(encoder.dim(), static_cast<std::size_t>(env.action_count()), config.network,
                     derive_seed(config.seed, {kInitTag}));
}

TrainResult train(const PlacementEnv& env, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  const StateEncoder encoder(env);
  TrainResult result;
  result.net = initial_network(env, config);
  ActorCritic& net = result.net;
  Adam adam(net.params());
  if (hooks.on_checkpoint) hooks.on_checkpoint(0, net);

  std::vector<double> bin_weights(config.bins, 1.0 / static_cast<double>(config.bins));
  std::size_t last_checkpoint = 0;
  for (std::size_t u = 0; u < config.total_updates; ++u) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Trajectory> buffer(config.buffer_episodes);
    parallel_for(config.buffer_episodes, config.threads, [&](std::size_t e) {
      Rng rng(derive_seed(config.seed, {u + 1, e}));
      const Preference w = config.fixed_preference
                               ? *config.fixed_preference
                               : sample_preference_weighted(rng, bin_weights, config.resample_fraction);
      buffer[e] = run_episode(env, encoder, net, w, rng, false);
      assign_advantages(buffer[e], config.gamma, config.lambda);
    });

    UpdateLog log;
    log.update = u + 1;
    log.episodes = buffer.size();
    std::vector<double> bin_sum(config.bins, 0.0);
    std::vector<std::size_t> bin_count(config.bins, 0);
    std::vector<const Transition*> transitions;
    double total_return = 0;
    for (const auto& t : buffer) {
      const double r = scalarize(t.reward, t.preference);
      total_return += r;
      const std::size_t b = preference_bin(t.preference, config.bins);
      bin_sum[b] += r;
      ++bin_count[b];
      if (t.stuck) ++log.stuck;
      for (const auto& s : t.steps) transitions.push_back(&s);
    }
    log.mean_return = total_return / static_cast<double>(buffer.size());
    for (std::size_t b = 0; b < config.bins; ++b) {
      log.bin_returns.push_back(bin_count[b] ? std::optional<double>(bin_sum[b] / bin_count[b]) : std::nullopt);
    }
    log.transitions = transitions.size();
    log.lr = lr_schedule(config.lr, u, config.total_updates);

    const ParameterSet backup = net.params();
    Rng shuffle_rng(derive_seed(config.seed, {u + 1, kShuffleTag}));
    std::vector<std::size_t> idx(transitions.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t minibatches = 0;
    const std::size_t bs = std::min(config.batch, std::max<std::size_t>(1, transitions.size()));
    try {
      for (std::size_t epoch = 0; epoch < config.epochs && !transitions.empty(); ++epoch) {
        shuffle_rng.shuffle(idx);
        for (std::size_t start = 0; start < idx.size(); start += bs) {
          const std::size_t end = std::min(idx.size(), start + bs);
          std::vector<const Transition*> chunk;
          for (std::size_t i = start; i < end; ++i) chunk.push_back(transitions[idx[i]]);
          const Batch batch = Batch::from(chunk);
          Tape tape;
          const LossTerms terms =
              total_objective(tape, net, batch, config.clip, config.c1, config.c2, config.standardize_advantages);
          const double objective = terms.objective.value().data[0];
          if (!std::isfinite(objective)) throw std::domain_error("loss is not finite");
          net.params().zero_grad();
          tape.backward(scale(terms.objective, -1.0));
          adam.step(log.lr);
          log.clip += terms.clip.value().data[0];
          log.value += terms.value.value().data[0];
          log.entropy += terms.entropy.value().data[0];
          log.objective += objective;
          ++minibatches;
        }
      }
    } catch (const std::domain_error& e) {
      net.params() = backup;
      result.diverged = true;
      result.message = std::string("update ") + std::to_string(u + 1) + " diverged: " + e.what();
      break;
    }
    if (minibatches) {
      log.clip /= minibatches;
      log.value /= minibatches;
      log.entropy /= minibatches;
      log.objective /= minibatches;
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    result.updates = u + 1;
    if (hooks.on_update) hooks.on_update(log);
    if (hooks.on_checkpoint && config.checkpoint_every && result.updates % config.checkpoint_every == 0) {
      hooks.on_checkpoint(result.updates, net);
      last_checkpoint = result.updates;
    }

    bin_weights = resample_weights(log.bin_returns, config.resample_boost);

    if (config.early_stop && result.log.size() > config.stop_window) {
      const double before = result.log[result.log.size() - 1 - config.stop_window].mean_return;
      const double now = log.mean_return;
      const double gain = (now - before) / std::max(std::abs(before), 1e-12);
      if (gain < config.stop_threshold) {
        result.stopped_early = true;
        result.message = "relative improvement " + std::to_string(gain) + " over " +
                         std::to_string(config.stop_window) + " updates is below the threshold";
        break;
      }
    }
  }
  if (hooks.on_checkpoint && result.updates != last_checkpoint) hooks.on_checkpoint(result.updates, net);
  return result;
}

}  // namespace moppo
