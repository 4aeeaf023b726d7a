#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "moppo/autodiff.hpp"
#include "moppo/env.hpp"
#include "moppo/network.hpp"
#include "moppo/rng.hpp"

namespace moppo {

/// omega_1 ~ U[0, 1], omega_2 = 1 - omega_1.
Preference sample_preference(Rng& rng);

double scalarize(const RewardVector& r, const Preference& w);

/// Sampling weights over equal-width omega_1 bins. Bins whose mean scalarized
/// return lies below the median of the observed bin means get weight
/// 1 + boost * deficit / max_deficit; all others (and bins without data) get 1.
/// The weights are normalized to sum to 1; uniform when nothing is below the median.
std::vector<double> resample_weights(std::span<const std::optional<double>> bin_means, double boost = 1.0);

/// Draws a preference: with probability `fraction` from the bin weights
/// (uniform inside the chosen bin), otherwise from sample_preference.
Preference sample_preference_weighted(Rng& rng, std::span<const double> bin_weights, double fraction);

std::size_t preference_bin(const Preference& w, std::size_t bins);

struct GaeResult {
  std::vector<RewardVector> advantages;
  std::vector<RewardVector> returns;  // advantages + values
};

/// Componentwise GAE. `values` has T + 1 entries, the last being the
/// bootstrap value (0 at a terminal state).
GaeResult compute_gae(std::span<const RewardVector> rewards, std::span<const RewardVector> values, double gamma,
                      double lambda);

struct Transition {
  std::vector<double> features;
  std::vector<char> mask;
  Preference preference{};
  std::size_t action = 0;
  double log_prob = 0.0;  // behavior policy
  RewardVector value{};   // behavior value estimate
  RewardVector advantage{};
  RewardVector target{};  // value target (GAE return)
};

struct Trajectory {
  Preference preference{};
  std::vector<Transition> steps;
  RewardVector reward{};  // terminal
  bool stuck = false;
  std::optional<MetricSet> raw;
  std::vector<int> actions;
};

/// Runs one episode with actions drawn from the policy (or argmax when `greedy`).
Trajectory run_episode(const PlacementEnv& env, const StateEncoder& encoder, const ActorCritic& net,
                       const Preference& w, Rng& rng, bool greedy);

/// Fills advantage/target of every step (sparse terminal reward).
void assign_advantages(Trajectory& t, double gamma, double lambda);

/// Minibatch arranged for the loss functions.
struct Batch {
  Matrix features;
  Matrix preferences;
  std::vector<char> masks;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  Matrix advantages;  // n x K
  Matrix targets;     // n x K

  static Batch from(std::span<const Transition* const> transitions);
  std::size_t size() const { return actions.size(); }
};

/// Per-transition scalarized advantages omega^T A, optionally standardized.
std::vector<double> scalarized_advantages(const Batch& batch, bool standardize);

/// PPO clipped surrogate (an objective to maximize).
Var clip_objective(Tape& tape, ActorCritic& net, const Batch& batch, double clip, bool standardize_advantages);
/// Mean |omega^T (V_pred - V_target)|.
Var value_loss(Tape& tape, ActorCritic& net, const Batch& batch);
/// Mean policy entropy over the batch states.
Var policy_entropy(Tape& tape, ActorCritic& net, const Batch& batch);

struct LossTerms {
  Var clip;
  Var value;
  Var entropy;
  Var objective;  // clip - c1 * value + c2 * entropy
};

LossTerms total_objective(Tape& tape, ActorCritic& net, const Batch& batch, double clip, double c1, double c2,
                          bool standardize_advantages);

struct TrainConfig {
  double gamma = 1.0;
  double lambda = 0.97;
  double clip = 0.2;
  double c1 = 0.5;
  double c2 = 0.01;
  double lr = 3e-4;
  std::size_t batch = 512;
  std::size_t epochs = 6;
  std::size_t buffer_episodes = 1000;
  std::size_t total_updates = 200;
  std::size_t bins = 10;
  double resample_fraction = 0.5;
  double resample_boost = 1.0;
  bool standardize_advantages = true;
  std::optional<Preference> fixed_preference;  // fixed-preference PPO baseline
  bool early_stop = true;
  double stop_threshold = 0.005;
  std::size_t stop_window = 20;
  std::size_t checkpoint_every = 10;
  std::size_t normalizer_samples = 1000;
  int threads = 1;
  std::uint64_t seed = 0;
  NetworkConfig network;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct UpdateLog {
  std::size_t update = 0;
  double lr = 0.0;
  double clip = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double objective = 0.0;
  double mean_return = 0.0;  // mean scalarized return over the buffer
  std::size_t episodes = 0;
  std::size_t transitions = 0;
  std::size_t stuck = 0;
  std::vector<std::optional<double>> bin_returns;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  std::function<void(const UpdateLog&)> on_update;
  /// Called with the update count (0 for the initial network).
  std::function<void(std::size_t, const ActorCritic&)> on_checkpoint;
};

struct TrainResult {
  ActorCritic net;
  std::vector<UpdateLog> log;
  std::size_t updates = 0;
  bool stopped_early = false;
  bool diverged = false;
  std::string message;
};

/// Alternates experience collection and clipped-PPO updates. The environment
/// must carry the fitted normalizer. Episode e of iteration u draws from
/// derive_seed(seed, {u, e}), so the result does not depend on `threads`.
TrainResult train(const PlacementEnv& env, const TrainConfig& config, const TrainHooks& hooks = {});

/// Network initialized exactly as train() initializes it.
ActorCritic initial_network(const PlacementEnv& env, const TrainConfig& config);

}  // namespace moppo
