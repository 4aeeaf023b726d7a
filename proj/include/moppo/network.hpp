#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moppo/autodiff.hpp"
#include "moppo/env.hpp"

namespace moppo {

/// Fixed-size state features in [-1, 1]:
///   occupancy density on an (up to) 8x8 summary of the action grid,
///   cursor macro width, height, area and degree,
///   total macro and soft-node area fractions,
///   centroid of placed macros, progress,
///   centroid and placed fraction of the cursor macro's placed neighbours,
///   the cursor macro's anchor target.
class StateEncoder {
 public:
  explicit StateEncoder(const PlacementEnv& env);

  std::size_t dim() const { return dim_; }
  std::vector<double> encode(const PlacementState& state) const;

 private:
  struct Neighbour {
    std::size_t node;
    double weight;
  };

  const PlacementEnv* env_;
  int summary_cols_ = 0, summary_rows_ = 0;
  std::size_t dim_ = 0;
  double max_degree_ = 1.0;
  double macro_area_fraction_ = 0.0;
  double soft_area_fraction_ = 0.0;
  std::vector<std::vector<Neighbour>> neighbours_;  // per order entry
  std::vector<std::optional<Point>> anchor_;        // per order entry
};

struct NetworkConfig {
  std::size_t hidden = 32;
  std::size_t preference_hidden = 8;
  std::size_t objectives = kObjectives;
};

/// Preference-conditioned policy and K independent value networks.
///
/// Each network: h1 = elu(x W1 + b1); p = tanh(w Wp + bp);
/// h2 = elu([h1, p] W2 + b2); out = h2 Wh + bh. The policy output is one logit
/// per action cell, the value output one scalar per copy. Trunk weights are
/// Xavier-uniform, biases and output layers start at zero.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(std::size_t input_dim, std::size_t actions, NetworkConfig config, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t actions() const { return actions_; }
  const NetworkConfig& config() const { return config_; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Masked log-probabilities, rows = batch. `mask` is row-major batch x actions.
  Var policy_log_probs(Tape& tape, const Matrix& x, const Matrix& preference, std::span<const char> mask);
  /// Value estimates, batch x objectives.
  Var values(Tape& tape, const Matrix& x, const Matrix& preference);

  /// Single-state conveniences (no gradient bookkeeping kept).
  std::vector<double> probabilities(std::span<const double> x, const Preference& w, std::span<const char> mask) const;
  std::vector<double> logits(std::span<const double> x, const Preference& w) const;
  RewardVector value(std::span<const double> x, const Preference& w) const;

  /// Builds a network from a parameter set (shapes are checked).
  static ActorCritic from_params(ParameterSet params, NetworkConfig config);

 private:
  Var trunk(Tape& tape, const std::string& prefix, const Matrix& x, const Matrix& preference);
  void add_network(const std::string& prefix, std::size_t outputs, std::uint64_t seed);

  std::size_t input_dim_ = 0;
  std::size_t actions_ = 0;
  NetworkConfig config_;
  ParameterSet params_;
};

Matrix preference_rows(std::span<const Preference> prefs);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over every parameter of a set.
class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config = {});

  /// Checks gradients (std::domain_error on NaN/Inf, parameters untouched), then updates.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  ParameterSet* params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Linear decay from lr0 at step 0 to 0.1 * lr0 at `total_steps`, constant afterwards.
double lr_schedule(double lr0, std::size_t step, std::size_t total_steps);

}  // namespace moppo
