#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moppo/env.hpp"
#include "moppo/network.hpp"

namespace moppo {

/// `lo:hi:step` over omega_1, endpoints included (step tolerance 1e-9).
std::vector<Preference> parse_preference_grid(std::string_view spec);
std::vector<Preference> preference_grid(double lo, double hi, double step);

struct EvaluationRow {
  Preference preference{};
  // Normalized rewards (larger is better).
  double wlc = 0.0;     // mean over sampled episodes (greedy when none)
  double anchor = 0.0;
  double eda = 0.0;
  double objective = 0.0;  // J: mean scalarized return
  double greedy_wlc = 0.0;
  double greedy_anchor = 0.0;
  double greedy_objective = 0.0;
  MetricSet greedy_raw;
  std::size_t episodes = 0;
  std::size_t stuck = 0;
  bool greedy_stuck = false;
  PlacementFile placement;  // greedy episode, with metrics block
  std::vector<int> actions;
  bool pareto = false;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  std::string netlist_hash;
  std::string checkpoint_hash;

  const EvaluationRow* find(const Preference& w, double tol = 1e-9) const;
  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& j);
};

/// For each preference: one greedy (argmax) episode plus `episodes` sampled
/// ones. Episode e at grid point i draws from derive_seed(seed, {i, e}).
EvaluationReport zero_shot_eval(const PlacementEnv& env, const ActorCritic& net, std::span<const Preference> grid,
                                std::size_t episodes, std::uint64_t seed, int threads = 1);

/// Non-dominated flags for reward points (larger is better in both components).
std::vector<bool> pareto_filter(std::span<const std::array<double, 2>> points);

/// Recomputes the pareto flags of a report from (wlc, anchor).
void mark_pareto(EvaluationReport& report);

/// |J_a(w) - J_b(w)|; throws std::invalid_argument when w is missing from either report.
double epsilon_gap(const EvaluationReport& a, const EvaluationReport& b, const Preference& w);

}  // namespace moppo
