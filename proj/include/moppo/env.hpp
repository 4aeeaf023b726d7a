#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "moppo/metrics.hpp"
#include "moppo/netlist.hpp"

namespace moppo {

inline constexpr std::size_t kObjectives = 2;

/// Preference over (r_WLC, r_A); non-negative, sums to 1.
using Preference = std::array<double, kObjectives>;
using RewardVector = std::array<double, kObjectives>;

/// Throws std::invalid_argument unless `w` lies on the simplex (1e-9 slack).
void check_preference(const Preference& w);

/// Normalized reward given to episodes where some macro had no legal cell.
inline constexpr double kStuckReward = -2.0;

struct PlacementState {
  explicit PlacementState(Placement p) : placement(std::move(p)) {}

  Placement placement;
  std::size_t cursor = 0;
  std::vector<char> occupancy;  // action cells covered by any placed macro
  std::vector<int> actions;     // chosen cell per placed order entry
  Preference preference{1.0, 0.0};
  bool done = false;
  bool stuck = false;
  RewardVector reward{0.0, 0.0};
  std::optional<MetricSet> raw;         // terminal, non-stuck only
  std::optional<MetricSet> normalized;  // terminal, non-stuck only
};

struct StepResult {
  RewardVector reward{0.0, 0.0};
  bool terminal = false;
};

/// Sequential macro placement on the canvas action grid. The environment
/// itself is immutable after construction; all episode data lives in
/// PlacementState, so one environment can serve many threads.
class PlacementEnv {
 public:
  PlacementEnv(const Netlist& netlist, RewardConfig config = {}, Normalizer normalizer = {});

  const Netlist& netlist() const { return *netlist_; }
  const RewardConfig& config() const { return config_; }
  const Normalizer& normalizer() const { return normalizer_; }
  void set_normalizer(const Normalizer& n) { normalizer_ = n; }

  /// Movable macros by decreasing area, ties by id.
  const std::vector<std::size_t>& order() const { return order_; }
  int grid_cols() const { return cols_; }
  int grid_rows() const { return rows_; }
  int action_count() const { return cols_ * rows_; }
  /// Action index = row * grid_cols + col.
  Point cell_center(int action) const;

  PlacementState reset(const Preference& preference) const;
  /// Legal cells for the cursor macro; throws std::logic_error on a done state.
  std::vector<char> legal_mask(const PlacementState& state) const;
  /// Commits the cursor macro at `action`. Illegal actions throw GeometryError
  /// and leave the state untouched.
  StepResult step(PlacementState& state, int action) const;

  /// Places the whole sequence; throws on an illegal or incomplete replay.
  PlacementState replay(std::span<const int> actions, const Preference& preference) const;

  /// Scores a placement whose macros are all placed.
  Evaluation score(const Placement& placement) const;
  RewardVector reward_of(const MetricSet& normalized) const;

  /// Placed macros as `place` records with the terminal metrics block.
  PlacementFile export_trace(const PlacementState& state) const;

 private:
  bool fits(const PlacementState& state, std::size_t macro, Point center) const;
  void finish(PlacementState& state) const;
  void mark_occupancy(PlacementState& state, std::size_t macro) const;

  const Netlist* netlist_;
  RewardConfig config_;
  Normalizer normalizer_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> fixed_macros_;
  int cols_ = 0, rows_ = 0;
  double cell_w_ = 0, cell_h_ = 0;
};

/// Draws uniformly among legal cells until the episode ends.
PlacementState uniform_rollout(const PlacementEnv& env, const Preference& preference, std::uint64_t seed);

struct NormalizerFit {
  Normalizer normalizer;
  std::vector<MetricSet> samples;  // raw metrics of non-stuck rollouts
  std::size_t stuck = 0;
  std::vector<std::string> warnings;

  /// `episode,wl,cong,anchor` rows.
  std::string samples_csv() const;
};

/// Averages raw metrics over rollouts of the initial policy. The policy head
/// starts at zero, so the initial policy is uniform over legal cells and the
/// rollouts are drawn that way directly. Episode i uses derive_seed(seed, {i}).
NormalizerFit fit_normalizer(const PlacementEnv& env, std::size_t samples, std::uint64_t seed, int threads = 1);

/// Normalizer with scales |mean| of the given samples (1 plus a warning when a mean is 0).
Normalizer normalizer_from_samples(std::span<const MetricSet> samples, std::vector<std::string>* warnings = nullptr);

}  // namespace moppo
