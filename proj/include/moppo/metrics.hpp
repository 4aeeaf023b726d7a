#pragma once

#include <array>
#include <cstddef>
#include <cstdlib>
#include <optional>
#include <span>
#include <vector>

#include "moppo/netlist.hpp"

namespace moppo {

/// Node centers for one netlist. Fixed nodes start at their fixed position.
class Placement {
 public:
  explicit Placement(const Netlist& netlist);

  const Netlist& netlist() const { return *netlist_; }
  bool placed(std::size_t node) const { return placed_[node] != 0; }
  Point at(std::size_t node) const { return pos_[node]; }
  void set(std::size_t node, Point center) {
    pos_[node] = center;
    placed_[node] = 1;
  }
  void unset(std::size_t node) { placed_[node] = 0; }
  Rect footprint(std::size_t node) const;
  /// Absolute pin coordinate; throws GeometryError when the owner is unplaced.
  Point pin_position(std::size_t pin) const;

  /// Applies `place` records by node id. Unknown ids raise IntegrityError.
  void apply(const PlacementFile& file);
  /// Placed nodes of the requested kinds as `place` records, in node order.
  PlacementFile export_nodes(bool include_soft) const;

 private:
  const Netlist* netlist_;
  std::vector<Point> pos_;
  std::vector<char> placed_;
};

/// Every movable macro placed, nodes inside the canvas, macros pairwise
/// disjoint. Throws GeometryError describing the first violation.
void validate_macro_placement(const Placement& placement);

struct GCellGrid {
  int cols = 16;
  int rows = 16;
  double cell_w = 1.0;
  double cell_h = 1.0;
  double h_capacity = 10.0;
  double v_capacity = 10.0;

  std::size_t h_edges() const { return static_cast<std::size_t>(cols - 1) * rows; }
  std::size_t v_edges() const { return static_cast<std::size_t>(cols) * (rows - 1); }
  int col_of(double x) const;
  int row_of(double y) const;
};

/// Square-ish g-cells whose side is the mean soft-node side, with the grid
/// clamped to [16, 64] cells per axis.
GCellGrid make_gcell_grid(const Netlist& netlist, double capacity = 10.0);

/// Per-edge routing demand. Horizontal edge (c, r)-(c+1, r) lives at
/// h_usage[r * (cols - 1) + c]; vertical edge (c, r)-(c, r+1) at v_usage[r * cols + c].
struct CongestionMap {
  GCellGrid grid;
  std::vector<double> h_usage;
  std::vector<double> v_usage;

  /// usage / capacity for every g-edge, horizontal edges first.
  std::vector<double> congestion() const;
  double total_usage() const;
};

struct Segment {
  int c0 = 0, r0 = 0, c1 = 0, r1 = 0;
  int length() const { return std::abs(c1 - c0) + std::abs(r1 - r0); }
};

/// Two-pin segments: direct for two distinct g-cells, otherwise a star from
/// each pin g-cell to the g-cell of the pin centroid.
std::vector<Segment> decompose_nets(const Placement& placement, const GCellGrid& grid);

struct RouteOptions {
  int max_rounds = 8;
  double history_increment = 0.5;
  double overflow_penalty = 1.0;
};

/// Negotiated L-shape global routing.
CongestionMap route_segments(std::span<const Segment> segments, const GCellGrid& grid, const RouteOptions& options = {});
CongestionMap global_route(const Placement& placement, const GCellGrid& grid, const RouteOptions& options = {});

inline constexpr std::array<double, 4> kDefaultAceKs{0.5, 1.0, 2.0, 5.0};

/// ACE(k) for each k (percent), over the pooled edge congestion values.
std::vector<double> ace_values(std::span<const double> congestion, std::span<const double> ks);
/// Congestion objective: minus the mean of ACE(k) over `ks`.
double congestion_cost(std::span<const double> congestion, std::span<const double> ks = kDefaultAceKs);
double congestion_cost(const CongestionMap& map, std::span<const double> ks = kDefaultAceKs);

/// Wirelength objective: minus the total half-perimeter wirelength.
double hpwl(const Placement& placement);

/// Anchor objective: minus the weighted Euclidean distance of macro centers to targets.
double anchor_distance(const Placement& placement, std::span<const Anchor> anchors);

struct EdaWeights {
  double alpha = 0.991;
  double beta = 0.009;
  double delta = 1.0;
};

struct MetricSet {
  double wl = 0.0;
  double cong = 0.0;
  double anchor = 0.0;
  double eda = 0.0;

  /// alpha * wl + beta * cong
  double wlc(const EdaWeights& w) const { return w.alpha * wl + w.beta * cong; }
};

double eda_objective(double wl, double cong, double anchor, const EdaWeights& weights);
MetricSet make_metric_set(double wl, double cong, double anchor, const EdaWeights& weights);

struct Normalizer {
  double wl_scale = 1.0;
  double cong_scale = 1.0;
  double anchor_scale = 1.0;
  std::size_t sample_count = 0;

  MetricSet normalize(const MetricSet& raw, const EdaWeights& weights) const;
};

struct SpreadOptions {
  int iterations = 100;
};

/// Positions every non-fixed std-cell/cluster with net attraction plus
/// density diffusion on the g-cell grid, then moves any node whose center
/// landed inside a macro to the nearest free g-cell. Macros must be placed.
Placement place_clusters(const Placement& placement, const GCellGrid& grid, const SpreadOptions& options = {});
Placement place_clusters(const Placement& placement, int iterations = 100);

struct RewardConfig {
  EdaWeights weights;
  double capacity = 10.0;
  SpreadOptions spread;
  RouteOptions route;
  std::vector<double> ks{kDefaultAceKs.begin(), kDefaultAceKs.end()};
};

struct Evaluation {
  Placement placement;  // includes soft-node positions
  MetricSet raw;
  std::vector<double> ace;  // ACE(k) per configured k
  CongestionMap congestion;
};

/// Full proxy pipeline: spread soft nodes, HPWL, route, ACE, anchors.
/// `anchors` defaults to the netlist's anchors when null.
Evaluation evaluate_placement(const Placement& macros_placed, const RewardConfig& config,
                              std::optional<std::span<const Anchor>> anchors = std::nullopt);

}  // namespace moppo
