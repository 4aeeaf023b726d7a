#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moppo/metrics.hpp"
#include "moppo/netlist.hpp"

namespace moppo {

/// Assignment of every std-cell (by node id) to a dense cluster index.
struct ClusterMap {
  std::map<std::string, std::size_t> assignment;
  std::size_t cluster_count = 0;

  friend bool operator==(const ClusterMap&, const ClusterMap&) = default;
};

/// Recursive min-cut bisection with Fiduccia-Mattheyses refinement.
///
/// Every cluster's area ends within (1 +/- balance_tolerance) of
/// total_area / target_clusters; an InfeasibleError is raised when that
/// cannot be met. Cells are processed in id order and FM ties break toward
/// the lowest id, so the resulting set partition is independent of the
/// declaration order. `seed` picks the growth seed of each bisection.
ClusterMap partition(const Netlist& netlist, std::size_t target_clusters, double balance_tolerance = 0.1,
                     std::uint64_t seed = 0);

/// Nets whose std-cells fall in two or more clusters.
std::size_t cut_size(const Netlist& netlist, const ClusterMap& map);

/// Canonical form of a cluster map: the set partition as sorted member lists.
std::vector<std::vector<std::string>> canonical_blocks(const ClusterMap& map);

std::string serialize_cluster_map(const ClusterMap& map);
ClusterMap parse_cluster_map(std::string_view text);

/// Netlist with std-cells collapsed into square cluster nodes (pin at the
/// center). Macros, ports and existing clusters are copied unchanged; nets
/// internal to one cluster are dropped; repeated cluster pins in a net are merged.
struct ClusteredNetlist {
  Netlist netlist;
  ClusterMap map;
  std::vector<std::string> cluster_ids;  // node id of each cluster index
};

ClusteredNetlist build_clustered_netlist(const Netlist& netlist, const ClusterMap& map);

/// Pearson correlation; empty when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Random legal macro placements improved by greedy single-macro moves and
/// ranked by the unclustered EDA objective; the best `count` are returned.
std::vector<PlacementFile> generate_candidate_placements(const Netlist& netlist, std::size_t count, std::uint64_t seed,
                                                         const RewardConfig& config = {});

struct CorrelationRow {
  std::size_t cluster_count = 0;
  std::optional<double> wl_correlation;
  std::optional<double> cong_correlation;
  double reward_seconds = 0.0;  // mean per-candidate clustered reward time
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  std::size_t chosen = 0;
  bool fallback = false;  // no count met the threshold; chosen is the largest

  /// Timings vary between runs, so artifacts are written without them.
  std::string to_csv(bool with_seconds = true) const;
};

struct CorrelationOptions {
  double threshold = 0.85;
  double balance_tolerance = 0.1;
  std::uint64_t seed = 0;
  RewardConfig reward;
};

/// Raw ℓ_WL / ℓ_C of each candidate on the given netlist.
struct CandidateMetrics {
  std::vector<double> wl;
  std::vector<double> cong;
};

CandidateMetrics score_candidates(const Netlist& netlist, std::span<const PlacementFile> candidates,
                                  const RewardConfig& config, double* seconds_per_candidate = nullptr);

/// Picks the smallest cluster count whose clustered wirelength and congestion
/// both correlate above the threshold with the unclustered metrics.
CorrelationReport select_cluster_count(const Netlist& netlist, std::span<const PlacementFile> candidates,
                                       std::span<const std::size_t> counts, const CorrelationOptions& options = {});

}  // namespace moppo
