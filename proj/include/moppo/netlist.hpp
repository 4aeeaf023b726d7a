#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moppo/error.hpp"

namespace moppo {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle given by its lower-left and upper-right corners.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  static Rect centered(Point c, double w, double h) { return {c.x - w / 2, c.y - h / 2, c.x + w / 2, c.y + h / 2}; }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

/// Area of the intersection of two rectangles (0 when disjoint or touching).
double overlap_area(const Rect& a, const Rect& b);

/// True when the rectangles share interior area beyond `tol` in both axes.
bool overlaps(const Rect& a, const Rect& b, double tol = 1e-9);

struct Canvas {
  double width = 0.0;
  double height = 0.0;
  int grid_cols = 0;
  int grid_rows = 0;

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

enum class NodeKind { macro, std_cell, cluster, port };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);

struct Node {
  std::string id;
  NodeKind kind = NodeKind::macro;
  double width = 0.0;
  double height = 0.0;
  bool fixed = false;
  std::optional<Point> position;  // center

  double area() const { return width * height; }
  friend bool operator==(const Node&, const Node&) = default;
};

struct Pin {
  std::string id;
  std::size_t owner = 0;  // node index
  Point offset;           // from owner center

  friend bool operator==(const Pin&, const Pin&) = default;
};

struct Net {
  std::string id;
  std::vector<std::size_t> pins;  // pin indices

  friend bool operator==(const Net&, const Net&) = default;
};

struct Anchor {
  std::size_t macro = 0;  // node index
  Point target;
  double weight = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Mixed-size netlist on a canvas. Built incrementally through the add_*
/// methods, then sealed by finalize(), which validates every invariant and
/// builds the derived indices. A finalized netlist is treated as immutable
/// and may be shared across threads.
class Netlist {
 public:
  Netlist() = default;
  explicit Netlist(Canvas canvas) : canvas_(canvas) {}

  std::size_t add_node(Node node);
  std::size_t add_pin(std::string id, std::string_view owner_id, Point offset);
  std::size_t add_net(std::string id, std::span<const std::string> pin_ids);
  void add_anchor(std::string_view macro_id, Point target, double weight);
  void clear_anchors() { anchors_.clear(); }

  /// Validates all invariants and builds derived indices. Throws InputError subclasses.
  void finalize();

  const Canvas& canvas() const { return canvas_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Pin>& pins() const { return pins_; }
  const std::vector<Net>& nets() const { return nets_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }

  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::optional<std::size_t> find_node(std::string_view id) const;
  std::optional<std::size_t> find_pin(std::string_view id) const;
  std::optional<std::size_t> find_net(std::string_view id) const;
  /// Throws IntegrityError naming `id` when absent.
  std::size_t node_index(std::string_view id) const;

  // Derived indices, valid after finalize().
  const std::vector<std::size_t>& macros() const { return macros_; }
  const std::vector<std::size_t>& ports() const { return ports_; }
  /// Std-cells and clusters: nodes positioned by the cell placer rather than the policy.
  const std::vector<std::size_t>& soft_nodes() const { return soft_nodes_; }
  const std::vector<std::size_t>& std_cells() const { return std_cells_; }
  /// Nets touching node i (each net listed once).
  const std::vector<std::size_t>& nets_of(std::size_t node) const { return node_nets_[node]; }
  std::size_t degree(std::size_t node) const { return node_nets_[node].size(); }
  bool finalized() const { return finalized_; }

  friend bool operator==(const Netlist& a, const Netlist& b) {
    return a.canvas_ == b.canvas_ && a.nodes_ == b.nodes_ && a.pins_ == b.pins_ && a.nets_ == b.nets_ &&
           a.anchors_ == b.anchors_;
  }

 private:
  Canvas canvas_;
  std::vector<Node> nodes_;
  std::vector<Pin> pins_;
  std::vector<Net> nets_;
  std::vector<Anchor> anchors_;
  std::unordered_map<std::string, std::size_t> node_ids_;
  std::unordered_map<std::string, std::size_t> pin_ids_;
  std::unordered_map<std::string, std::size_t> net_ids_;

  std::vector<std::size_t> macros_, ports_, soft_nodes_, std_cells_;
  std::vector<std::vector<std::size_t>> node_nets_;
  bool finalized_ = false;
};

/// Parses the line-oriented netlist format:
///   canvas W H GRID_COLS GRID_ROWS
///   node ID KIND WIDTH HEIGHT [fixed X Y]
///   pin ID NODE_ID DX DY
///   net ID PIN_ID+
///   anchor NODE_ID X Y WEIGHT
/// Records may appear in any order; `#` starts a comment.
Netlist parse_netlist(std::string_view text);
Netlist read_netlist_file(const std::string& path);

std::string serialize_netlist(const Netlist& netlist);

/// SHA-256 (hex) of the canonical serialization.
std::string netlist_hash(const Netlist& netlist);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

/// Anchor at the canvas center for every movable macro, weighted by sqrt(area).
void set_center_anchors(Netlist& netlist);

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t macros = 4;
  /// Locality groups. With cells_per_cluster == 0 each group is emitted as a
  /// single pre-clustered node of kind `cluster`; otherwise each group holds
  /// cells_per_cluster std-cells.
  std::size_t clusters = 16;
  std::size_t cells_per_cluster = 0;
  std::size_t nets = 40;
  std::size_t ports = 4;
  Canvas canvas{64.0, 64.0, 16, 16};
  double macro_area_fraction = 0.3;
  double soft_area_fraction = 0.2;
  bool anchors = true;
};

/// Deterministic random netlist with Rent-like locality.
Netlist generate_synthetic(const SyntheticOptions& options);

/// Placement record as written to `place NODE_ID X Y` lines.
struct PlacedNode {
  std::string id;
  Point center;
};

struct PlacementFile {
  std::vector<PlacedNode> nodes;
  /// Ordered key/value pairs from the trailing `# metrics` block.
  std::vector<std::pair<std::string, double>> metrics;
};

std::string serialize_placement(const PlacementFile& file);
PlacementFile parse_placement(std::string_view text);

std::string read_text_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_text_file_atomic(const std::string& path, std::string_view content);

}  // namespace moppo
