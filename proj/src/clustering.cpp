#include "moppo/clustering.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "moppo/rng.hpp"

namespace moppo {

namespace {

/// Cell-level hypergraph: std-cells in id order, nets reduced to their distinct cells.
struct CellGraph {
  std::vector<std::size_t> node_of;   // cell -> netlist node index
  std::vector<double> weight;         // cell area (or 1 when all areas vanish)
  std::vector<std::vector<int>> nets;  // distinct cells per net, >= 2
  std::vector<std::vector<int>> cell_nets;
};

CellGraph build_cell_graph(const Netlist& nl) {
  CellGraph g;
  g.node_of = nl.std_cells();
  std::sort(g.node_of.begin(), g.node_of.end(),
            [&](std::size_t a, std::size_t b) { return nl.node(a).id < nl.node(b).id; });
  std::vector<int> cell_of(nl.nodes().size(), -1);
  for (std::size_t c = 0; c < g.node_of.size(); ++c) cell_of[g.node_of[c]] = static_cast<int>(c);

  double total = 0;
  for (std::size_t n : g.node_of) total += nl.node(n).area();
  for (std::size_t n : g.node_of) g.weight.push_back(total > 0 ? nl.node(n).area() : 1.0);

  g.cell_nets.assign(g.node_of.size(), {});
  for (const Net& net : nl.nets()) {
    std::vector<int> cells;
    for (std::size_t p : net.pins) {
      const int c = cell_of[nl.pins()[p].owner];
      if (c >= 0) cells.push_back(c);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    if (cells.size() < 2) continue;
    const int id = static_cast<int>(g.nets.size());
    for (int c : cells) g.cell_nets[c].push_back(id);
    g.nets.push_back(std::move(cells));
  }
  return g;
}

/// One bisection problem: a subset of cells with nets restricted to it.
class Bisection {
 public:
  Bisection(const CellGraph& g, const std::vector<int>& cells) : cells_(cells) {
    std::vector<int> local(g.node_of.size(), -1);
    for (std::size_t i = 0; i < cells.size(); ++i) local[cells[i]] = static_cast<int>(i);
    weight_.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) weight_[i] = g.weight[cells[i]];
    node_nets_.assign(cells.size(), {});
    std::vector<char> seen(g.nets.size(), 0);
    for (int c : cells) {
      for (int e : g.cell_nets[c]) {
        if (seen[e]) continue;
        seen[e] = 1;
        std::vector<int> members;
        for (int m : g.nets[e]) {
          if (local[m] >= 0) members.push_back(local[m]);
        }
        if (members.size() < 2) continue;
        const int id = static_cast<int>(nets_.size());
        for (int m : members) node_nets_[m].push_back(id);
        nets_.push_back(std::move(members));
      }
    }
    max_degree_ = 0;
    for (const auto& v : node_nets_) max_degree_ = std::max<int>(max_degree_, static_cast<int>(v.size()));
  }

  /// Returns side (0 = left) per local cell; left area within [lo, hi].
  std::vector<int> run(double target, double lo, double hi, Rng& rng) {
    const int n = static_cast<int>(cells_.size());
    side_.assign(n, 1);
    grow(target, hi, static_cast<int>(rng.below(n)));
    // Granular weights can miss the window; the k-way repair pass settles it.
    lo = std::min(lo, area_left_);
    hi = std::max(hi, area_left_);
    for (int pass = 0; pass < 16; ++pass) {
      if (!fm_pass(lo, hi)) break;
    }
    return side_;
  }

 private:
  void grow(double target, double hi, int seed) {
    const int n = static_cast<int>(cells_.size());
    std::vector<int> score(n, 0);
    std::set<std::pair<int, int>> queue;  // (-score, cell)
    for (int v = 0; v < n; ++v) queue.insert({0, v});
    area_left_ = 0;
    auto take = [&](int v) {
      queue.erase({-score[v], v});
      side_[v] = 0;
      area_left_ += weight_[v];
      for (int e : node_nets_[v]) {
        for (int u : nets_[e]) {
          if (side_[u] == 0) continue;
          queue.erase({-score[u], u});
          ++score[u];
          queue.insert({-score[u], u});
        }
      }
    };
    if (weight_[seed] <= hi) take(seed);
    while (area_left_ < target) {
      int pick = -1;
      for (const auto& [neg, v] : queue) {
        if (area_left_ + weight_[v] <= hi + 1e-12) {
          pick = v;
          break;
        }
      }
      if (pick < 0) break;
      take(pick);
    }
  }

  int gain_of(int v) const {
    const int s = side_[v];
    int g = 0;
    for (int e : node_nets_[v]) {
      if (count_[e][s] == 1) ++g;
      if (count_[e][1 - s] == 0) --g;
    }
    return g;
  }

  bool fm_pass(double lo, double hi) {
    const int n = static_cast<int>(cells_.size());
    count_.assign(nets_.size(), {0, 0});
    for (std::size_t e = 0; e < nets_.size(); ++e) {
      for (int v : nets_[e]) ++count_[e][side_[v]];
    }
    const int offset = max_degree_;
    std::vector<std::set<int>> bucket[2];
    bucket[0].assign(2 * max_degree_ + 1, {});
    bucket[1].assign(2 * max_degree_ + 1, {});
    std::vector<int> gain(n);
    std::vector<char> locked(n, 0);
    for (int v = 0; v < n; ++v) {
      gain[v] = gain_of(v);
      bucket[side_[v]][gain[v] + offset].insert(v);
    }

    auto feasible = [&](int v) {
      const double a = side_[v] == 0 ? area_left_ - weight_[v] : area_left_ + weight_[v];
      return a >= lo - 1e-9 && a <= hi + 1e-9;
    };

    std::vector<int> moves;
    int cum = 0, best_cum = 0;
    std::size_t best_len = 0;
    while (true) {
      int pick = -1, pick_gain = 0;
      for (int g = 2 * max_degree_; g >= 0 && pick < 0; --g) {
        int cand[2] = {-1, -1};
        for (int s = 0; s < 2; ++s) {
          for (int v : bucket[s][g]) {
            if (feasible(v)) {
              cand[s] = v;
              break;
            }
          }
        }
        if (cand[0] >= 0 && (cand[1] < 0 || cand[0] < cand[1])) pick = cand[0];
        else if (cand[1] >= 0) pick = cand[1];
        pick_gain = g - offset;
      }
      if (pick < 0) break;

      bucket[side_[pick]][gain[pick] + offset].erase(pick);
      locked[pick] = 1;
      const int from = side_[pick];
      side_[pick] = 1 - from;
      area_left_ += from == 0 ? -weight_[pick] : weight_[pick];
      for (int e : node_nets_[pick]) {
        --count_[e][from];
        ++count_[e][1 - from];
      }
      for (int e : node_nets_[pick]) {
        for (int u : nets_[e]) {
          if (locked[u]) continue;
          const int g = gain_of(u);
          if (g != gain[u]) {
            bucket[side_[u]][gain[u] + offset].erase(u);
            gain[u] = g;
            bucket[side_[u]][g + offset].insert(u);
          }
        }
      }
      cum += pick_gain;
      moves.push_back(pick);
      if (cum > best_cum) {
        best_cum = cum;
        best_len = moves.size();
      }
    }
    for (std::size_t i = moves.size(); i > best_len; --i) {
      const int v = moves[i - 1];
      const int from = side_[v];
      side_[v] = 1 - from;
      area_left_ += from == 0 ? -weight_[v] : weight_[v];
    }
    return best_cum > 0;
  }

  std::vector<int> cells_;
  std::vector<double> weight_;
  std::vector<std::vector<int>> nets_;
  std::vector<std::vector<int>> node_nets_;
  std::vector<std::array<int, 2>> count_;
  std::vector<int> side_;
  double area_left_ = 0;
  int max_degree_ = 0;
};

/// Moves single cells out of overfull and into underfull clusters until every
/// area lies in [lo, hi]. Each move picks the cell with the lowest cut cost.
void repair_balance(const CellGraph& g, std::size_t k, double lo, double hi, std::vector<std::size_t>& assign) {
  const std::size_t n = assign.size();
  std::vector<double> area(k, 0.0);
  for (std::size_t c = 0; c < n; ++c) area[assign[c]] += g.weight[c];
  // Nets of c touching cluster `to` minus nets where c is the last member of its own cluster.
  auto cost = [&](std::size_t c, std::size_t to) {
    int gain = 0;
    for (int e : g.cell_nets[c]) {
      bool to_present = false, from_other = false;
      for (int u : g.nets[e]) {
        if (static_cast<std::size_t>(u) == c) continue;
        if (assign[u] == to) to_present = true;
        if (assign[u] == assign[c]) from_other = true;
      }
      gain += (to_present ? 1 : 0) - (from_other ? 1 : 0);
    }
    return -gain;
  };
  const std::size_t limit = 4 * n + 16;
  for (std::size_t step = 0; step < limit; ++step) {
    std::size_t worst = k;
    double excess = 1e-9;
    for (std::size_t b = 0; b < k; ++b) {
      const double v = std::max(area[b] - hi, lo - area[b]);
      if (v > excess) {
        excess = v;
        worst = b;
      }
    }
    if (worst == k) return;
    const bool over = area[worst] > hi;
    std::size_t best_c = n, best_to = k;
    int best_cost = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t from = assign[c];
      if (over ? from != worst : from == worst) continue;
      const double w = g.weight[c];
      if (over) {
        for (std::size_t to = 0; to < k; ++to) {
          if (to == worst || area[to] + w > hi + 1e-9) continue;
          const int cc = cost(c, to);
          if (best_c == n || cc < best_cost) best_c = c, best_to = to, best_cost = cc;
        }
      } else if (area[from] - w >= lo - 1e-9) {
        const int cc = cost(c, worst);
        if (best_c == n || cc < best_cost) best_c = c, best_to = worst, best_cost = cc;
      }
    }
    if (best_c == n) return;
    area[assign[best_c]] -= g.weight[best_c];
    area[best_to] += g.weight[best_c];
    assign[best_c] = best_to;
  }
}

void bisect_recursive(const CellGraph& g, const std::vector<int>& cells, std::size_t k, std::size_t offset,
                      double lo, double hi, std::uint64_t seed, std::uint64_t& counter, std::vector<std::size_t>& out) {
  if (k == 1) {
    for (int c : cells) out[c] = offset;
    return;
  }
  double area = 0;
  for (int c : cells) area += g.weight[c];
  const std::size_t kl = k / 2, kr = k - kl;
  double win_lo = std::max(kl * lo, area - kr * hi);
  double win_hi = std::min(kl * hi, area - kr * lo);
  if (cells.empty()) return;
  // Keep only the middle half of the feasible window so deeper levels retain slack.
  const double target = area * static_cast<double>(kl) / static_cast<double>(k);
  double grain = 0;
  for (int c : cells) grain = std::max(grain, g.weight[c]);
  const double half = std::max((win_hi - win_lo) / 4, grain);
  if (win_lo > win_hi) win_lo = win_hi = target;
  const double a = std::max(win_lo, target - half), b_hi = std::min(win_hi, target + half);
  Rng rng(derive_seed(seed, {counter++}));
  Bisection b(g, cells);
  const auto side = b.run(target, a, b_hi, rng);
  std::vector<int> left, right;
  for (std::size_t i = 0; i < cells.size(); ++i) (side[i] == 0 ? left : right).push_back(cells[i]);
  bisect_recursive(g, left, kl, offset, lo, hi, seed, counter, out);
  bisect_recursive(g, right, kr, offset + kl, lo, hi, seed, counter, out);
}

}  // namespace

ClusterMap partition(const Netlist& nl, std::size_t target, double tol, std::uint64_t seed) {
  const std::size_t n = nl.std_cells().size();
  if (target < 1 || target > n) throw std::invalid_argument("partition: target_clusters must lie in [1, #std-cells]");
  if (!(tol > 0.0) || tol > 0.5) throw std::invalid_argument("partition: balance_tolerance must lie in (0, 0.5]");

  ClusterMap map;
  map.cluster_count = target;
  if (target == n) {
    for (std::size_t i = 0; i < n; ++i) map.assignment.emplace(nl.node(nl.std_cells()[i]).id, i);
    return map;
  }

  const CellGraph g = build_cell_graph(nl);
  const double total = std::accumulate(g.weight.begin(), g.weight.end(), 0.0);
  const double ideal = total / static_cast<double>(target);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> assign(n, 0);
  std::uint64_t counter = 0;
  const double lo = (1.0 - tol) * ideal, hi = (1.0 + tol) * ideal;
  bisect_recursive(g, all, target, 0, lo, hi, seed, counter, assign);
  repair_balance(g, target, lo, hi, assign);
  std::vector<double> area(target, 0.0);
  for (std::size_t c = 0; c < n; ++c) area[assign[c]] += g.weight[c];
  for (double a : area) {
    if (a < lo - 1e-9 || a > hi + 1e-9) {
      throw InfeasibleError("partition: cannot balance " + std::to_string(n) + " cells into " + std::to_string(target) +
                            " clusters within tolerance " + format_number(tol));
    }
  }
  for (std::size_t c = 0; c < n; ++c) map.assignment.emplace(nl.node(g.node_of[c]).id, assign[c]);
  return map;
}

std::size_t cut_size(const Netlist& nl, const ClusterMap& map) {
  std::size_t cut = 0;
  for (const Net& net : nl.nets()) {
    std::optional<std::size_t> first;
    bool spans = false;
    for (std::size_t p : net.pins) {
      const Node& owner = nl.node(nl.pins()[p].owner);
      if (owner.kind != NodeKind::std_cell) continue;
      const std::size_t c = map.assignment.at(owner.id);
      if (!first) first = c;
      else if (*first != c) spans = true;
    }
    if (spans) ++cut;
  }
  return cut;
}

std::vector<std::vector<std::string>> canonical_blocks(const ClusterMap& map) {
  std::vector<std::vector<std::string>> blocks(map.cluster_count);
  for (const auto& [id, c] : map.assignment) blocks[c].push_back(id);
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::sort(blocks.begin(), blocks.end());
  return blocks;
}

std::string serialize_cluster_map(const ClusterMap& map) {
  std::string out = "clusters " + std::to_string(map.cluster_count) + "\n";
  for (const auto& [id, c] : map.assignment) out += "assign " + id + ' ' + std::to_string(c) + '\n';
  return out;
}

ClusterMap parse_cluster_map(std::string_view text) {
  ClusterMap map;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw) || kw[0] == '#') continue;
    if (kw == "clusters") {
      if (!(ls >> map.cluster_count)) throw ParseError(lineno, 10, "expected cluster count");
      header = true;
    } else if (kw == "assign") {
      std::string id;
      std::size_t c;
      if (!(ls >> id >> c)) throw ParseError(lineno, 8, "expected 'assign CELL CLUSTER'");
      map.assignment[id] = c;
    } else {
      throw ParseError(lineno, 1, "unknown record '" + kw + "'");
    }
  }
  if (!header) throw ParseError(lineno + 1, 1, "missing 'clusters' record");
  for (const auto& [id, c] : map.assignment) {
    if (c >= map.cluster_count) throw InputError("cluster index out of range for '" + id + "'");
  }
  return map;
}

ClusteredNetlist build_clustered_netlist(const Netlist& nl, const ClusterMap& map) {
  std::size_t covered = 0;
  for (std::size_t i : nl.std_cells()) {
    const auto it = map.assignment.find(nl.node(i).id);
    if (it == map.assignment.end()) {
      throw IntegrityError(nl.node(i).id, "cluster map does not cover std-cell '" + nl.node(i).id + "'");
    }
    if (it->second >= map.cluster_count) throw InputError("cluster index out of range for '" + it->first + "'");
    ++covered;
  }
  if (covered != map.assignment.size()) {
    for (const auto& [id, c] : map.assignment) {
      auto idx = nl.find_node(id);
      if (!idx || nl.node(*idx).kind != NodeKind::std_cell) {
        throw IntegrityError(id, "cluster map names '" + id + "', which is not a std-cell of this netlist");
      }
    }
  }

  ClusteredNetlist out{Netlist(nl.canvas()), map, {}};
  Netlist& cn = out.netlist;
  for (const Node& n : nl.nodes()) {
    if (n.kind != NodeKind::std_cell) cn.add_node(n);
  }
  std::vector<double> area(map.cluster_count, 0.0);
  for (std::size_t i : nl.std_cells()) area[map.assignment.at(nl.node(i).id)] += nl.node(i).area();
  auto unique_id = [&](std::string base, auto&& exists) {
    while (exists(base)) base += "_";
    return base;
  };
  std::vector<std::string> cluster_pin(map.cluster_count);
  for (std::size_t c = 0; c < map.cluster_count; ++c) {
    const std::string id = unique_id("cl" + std::to_string(c), [&](const std::string& s) { return nl.find_node(s).has_value(); });
    const double side = std::sqrt(area[c]);
    cn.add_node({id, NodeKind::cluster, side, side, false, std::nullopt});
    out.cluster_ids.push_back(id);
  }
  for (const Pin& p : nl.pins()) {
    const Node& owner = nl.node(p.owner);
    if (owner.kind != NodeKind::std_cell) cn.add_pin(p.id, owner.id, p.offset);
  }
  for (std::size_t c = 0; c < map.cluster_count; ++c) {
    cluster_pin[c] = unique_id(out.cluster_ids[c] + ".c", [&](const std::string& s) { return cn.find_pin(s).has_value(); });
    cn.add_pin(cluster_pin[c], out.cluster_ids[c], {});
  }
  for (const Net& net : nl.nets()) {
    std::vector<std::string> pins;
    bool only_clusters = true;
    for (std::size_t p : net.pins) {
      const Pin& pin = nl.pins()[p];
      const Node& owner = nl.node(pin.owner);
      std::string id;
      if (owner.kind == NodeKind::std_cell) {
        id = cluster_pin[map.assignment.at(owner.id)];
      } else {
        id = pin.id;
        only_clusters = false;
      }
      if (std::find(pins.begin(), pins.end(), id) == pins.end()) pins.push_back(std::move(id));
    }
    if (only_clusters && pins.size() == 1) continue;
    cn.add_net(net.id, pins);
  }
  for (const Anchor& a : nl.anchors()) cn.add_anchor(nl.node(a.macro).id, a.target, a.weight);
  cn.finalize();
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double scale = std::max({std::abs(mx), std::abs(my), 1.0});
  if (sxx <= 1e-24 * scale * scale * n || syy <= 1e-24 * scale * scale * n) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------- candidates

namespace {

// HPWL over nets restricted to macro and port pins.
double macro_proxy_wirelength(const Placement& pl) {
  const Netlist& nl = pl.netlist();
  double total = 0;
  for (const Net& net : nl.nets()) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    int count = 0;
    for (std::size_t p : net.pins) {
      const std::size_t owner = nl.pins()[p].owner;
      const NodeKind kind = nl.node(owner).kind;
      if ((kind != NodeKind::macro && kind != NodeKind::port) || !pl.placed(owner)) continue;
      const Point q = pl.pin_position(p);
      x0 = std::min(x0, q.x);
      x1 = std::max(x1, q.x);
      y0 = std::min(y0, q.y);
      y1 = std::max(y1, q.y);
      ++count;
    }
    if (count >= 2) total += (x1 - x0) + (y1 - y0);
  }
  return total;
}

std::vector<Point> legal_centers(const Placement& pl, std::size_t macro, std::span<const std::size_t> placed) {
  const Netlist& nl = pl.netlist();
  const Canvas& c = nl.canvas();
  const Node& n = nl.node(macro);
  std::vector<Point> out;
  for (int r = 0; r < c.grid_rows; ++r) {
    for (int col = 0; col < c.grid_cols; ++col) {
      const Point p{(col + 0.5) * c.width / c.grid_cols, (r + 0.5) * c.height / c.grid_rows};
      const Rect rect = Rect::centered(p, n.width, n.height);
      if (rect.x0 < -1e-9 || rect.y0 < -1e-9 || rect.x1 > c.width + 1e-9 || rect.y1 > c.height + 1e-9) continue;
      bool ok = true;
      for (std::size_t o : placed) {
        if (o != macro && overlaps(rect, pl.footprint(o))) {
          ok = false;
          break;
        }
      }
      if (ok) out.push_back(p);
    }
  }
  return out;
}

}  // namespace

std::vector<PlacementFile> generate_candidate_placements(const Netlist& nl, std::size_t count, std::uint64_t seed,
                                                         const RewardConfig& config) {
  Rng rng(seed);
  std::vector<std::size_t> order;
  std::vector<std::size_t> fixed_macros;
  for (std::size_t m : nl.macros()) (nl.node(m).fixed ? fixed_macros : order).push_back(m);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nl.node(a).area() != nl.node(b).area()) return nl.node(a).area() > nl.node(b).area();
    return nl.node(a).id < nl.node(b).id;
  });

  struct Scored {
    double eda;
    PlacementFile file;
  };
  std::vector<Scored> pool;
  const std::size_t pool_size = 2 * count;
  for (std::size_t attempt = 0; pool.size() < pool_size && attempt < 50 * pool_size + 100; ++attempt) {
    Placement pl(nl);
    std::vector<std::size_t> placed = fixed_macros;
    bool stuck = false;
    for (std::size_t m : order) {
      auto cands = legal_centers(pl, m, placed);
      if (cands.empty()) {
        stuck = true;
        break;
      }
      pl.set(m, cands[rng.below(cands.size())]);
      placed.push_back(m);
    }
    if (stuck) continue;
    const std::size_t steps = rng.below(order.size() + 1);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t m = order[rng.below(order.size())];
      const Point before = pl.at(m);
      double best = macro_proxy_wirelength(pl);
      Point best_p = before;
      for (const Point& p : legal_centers(pl, m, placed)) {
        pl.set(m, p);
        const double w = macro_proxy_wirelength(pl);
        if (w < best - 1e-12) {
          best = w;
          best_p = p;
        }
      }
      pl.set(m, best_p);
    }
    const Evaluation ev = evaluate_placement(pl, config);
    pool.push_back({ev.raw.eda, pl.export_nodes(false)});
  }
  if (pool.size() < count) throw InfeasibleError("could not generate enough legal candidate placements");
  std::stable_sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) { return a.eda > b.eda; });
  std::vector<PlacementFile> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(std::move(pool[i].file));
  return out;
}

CandidateMetrics score_candidates(const Netlist& nl, std::span<const PlacementFile> candidates, const RewardConfig& config,
                                  double* seconds_per_candidate) {
  CandidateMetrics m;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& cand : candidates) {
    Placement pl(nl);
    pl.apply(cand);
    const Evaluation ev = evaluate_placement(pl, config);
    m.wl.push_back(ev.raw.wl);
    m.cong.push_back(ev.raw.cong);
  }
  if (seconds_per_candidate) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *seconds_per_candidate = candidates.empty() ? 0.0 : s / static_cast<double>(candidates.size());
  }
  return m;
}

CorrelationReport select_cluster_count(const Netlist& nl, std::span<const PlacementFile> candidates,
                                       std::span<const std::size_t> counts, const CorrelationOptions& options) {
  if (candidates.size() < 5) throw std::invalid_argument("select_cluster_count: at least 5 candidate placements are required");
  if (counts.empty() || !std::is_sorted(counts.begin(), counts.end())) {
    throw std::invalid_argument("select_cluster_count: counts must be non-empty and ascending");
  }
  const CandidateMetrics truth = score_candidates(nl, candidates, options.reward);

  CorrelationReport report;
  for (std::size_t k : counts) {
    const ClusterMap map = partition(nl, k, options.balance_tolerance, options.seed);
    const ClusteredNetlist cn = build_clustered_netlist(nl, map);
    CorrelationRow row;
    row.cluster_count = k;
    const CandidateMetrics approx = score_candidates(cn.netlist, candidates, options.reward, &row.reward_seconds);
    row.wl_correlation = pearson(approx.wl, truth.wl);
    row.cong_correlation = pearson(approx.cong, truth.cong);
    report.rows.push_back(row);
  }
  report.chosen = counts.back();
  report.fallback = true;
  for (const auto& row : report.rows) {
    if (row.wl_correlation && row.cong_correlation && *row.wl_correlation > options.threshold &&
        *row.cong_correlation > options.threshold) {
      report.chosen = row.cluster_count;
      report.fallback = false;
      break;
    }
  }
  return report;
}

std::string CorrelationReport::to_csv(bool with_seconds) const {
  std::string out = with_seconds ? "cluster_count,wl_correlation,cong_correlation,reward_seconds\n"
                                 : "cluster_count,wl_correlation,cong_correlation\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.cluster_count) + ',' + opt(r.wl_correlation) + ',' + opt(r.cong_correlation);
    out += with_seconds ? ',' + format_number(r.reward_seconds) + '\n' : "\n";
  }
  return out;
}

}  // namespace moppo
