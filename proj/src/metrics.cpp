#include "moppo/metrics.hpp"


#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <string>

namespace moppo {

// ---------------------------------------------------------------- Placement

Placement::Placement(const Netlist& netlist)
    : netlist_(&netlist), pos_(netlist.nodes().size()), placed_(netlist.nodes().size(), 0) {
  for (std::size_t i = 0; i < netlist.nodes().size(); ++i) {
    const Node& n = netlist.node(i);
    if (n.position && n.fixed) set(i, *n.position);
  }
}

Rect Placement::footprint(std::size_t node) const {
  const Node& n = netlist_->node(node);
  return Rect::centered(pos_[node], n.width, n.height);
}

Point Placement::pin_position(std::size_t pin) const {
  const Pin& p = netlist_->pins()[pin];
  if (!placed_[p.owner]) {
    throw GeometryError("node '" + netlist_->node(p.owner).id + "' is not placed");
  }
  return {pos_[p.owner].x + p.offset.x, pos_[p.owner].y + p.offset.y};
}

void Placement::apply(const PlacementFile& file) {
  for (const auto& rec : file.nodes) {
    const std::size_t i = netlist_->node_index(rec.id);
    if (netlist_->node(i).fixed) continue;
    set(i, rec.center);
  }
}

PlacementFile Placement::export_nodes(bool include_soft) const {
  PlacementFile out;
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    const Node& n = netlist_->node(i);
    const bool want = n.kind == NodeKind::macro || (include_soft && (n.kind == NodeKind::cluster || n.kind == NodeKind::std_cell));
    if (want && placed_[i]) out.nodes.push_back({n.id, pos_[i]});
  }
  return out;
}

void validate_macro_placement(const Placement& pl) {
  const Netlist& nl = pl.netlist();
  const Canvas& c = nl.canvas();
  constexpr double tol = 1e-9;
  for (std::size_t m : nl.macros()) {
    const Node& n = nl.node(m);
    if (!pl.placed(m)) throw GeometryError("macro '" + n.id + "' is not placed");
    const Rect r = pl.footprint(m);
    if (r.x0 < -tol || r.y0 < -tol || r.x1 > c.width + tol || r.y1 > c.height + tol) {
      throw GeometryError("macro '" + n.id + "' extends outside the canvas");
    }
  }
  const auto& ms = nl.macros();
  for (std::size_t a = 0; a < ms.size(); ++a) {
    for (std::size_t b = a + 1; b < ms.size(); ++b) {
      if (overlaps(pl.footprint(ms[a]), pl.footprint(ms[b]))) {
        throw GeometryError("macros '" + nl.node(ms[a]).id + "' and '" + nl.node(ms[b]).id + "' overlap");
      }
    }
  }
}

// ---------------------------------------------------------------- grid

int GCellGrid::col_of(double x) const {
  return std::clamp(static_cast<int>(std::floor(x / cell_w)), 0, cols - 1);
}

int GCellGrid::row_of(double y) const {
  return std::clamp(static_cast<int>(std::floor(y / cell_h)), 0, rows - 1);
}

GCellGrid make_gcell_grid(const Netlist& nl, double capacity) {
  const Canvas& c = nl.canvas();
  double side_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i : nl.soft_nodes()) {
    const Node& n = nl.node(i);
    side_sum += 0.5 * (n.width + n.height);
    ++count;
  }
  GCellGrid g;
  if (count > 0 && side_sum > 0) {
    const double side = side_sum / static_cast<double>(count);
    g.cols = std::clamp(static_cast<int>(std::ceil(c.width / side - 1e-9)), 16, 64);
    g.rows = std::clamp(static_cast<int>(std::ceil(c.height / side - 1e-9)), 16, 64);
  }
  g.cell_w = c.width / g.cols;
  g.cell_h = c.height / g.rows;
  g.h_capacity = capacity;
  g.v_capacity = capacity;
  return g;
}

std::vector<double> CongestionMap::congestion() const {
  std::vector<double> out;
  out.reserve(h_usage.size() + v_usage.size());
  for (double u : h_usage) out.push_back(u / grid.h_capacity);
  for (double u : v_usage) out.push_back(u / grid.v_capacity);
  return out;
}

double CongestionMap::total_usage() const {
  return std::accumulate(h_usage.begin(), h_usage.end(), 0.0) + std::accumulate(v_usage.begin(), v_usage.end(), 0.0);
}

// ---------------------------------------------------------------- routing

std::vector<Segment> decompose_nets(const Placement& pl, const GCellGrid& grid) {
  const Netlist& nl = pl.netlist();
  std::vector<Segment> segs;
  std::vector<std::pair<int, int>> cells;
  for (const Net& net : nl.nets()) {
    cells.clear();
    double sx = 0, sy = 0;
    for (std::size_t p : net.pins) {
      const Point q = pl.pin_position(p);
      sx += q.x;
      sy += q.y;
      cells.emplace_back(grid.col_of(q.x), grid.row_of(q.y));
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    if (cells.size() < 2) continue;
    if (cells.size() == 2) {
      segs.push_back({cells[0].first, cells[0].second, cells[1].first, cells[1].second});
      continue;
    }
    const double n = static_cast<double>(net.pins.size());
    const int cc = grid.col_of(sx / n), cr = grid.row_of(sy / n);
    for (auto [c, r] : cells) {
      if (c != cc || r != cr) segs.push_back({c, r, cc, cr});
    }
  }
  return segs;
}

namespace {

class Router {
 public:
  Router(const GCellGrid& g, const RouteOptions& opt)
      : g_(g), opt_(opt), hu_(g.h_edges(), 0.0), vu_(g.v_edges(), 0.0), hh_(g.h_edges(), 0.0), vh_(g.v_edges(), 0.0) {}

  // Edge handles: horizontal edges first, then vertical, offset by h_edges().
  std::size_t h_edge(int c, int r) const { return static_cast<std::size_t>(r) * (g_.cols - 1) + c; }
  std::size_t v_edge(int c, int r) const { return g_.h_edges() + static_cast<std::size_t>(r) * g_.cols + c; }

  double& usage(std::size_t e) { return e < hu_.size() ? hu_[e] : vu_[e - hu_.size()]; }
  double usage(std::size_t e) const { return e < hu_.size() ? hu_[e] : vu_[e - hu_.size()]; }
  double& history(std::size_t e) { return e < hh_.size() ? hh_[e] : vh_[e - hh_.size()]; }
  double capacity(std::size_t e) const { return e < hu_.size() ? g_.h_capacity : g_.v_capacity; }

  double cost(std::size_t e) const {
    const double over = std::max(0.0, usage(e) + 1.0 - capacity(e));
    const double hist = e < hh_.size() ? hh_[e] : vh_[e - hh_.size()];
    return (1.0 + hist) * (1.0 + opt_.overflow_penalty * over);
  }

  // Horizontal run along row r from column a to b, then vertical along column b.
  void l_path(const Segment& s, bool horizontal_first, std::vector<std::size_t>& out) const {
    out.clear();
    const int rr = horizontal_first ? s.r0 : s.r1;  // row of the horizontal run
    const int cc = horizontal_first ? s.c1 : s.c0;  // column of the vertical run
    for (int c = std::min(s.c0, s.c1); c < std::max(s.c0, s.c1); ++c) out.push_back(h_edge(c, rr));
    for (int r = std::min(s.r0, s.r1); r < std::max(s.r0, s.r1); ++r) out.push_back(v_edge(cc, r));
  }

  double path_cost(const std::vector<std::size_t>& path) const {
    double sum = 0.0;
    for (auto e : path) sum += cost(e);
    return sum;
  }

  void route(const Segment& s, std::vector<std::size_t>& chosen) {
    l_path(s, true, a_);
    l_path(s, false, b_);
    const double ca = path_cost(a_), cb = path_cost(b_);
    chosen = (cb < ca) ? b_ : a_;
    for (auto e : chosen) usage(e) += 1.0;
  }

  void rip_up(const std::vector<std::size_t>& path) {
    for (auto e : path) usage(e) -= 1.0;
  }

  bool overflowed(std::size_t e) const { return usage(e) > capacity(e) + 1e-9; }

  CongestionMap run(std::span<const Segment> segs) {
    std::vector<std::vector<std::size_t>> routes(segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) route(segs[i], routes[i]);

    const std::size_t edges = hu_.size() + vu_.size();
    std::vector<char> over(edges);
    for (int round = 0; round < opt_.max_rounds; ++round) {
      bool any = false;
      for (std::size_t e = 0; e < edges; ++e) {
        over[e] = overflowed(e);
        if (over[e]) {
          any = true;
          history(e) += opt_.history_increment;
        }
      }
      if (!any) break;
      for (std::size_t i = 0; i < segs.size(); ++i) {
        const bool hit = std::any_of(routes[i].begin(), routes[i].end(), [&](std::size_t e) { return over[e] != 0; });
        if (!hit) continue;
        rip_up(routes[i]);
        route(segs[i], routes[i]);
      }
    }
    return CongestionMap{g_, hu_, vu_};
  }

 private:
  GCellGrid g_;
  RouteOptions opt_;
  std::vector<double> hu_, vu_, hh_, vh_;
  std::vector<std::size_t> a_, b_;
};

}  // namespace

CongestionMap route_segments(std::span<const Segment> segments, const GCellGrid& grid, const RouteOptions& options) {
  Router router(grid, options);
  return router.run(segments);
}

CongestionMap global_route(const Placement& placement, const GCellGrid& grid, const RouteOptions& options) {
  const auto segs = decompose_nets(placement, grid);
  return route_segments(segs, grid, options);
}

// ---------------------------------------------------------------- ACE

std::vector<double> ace_values(std::span<const double> congestion, std::span<const double> ks) {
  if (congestion.empty()) throw std::invalid_argument("ace: empty edge set");
  std::vector<double> sorted(congestion.begin(), congestion.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];
  const double edges = static_cast<double>(sorted.size());
  std::vector<double> out;
  out.reserve(ks.size());
  for (double k : ks) {
    if (!(k > 0.0) || k > 100.0) throw std::invalid_argument("ace: k must lie in (0, 100]");
    auto count = static_cast<std::size_t>(std::ceil(k * edges / 100.0 - 1e-9));
    count = std::clamp<std::size_t>(count, 1, sorted.size());
    out.push_back(prefix[count] / static_cast<double>(count));
  }
  return out;
}

double congestion_cost(std::span<const double> congestion, std::span<const double> ks) {
  const auto a = ace_values(congestion, ks);
  return -std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

double congestion_cost(const CongestionMap& map, std::span<const double> ks) {
  const auto c = map.congestion();
  return congestion_cost(c, ks);
}

// ---------------------------------------------------------------- HPWL / anchors / EDA

double hpwl(const Placement& pl) {
  const Netlist& nl = pl.netlist();
  double total = 0.0;
  for (const Net& net : nl.nets()) {
    if (net.pins.size() < 2) continue;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (std::size_t p : net.pins) {
      const Point q = pl.pin_position(p);
      x0 = std::min(x0, q.x);
      x1 = std::max(x1, q.x);
      y0 = std::min(y0, q.y);
      y1 = std::max(y1, q.y);
    }
    total += (x1 - x0) + (y1 - y0);
  }
  return -total;
}

double anchor_distance(const Placement& pl, std::span<const Anchor> anchors) {
  const Netlist& nl = pl.netlist();
  double total = 0.0;
  for (const Anchor& a : anchors) {
    if (a.macro >= nl.nodes().size() || nl.node(a.macro).kind != NodeKind::macro) {
      throw IntegrityError(a.macro < nl.nodes().size() ? nl.node(a.macro).id : std::to_string(a.macro),
                           "anchor does not reference a macro");
    }
    if (!pl.placed(a.macro)) {
      throw GeometryError("anchored macro '" + nl.node(a.macro).id + "' is not placed");
    }
    const Point p = pl.at(a.macro);
    total += a.weight * std::hypot(a.target.x - p.x, a.target.y - p.y);
  }
  return -total;
}

double eda_objective(double wl, double cong, double anchor, const EdaWeights& w) {
  return w.alpha * wl + w.beta * cong + w.delta * anchor;
}

MetricSet make_metric_set(double wl, double cong, double anchor, const EdaWeights& w) {
  return {wl, cong, anchor, eda_objective(wl, cong, anchor, w)};
}

MetricSet Normalizer::normalize(const MetricSet& raw, const EdaWeights& w) const {
  return make_metric_set(raw.wl / wl_scale, raw.cong / cong_scale, raw.anchor / anchor_scale, w);
}

// ---------------------------------------------------------------- spreading

namespace {

struct BinGrid {
  int cols, rows;
  double bw, bh;
  std::size_t idx(int c, int r) const { return static_cast<std::size_t>(r) * cols + c; }

  template <typename F>
  void for_overlap(const Rect& r, F&& f) const {
    const int c0 = std::clamp(static_cast<int>(std::floor(r.x0 / bw)), 0, cols - 1);
    const int c1 = std::clamp(static_cast<int>(std::floor(r.x1 / bw)), 0, cols - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor(r.y0 / bh)), 0, rows - 1);
    const int r1 = std::clamp(static_cast<int>(std::floor(r.y1 / bh)), 0, rows - 1);
    for (int rr = r0; rr <= r1; ++rr) {
      for (int cc = c0; cc <= c1; ++cc) {
        const Rect bin{cc * bw, rr * bh, (cc + 1) * bw, (rr + 1) * bh};
        const double a = overlap_area(r, bin);
        if (a > 0) f(idx(cc, rr), a);
      }
    }
  }
};

Point clamp_inside(Point p, double w, double h, const Canvas& c) {
  return {std::clamp(p.x, w / 2, std::max(w / 2, c.width - w / 2)), std::clamp(p.y, h / 2, std::max(h / 2, c.height - h / 2))};
}

}  // namespace

Placement place_clusters(const Placement& in, const GCellGrid& grid, const SpreadOptions& options) {
  const Netlist& nl = in.netlist();
  const Canvas& canvas = nl.canvas();
  Placement out = in;

  std::vector<std::size_t> movable;
  for (std::size_t i : nl.soft_nodes()) {
    if (!nl.node(i).fixed) movable.push_back(i);
  }
  if (movable.empty()) return out;
  for (std::size_t m : nl.macros()) {
    if (!in.placed(m)) throw GeometryError("place_clusters: macro '" + nl.node(m).id + "' is not placed");
  }

  const BinGrid bins{grid.cols, grid.rows, canvas.width / grid.cols, canvas.height / grid.rows};
  const double bin_area = bins.bw * bins.bh;
  const std::size_t nbins = static_cast<std::size_t>(bins.cols) * bins.rows;

  std::vector<double> blocked(nbins, 0.0);
  std::vector<Rect> macro_rects;
  for (std::size_t m : nl.macros()) {
    macro_rects.push_back(in.footprint(m));
    bins.for_overlap(macro_rects.back(), [&](std::size_t b, double a) { blocked[b] += a; });
  }
  for (auto& b : blocked) b = std::min(b, bin_area);
  const double free_area = std::accumulate(blocked.begin(), blocked.end(), 0.0, [&](double s, double b) { return s + bin_area - b; });
  double movable_area = 0.0;
  for (std::size_t i : movable) movable_area += nl.node(i).area();
  if (movable_area > free_area + 1e-9) {
    throw InfeasibleError("place_clusters: soft-node area exceeds the free canvas area");
  }

  // Movable index per node, -1 elsewhere.
  std::vector<long> slot(nl.nodes().size(), -1);
  for (std::size_t k = 0; k < movable.size(); ++k) slot[movable[k]] = static_cast<long>(k);

  // Initial positions: centroid of connected fixed pins.
  const Point center{canvas.width / 2, canvas.height / 2};
  std::vector<Point> pos(movable.size());
  for (std::size_t k = 0; k < movable.size(); ++k) {
    const std::size_t i = movable[k];
    double sx = 0, sy = 0, cnt = 0;
    for (std::size_t n : nl.nets_of(i)) {
      for (std::size_t p : nl.nets()[n].pins) {
        const std::size_t owner = nl.pins()[p].owner;
        if (slot[owner] >= 0 || !in.placed(owner)) continue;
        const Point q = in.pin_position(p);
        sx += q.x;
        sy += q.y;
        cnt += 1;
      }
    }
    const Point base = cnt > 0 ? Point{sx / cnt, sy / cnt} : center;
    const Node& n = nl.node(i);
    pos[k] = clamp_inside(base, n.width, n.height, canvas);
  }

  // Net pin lists with owner slots, for the attraction term.
  struct NetPin {
    long slot;
    Point fixed;   // absolute position for non-movable pins
    Point offset;  // for movable pins
  };
  std::vector<std::vector<NetPin>> net_pins;
  net_pins.reserve(nl.nets().size());
  for (const Net& net : nl.nets()) {
    std::vector<NetPin> v;
    for (std::size_t p : net.pins) {
      const Pin& pin = nl.pins()[p];
      const long s = slot[pin.owner];
      if (s >= 0) {
        v.push_back({s, {}, pin.offset});
      } else {
        v.push_back({-1, in.pin_position(p), {}});
      }
    }
    // Movable pins grouped by node; a net needs a movable node and some pin elsewhere.
    std::stable_sort(v.begin(), v.end(), [](const NetPin& a, const NetPin& b) { return a.slot > b.slot; });
    if (v.empty() || v.front().slot < 0 || v.back().slot == v.front().slot) continue;
    net_pins.push_back(std::move(v));
  }

  std::vector<double> density(nbins), over(nbins), vx(nbins), vy(nbins);
  std::vector<Point> target(movable.size());
  std::vector<double> target_w(movable.size());
  auto attraction_targets = [&] {
    std::fill(target.begin(), target.end(), Point{});
    std::fill(target_w.begin(), target_w.end(), 0.0);
    for (const auto& v : net_pins) {
      double sx = 0, sy = 0;
      for (const auto& np : v) {
        const Point q = np.slot >= 0 ? Point{pos[np.slot].x + np.offset.x, pos[np.slot].y + np.offset.y} : np.fixed;
        sx += q.x;
        sy += q.y;
      }
      // Each movable node heads for the centroid of the net's pins on other nodes.
      for (std::size_t i = 0; i < v.size() && v[i].slot >= 0;) {
        const long k = v[i].slot;
        double ox = 0, oy = 0, own = 0;
        std::size_t j = i;
        for (; j < v.size() && v[j].slot == k; ++j) {
          ox += v[j].offset.x;
          oy += v[j].offset.y;
          own += 1;
        }
        const double others = static_cast<double>(v.size()) - own;
        const Point c = pos[k];
        target[k].x += (sx - (own * c.x + ox)) / others - ox / own;
        target[k].y += (sy - (own * c.y + oy)) / others - oy / own;
        target_w[k] += 1.0;
        i = j;
      }
    }
  };
  // Connectivity-driven start. Nodes that still coincide are offset by rank
  // within their group, so node order only matters between interchangeable nodes.
  for (int it = 0; it < 20; ++it) {
    attraction_targets();
    for (std::size_t k = 0; k < movable.size(); ++k) {
      if (target_w[k] > 0) pos[k] = {target[k].x / target_w[k], target[k].y / target_w[k]};
    }
  }
  std::vector<std::size_t> by_pos(movable.size());
  std::iota(by_pos.begin(), by_pos.end(), 0);
  std::stable_sort(by_pos.begin(), by_pos.end(), [&](std::size_t a, std::size_t b) {
    return pos[a].x != pos[b].x ? pos[a].x < pos[b].x : pos[a].y < pos[b].y;
  });
  const std::vector<Point> start = pos;
  for (std::size_t i = 0, rank = 0; i < by_pos.size(); ++i) {
    const std::size_t k = by_pos[i];
    rank = i > 0 && start[by_pos[i - 1]] == start[k] ? rank + 1 : 0;
    if (rank == 0) continue;
    // Vogel spiral: a coincident group fills a disk of about its own area.
    const Node& n = nl.node(movable[k]);
    const double angle = 2.399963229728653 * static_cast<double>(rank);
    const double radius = std::sqrt(static_cast<double>(rank) * n.area() / std::numbers::pi);
    pos[k] = clamp_inside({pos[k].x + radius * std::cos(angle), pos[k].y + radius * std::sin(angle)}, n.width, n.height, canvas);
  }
  const double max_step = std::min(bins.bw, bins.bh);
  const int iters = std::max(0, options.iterations);

  for (int it = 0; it < iters; ++it) {
    attraction_targets();

    // Density diffusion velocity at bin centers.
    std::copy(blocked.begin(), blocked.end(), density.begin());
    for (std::size_t k = 0; k < movable.size(); ++k) {
      const Node& n = nl.node(movable[k]);
      bins.for_overlap(Rect::centered(pos[k], n.width, n.height), [&](std::size_t b, double a) { density[b] += a; });
    }
    for (auto& d : density) d /= bin_area;
    // Only density above half a bin pushes; sparse nodes otherwise repel each other indefinitely.
    for (std::size_t b = 0; b < nbins; ++b) over[b] = std::max(0.0, density[b] - 0.5);
    for (int r = 0; r < bins.rows; ++r) {
      for (int c = 0; c < bins.cols; ++c) {
        const double d = over[bins.idx(c, r)];
        const double dl = c > 0 ? over[bins.idx(c - 1, r)] : d;
        const double dr = c + 1 < bins.cols ? over[bins.idx(c + 1, r)] : d;
        const double dd = r > 0 ? over[bins.idx(c, r - 1)] : d;
        const double du = r + 1 < bins.rows ? over[bins.idx(c, r + 1)] : d;
        const double denom = std::max(density[bins.idx(c, r)], 1e-3);
        vx[bins.idx(c, r)] = -(dr - dl) / (2.0 * denom);
        vy[bins.idx(c, r)] = -(du - dd) / (2.0 * denom);
      }
    }

    // Constant pull keeps a wirelength/density equilibrium instead of ending in pure diffusion.
    const double attract = 0.3;
    for (std::size_t k = 0; k < movable.size(); ++k) {
      const Node& n = nl.node(movable[k]);
      Point p = pos[k];
      double dx = 0, dy = 0;
      if (target_w[k] > 0) {
        dx += attract * (target[k].x / target_w[k] - p.x);
        dy += attract * (target[k].y / target_w[k] - p.y);
      }
      // Bilinear interpolation of the bin velocity field.
      const double fx = std::clamp(p.x / bins.bw - 0.5, 0.0, bins.cols - 1.0);
      const double fy = std::clamp(p.y / bins.bh - 0.5, 0.0, bins.rows - 1.0);
      const int c0 = std::min(static_cast<int>(fx), bins.cols - 1), r0 = std::min(static_cast<int>(fy), bins.rows - 1);
      const int c1 = std::min(c0 + 1, bins.cols - 1), r1 = std::min(r0 + 1, bins.rows - 1);
      const double tx = fx - c0, ty = fy - r0;
      auto lerp2 = [&](const std::vector<double>& f) {
        return (1 - tx) * (1 - ty) * f[bins.idx(c0, r0)] + tx * (1 - ty) * f[bins.idx(c1, r0)] +
               (1 - tx) * ty * f[bins.idx(c0, r1)] + tx * ty * f[bins.idx(c1, r1)];
      };
      dx += 0.5 * lerp2(vx) * bins.bw;
      dy += 0.5 * lerp2(vy) * bins.bh;
      const double len = std::hypot(dx, dy);
      if (len > max_step) {
        dx *= max_step / len;
        dy *= max_step / len;
      }
      pos[k] = clamp_inside({p.x + dx, p.y + dy}, n.width, n.height, canvas);
    }
  }

  // Nodes whose center sits inside a macro move to the nearest free bin center.
  auto inside_macro = [&](Point p) {
    for (const Rect& r : macro_rects) {
      if (p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1) return true;
    }
    return false;
  };
  for (std::size_t k = 0; k < movable.size(); ++k) {
    if (!inside_macro(pos[k])) continue;
    const Node& n = nl.node(movable[k]);
    double best = INFINITY;
    Point best_p = pos[k];
    // Nearest exit across a macro edge first; bin centers only when that fails.
    for (const Rect& r : macro_rects) {
      const Point p = pos[k];
      if (!(p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1)) continue;
      const double eps = 1e-6;
      for (const Point& q0 : {Point{r.x0 - eps, p.y}, Point{r.x1 + eps, p.y}, Point{p.x, r.y0 - eps}, Point{p.x, r.y1 + eps}}) {
        const Point q = clamp_inside(q0, n.width, n.height, canvas);
        if (inside_macro(q)) continue;
        const double d = std::hypot(q.x - p.x, q.y - p.y);
        if (d < best) {
          best = d;
          best_p = q;
        }
      }
    }
    if (best < INFINITY) {
      pos[k] = best_p;
      continue;
    }
    for (int r = 0; r < bins.rows; ++r) {
      for (int c = 0; c < bins.cols; ++c) {
        const Point q = clamp_inside({(c + 0.5) * bins.bw, (r + 0.5) * bins.bh}, n.width, n.height, canvas);
        if (inside_macro(q)) continue;
        const double d = std::hypot(q.x - pos[k].x, q.y - pos[k].y);
        if (d < best) {
          best = d;
          best_p = q;
        }
      }
    }
    pos[k] = best_p;
  }

  for (std::size_t k = 0; k < movable.size(); ++k) out.set(movable[k], pos[k]);
  return out;
}

Placement place_clusters(const Placement& placement, int iterations) {
  return place_clusters(placement, make_gcell_grid(placement.netlist()), SpreadOptions{iterations});
}

// ---------------------------------------------------------------- pipeline

Evaluation evaluate_placement(const Placement& macros_placed, const RewardConfig& config,
                              std::optional<std::span<const Anchor>> anchors) {
  const Netlist& nl = macros_placed.netlist();
  const GCellGrid grid = make_gcell_grid(nl, config.capacity);
  Placement full = place_clusters(macros_placed, grid, config.spread);
  const double wl = hpwl(full);
  CongestionMap map = global_route(full, grid, config.route);
  const auto cong_values = map.congestion();
  auto ace = ace_values(cong_values, config.ks);
  const double cong = -std::accumulate(ace.begin(), ace.end(), 0.0) / static_cast<double>(ace.size());
  const double anc = anchor_distance(full, anchors ? *anchors : std::span<const Anchor>(nl.anchors()));
  return Evaluation{std::move(full), make_metric_set(wl, cong, anc, config.weights), std::move(ace), std::move(map)};
}

}  // namespace moppo
