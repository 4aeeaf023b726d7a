#include <doctest.h>

#include "moppo/error.hpp"
#include "moppo/metrics.hpp"
#include "support.hpp"

using namespace moppo;

namespace {

Netlist two_pin(Point a, Point b) {
  Netlist nl(Canvas{10, 10, 4, 4});
  nl.add_node({"m0", NodeKind::macro, 1, 1, false, std::nullopt});
  nl.add_node({"p0", NodeKind::port, 0, 0, true, a});
  nl.add_node({"p1", NodeKind::port, 0, 0, true, b});
  nl.add_pin("a", "p0", {0, 0});
  nl.add_pin("b", "p1", {0, 0});
  nl.add_net("n", std::vector<std::string>{"a", "b"});
  nl.finalize();
  return nl;
}

GCellGrid unit_grid(int cols, int rows, double cap) {
  GCellGrid g;
  g.cols = cols;
  g.rows = rows;
  g.cell_w = g.cell_h = 1.0;
  g.h_capacity = g.v_capacity = cap;
  return g;
}

// Both L-shapes of a segment as per-edge usage increments.
std::vector<std::vector<std::size_t>> l_shapes(const Segment& s, const GCellGrid& g) {
  auto h = [&](int c, int r) { return static_cast<std::size_t>(r) * (g.cols - 1) + c; };
  auto v = [&](int c, int r) { return g.h_edges() + static_cast<std::size_t>(r) * g.cols + c; };
  auto run_h = [&](int r, int c0, int c1, std::vector<std::size_t>& out) {
    for (int c = std::min(c0, c1); c < std::max(c0, c1); ++c) out.push_back(h(c, r));
  };
  auto run_v = [&](int c, int r0, int r1, std::vector<std::size_t>& out) {
    for (int r = std::min(r0, r1); r < std::max(r0, r1); ++r) out.push_back(v(c, r));
  };
  std::vector<std::size_t> a, b;
  run_h(s.r0, s.c0, s.c1, a);
  run_v(s.c1, s.r0, s.r1, a);
  run_v(s.c0, s.r0, s.r1, b);
  run_h(s.r1, s.c0, s.c1, b);
  return {a, b};
}

double max_overflow(const std::vector<double>& usage, double cap) {
  double m = 0;
  for (double u : usage) m = std::max(m, u - cap);
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("hpwl of a single two-pin net") {
    const Netlist nl = two_pin({0, 0}, {3, 4});
    Placement pl(nl);
    CHECK(hpwl(pl) == -7.0);
    const Netlist same = two_pin({2, 2}, {2, 2});
    CHECK(hpwl(Placement(same)) == 0.0);
  }

  TEST_CASE("hpwl matches the all-pairs oracle") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Netlist nl = testing::random_netlist(seed, 4, 20, 50);
      Placement pl(nl);
      Rng rng(seed + 1000);
      for (std::size_t i = 0; i < nl.nodes().size(); ++i) {
        if (!nl.node(i).fixed) pl.set(i, {rng.uniform(10, 90), rng.uniform(10, 90)});
      }
      CHECK(testing::close_rel(hpwl(pl), testing::hpwl_all_pairs(pl), 1e-12));
    }
  }

  TEST_CASE("ACE of a uniform histogram") {
    const std::vector<double> c(200, 0.5);
    for (double a : ace_values(c, kDefaultAceKs)) CHECK(a == 0.5);
    CHECK(congestion_cost(c) == -0.5);
  }

  TEST_CASE("ACE worked example") {
    std::vector<double> c(995, 1.0);
    c.insert(c.begin() + 300, 5, 2.0);
    const auto a = ace_values(c, kDefaultAceKs);
    CHECK(a[0] == 2.0);
    CHECK(a[1] == 1.5);
    CHECK(a[2] == 1.25);
    CHECK(a[3] == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(congestion_cost(c) == doctest::Approx(-1.4625).epsilon(1e-15));
    CHECK(congestion_cost(c) == testing::congestion_oracle(c, kDefaultAceKs));
    CHECK_THROWS_AS(ace_values(std::vector<double>{}, kDefaultAceKs), std::invalid_argument);
  }

  TEST_CASE("ACE matches the sort-and-average oracle") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> c(1 + rng.below(700));
      for (auto& x : c) x = rng.uniform(0, 3);
      CHECK(testing::close_rel(congestion_cost(c), testing::congestion_oracle(c, kDefaultAceKs), 1e-12));
    }
  }

  TEST_CASE("anchor distance") {
    Netlist nl(Canvas{10, 10, 4, 4});
    nl.add_node({"m0", NodeKind::macro, 1, 1, false, std::nullopt});
    nl.add_anchor("m0", {3, 4}, 2.0);
    nl.finalize();
    Placement pl(nl);
    pl.set(0, {0, 0});
    CHECK(anchor_distance(pl, nl.anchors()) == -10.0);
    pl.set(0, {3, 4});
    CHECK(anchor_distance(pl, nl.anchors()) == 0.0);
  }

  TEST_CASE("EDA objective is linear") {
    const EdaWeights ones{1, 1, 1};
    CHECK(eda_objective(-2, -1, -3, ones) == -6.0);
    const EdaWeights d0{0.991, 0.009, 0.0};
    CHECK(eda_objective(-2, -1, -3, d0) == doctest::Approx(0.991 * -2 + 0.009 * -1));
    const EdaWeights def;
    CHECK(def.alpha == 0.991);
    CHECK(def.beta == 0.009);
    CHECK(std::vector<double>(kDefaultAceKs.begin(), kDefaultAceKs.end()) == std::vector<double>{0.5, 1, 2, 5});
  }

  TEST_CASE("router: trivial segments") {
    const GCellGrid g = unit_grid(5, 5, 10);
    CongestionMap m = route_segments(std::vector<Segment>{{1, 1, 1, 1}}, g);
    CHECK(m.total_usage() == 0.0);
    m = route_segments(std::vector<Segment>{{0, 2, 3, 2}}, g);
    int used = 0;
    for (std::size_t e = 0; e < m.h_usage.size(); ++e) {
      if (m.h_usage[e] == 1.0) ++used;
      else CHECK(m.h_usage[e] == 0.0);
    }
    CHECK(used == 3);
    for (double u : m.v_usage) CHECK(u == 0.0);
  }

  TEST_CASE("router: negotiation reaches the best L-shape combination") {
    // Identical diagonal segments: each has two L-shapes; with capacity 1 the
    // optimum sends them along different shapes.
    std::vector<std::vector<Segment>> cases = {
        {{0, 0, 2, 2}, {0, 0, 2, 2}},
        {{0, 0, 3, 1}, {0, 1, 3, 0}},
        {{0, 0, 2, 2}, {0, 0, 2, 2}, {2, 0, 0, 2}},
        {{0, 0, 3, 3}, {1, 0, 3, 2}, {0, 1, 2, 3}, {3, 0, 0, 3}},
    };
    for (const auto& segs : cases) {
      const GCellGrid g = unit_grid(4, 4, 1);
      const auto shapes = [&] {
        std::vector<std::vector<std::vector<std::size_t>>> s;
        for (const auto& seg : segs) s.push_back(l_shapes(seg, g));
        return s;
      }();
      double best = INFINITY;
      for (std::size_t combo = 0; combo < (1u << segs.size()); ++combo) {
        std::vector<double> usage(g.h_edges() + g.v_edges(), 0.0);
        for (std::size_t i = 0; i < segs.size(); ++i) {
          for (auto e : shapes[i][(combo >> i) & 1]) usage[e] += 1;
        }
        best = std::min(best, max_overflow(usage, 1.0));
      }
      const CongestionMap m = route_segments(segs, g);
      std::vector<double> usage = m.h_usage;
      usage.insert(usage.end(), m.v_usage.begin(), m.v_usage.end());
      CHECK(max_overflow(usage, 1.0) == best);
      double total = 0;
      for (const auto& s : segs) total += s.length();
      CHECK(m.total_usage() == total);
    }
  }

  TEST_CASE("g-cell grid follows the mean soft-node side within clamps") {
    Netlist nl(Canvas{100, 100, 10, 10});
    nl.add_node({"m0", NodeKind::macro, 10, 10, false, std::nullopt});
    nl.add_node({"c0", NodeKind::cluster, 4, 4, false, std::nullopt});
    nl.add_node({"c1", NodeKind::cluster, 6, 6, false, std::nullopt});
    nl.finalize();
    const GCellGrid g = make_gcell_grid(nl);
    CHECK(g.cols == 20);
    CHECK(g.rows == 20);
    CHECK(g.cell_w == 5.0);
    Netlist tiny(Canvas{100, 100, 10, 10});
    tiny.add_node({"m0", NodeKind::macro, 10, 10, false, std::nullopt});
    tiny.add_node({"c0", NodeKind::cluster, 0.5, 0.5, false, std::nullopt});
    tiny.finalize();
    CHECK(make_gcell_grid(tiny).cols == 64);
  }

  TEST_CASE("spreading: no soft nodes leaves the placement unchanged") {
    const Netlist nl = two_pin({1, 1}, {5, 5});
    Placement pl(nl);
    pl.set(0, {3, 3});
    const Placement out = place_clusters(pl);
    CHECK(out.at(0) == Point{3, 3});
  }

  TEST_CASE("spreading: one net pulls a cluster toward its port") {
    Netlist nl(Canvas{64, 64, 8, 8});
    nl.add_node({"m0", NodeKind::macro, 8, 8, false, std::nullopt});
    nl.add_node({"c0", NodeKind::cluster, 4, 4, false, std::nullopt});
    nl.add_node({"p0", NodeKind::port, 0, 0, true, Point{0, 0}});
    nl.add_pin("c", "c0", {0, 0});
    nl.add_pin("p", "p0", {0, 0});
    nl.add_net("n", std::vector<std::string>{"c", "p"});
    nl.finalize();
    Placement pl(nl);
    pl.set(0, {48, 48});
    const Placement out = place_clusters(pl);
    const Point c = out.at(1);
    CHECK(c.x <= 4.0);
    CHECK(c.y <= 4.0);
    CHECK(c.x >= 2.0 - 1e-9);
    CHECK(c.y >= 2.0 - 1e-9);
  }

  TEST_CASE("spreading: unconnected clusters spread evenly") {
    // Clusters fill two thirds of the free area; a single cluster already
    // covers a whole g-cell, so sparser fills cannot meet the bound.
    const int count = 160;
    Netlist nl(Canvas{64, 64, 8, 8});
    nl.add_node({"m0", NodeKind::macro, 16, 16, false, std::nullopt});
    for (int i = 0; i < count; ++i) nl.add_node({"c" + std::to_string(i), NodeKind::cluster, 4, 4, false, std::nullopt});
    nl.finalize();
    Placement pl(nl);
    pl.set(0, {40, 24});
    const GCellGrid g = make_gcell_grid(nl);
    const Placement out = place_clusters(pl, g);
    const Rect macro = pl.footprint(0);
    // Density per g-cell = cluster area inside it / free area of it.
    std::vector<double> cluster_area(static_cast<std::size_t>(g.cols) * g.rows, 0.0);
    double free_total = 0;
    std::vector<double> free(cluster_area.size());
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        const Rect cell{c * g.cell_w, r * g.cell_h, (c + 1) * g.cell_w, (r + 1) * g.cell_h};
        free[r * g.cols + c] = cell.area() - overlap_area(cell, macro);
        free_total += free[r * g.cols + c];
        for (std::size_t i : nl.soft_nodes()) cluster_area[r * g.cols + c] += overlap_area(cell, out.footprint(i));
      }
    }
    const double mean = count * 16.0 / free_total;
    double worst = 0;
    for (std::size_t b = 0; b < free.size(); ++b) {
      if (free[b] > 0.5 * g.cell_w * g.cell_h) worst = std::max(worst, cluster_area[b] / free[b]);
    }
    CHECK(worst <= 2.0 * mean);
    for (std::size_t i : nl.soft_nodes()) {
      const Point p = out.at(i);
      CHECK_FALSE((p.x > macro.x0 && p.x < macro.x1 && p.y > macro.y0 && p.y < macro.y1));
    }
  }

  TEST_CASE("normalizer divides by the scales") {
    const Normalizer n{2.0, 4.0, 8.0, 3};
    const EdaWeights w;
    const MetricSet m = n.normalize(make_metric_set(-2, -4, -8, w), w);
    CHECK(m.wl == -1.0);
    CHECK(m.cong == -1.0);
    CHECK(m.anchor == -1.0);
    CHECK(m.eda == doctest::Approx(w.alpha * -1 + w.beta * -1 + w.delta * -1));
  }

  TEST_CASE("pipeline wirelength is the hpwl of the spread placement") {
    const Netlist nl = testing::random_netlist(11, 2, 30, 40);
    Placement pl(nl);
    pl.set(nl.node_index("m0"), {20, 20});
    pl.set(nl.node_index("m1"), {75, 70});
    const Evaluation ev = evaluate_placement(pl, RewardConfig{});
    CHECK(ev.raw.wl == hpwl(ev.placement));
    CHECK(ev.raw.anchor == 0.0);
    CHECK(ev.ace.size() == 4);
    for (std::size_t i : nl.soft_nodes()) CHECK(ev.placement.placed(i));
  }

  TEST_CASE("macro placement validation") {
    Netlist nl(Canvas{10, 10, 4, 4});
    nl.add_node({"m0", NodeKind::macro, 4, 4, false, std::nullopt});
    nl.add_node({"m1", NodeKind::macro, 4, 4, false, std::nullopt});
    nl.finalize();
    Placement pl(nl);
    pl.set(0, {2, 2});
    CHECK_THROWS_AS(validate_macro_placement(pl), GeometryError);
    pl.set(1, {4, 4});
    CHECK_THROWS_AS(validate_macro_placement(pl), GeometryError);
    pl.set(1, {6, 6});
    CHECK_NOTHROW(validate_macro_placement(pl));
    pl.set(1, {9, 9});
    CHECK_THROWS_AS(validate_macro_placement(pl), GeometryError);
  }
  TEST_CASE("translation leaves hpwl unchanged and moves anchors in closed form") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Netlist nl = testing::random_netlist(seed, 3, 6, 10);
      nl.add_anchor("m0", {40, 40}, 1.5);
      nl.finalize();
      Placement a(nl), b(nl);
      Rng rng(seed);
      const double t = rng.uniform(-5, 5);
      for (std::size_t i = 0; i < nl.nodes().size(); ++i) {
        const Point p = nl.node(i).fixed ? *nl.node(i).position : Point{rng.uniform(20, 80), rng.uniform(20, 80)};
        a.set(i, p);
        b.set(i, {p.x + t, p.y + t});
      }
      CHECK(testing::close_rel(hpwl(a), hpwl(b), 1e-12));
      const Point m = b.at(nl.node_index("m0"));
      const double expect = -1.5 * std::hypot(m.x - 40, m.y - 40);
      CHECK(testing::close_rel(anchor_distance(b, nl.anchors()), expect, 1e-12));
    }
  }

  TEST_CASE("pulling a two-pin net apart never lowers its cost") {
    double prev = 0;
    for (int d = 0; d <= 10; ++d) {
      const double v = hpwl(Placement(two_pin({0, 5}, {static_cast<double>(d), 5})));
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("ACE is non-increasing in k") {
    Rng rng(9);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> c(50 + rng.below(500));
      for (auto& x : c) x = rng.uniform(0, 2) * rng.uniform();
      const auto a = ace_values(c, kDefaultAceKs);
      for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1] >= a[i]);
    }
  }

  TEST_CASE("routing conserves segment length") {
    const Netlist nl = testing::random_netlist(5, 3, 30, 60);
    Placement pl(nl);
    pl.set(nl.node_index("m0"), {20, 20});
    pl.set(nl.node_index("m1"), {70, 30});
    pl.set(nl.node_index("m2"), {50, 75});
    const Placement full = place_clusters(pl);
    const GCellGrid g = make_gcell_grid(nl);
    const auto segs = decompose_nets(full, g);
    double total = 0;
    for (const auto& s : segs) total += s.length();
    CHECK(global_route(full, g).total_usage() == total);
  }
}
