#include "moppo/netlist.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "moppo/hash.hpp"
#include "moppo/rng.hpp"

namespace moppo {

namespace {

constexpr double kGeomTol = 1e-9;

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

double parse_double(const Token& tok, std::size_t line) {
  double v = 0.0;
  auto first = tok.text.data();
  auto last = tok.text.data() + tok.text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, tok.column, "expected a number, got '" + std::string(tok.text) + "'");
  }
  return v;
}

int parse_int(const Token& tok, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
  if (ec != std::errc() || ptr != tok.text.data() + tok.text.size()) {
    throw ParseError(line, tok.column, "expected an integer, got '" + std::string(tok.text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

double overlap_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

bool overlaps(const Rect& a, const Rect& b, double tol) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return w > tol && h > tol;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::macro:
      return "macro";
    case NodeKind::std_cell:
      return "std-cell";
    case NodeKind::cluster:
      return "cluster";
    case NodeKind::port:
      return "port";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  if (text == "macro") return NodeKind::macro;
  if (text == "std-cell") return NodeKind::std_cell;
  if (text == "cluster") return NodeKind::cluster;
  if (text == "port") return NodeKind::port;
  return std::nullopt;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- Netlist

std::size_t Netlist::add_node(Node node) {
  if (node_ids_.count(node.id)) throw InputError("duplicate node id '" + node.id + "'");
  finalized_ = false;
  node_ids_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t Netlist::add_pin(std::string id, std::string_view owner_id, Point offset) {
  if (pin_ids_.count(id)) throw InputError("duplicate pin id '" + id + "'");
  auto owner = find_node(owner_id);
  if (!owner) {
    throw IntegrityError(std::string(owner_id),
                         "pin '" + id + "' references unknown node '" + std::string(owner_id) + "'");
  }
  finalized_ = false;
  pin_ids_.emplace(id, pins_.size());
  pins_.push_back({std::move(id), *owner, offset});
  return pins_.size() - 1;
}

std::size_t Netlist::add_net(std::string id, std::span<const std::string> pin_ids) {
  if (net_ids_.count(id)) throw InputError("duplicate net id '" + id + "'");
  Net net{std::move(id), {}};
  net.pins.reserve(pin_ids.size());
  for (const auto& p : pin_ids) {
    auto idx = find_pin(p);
    if (!idx) throw IntegrityError(p, "net '" + net.id + "' references unknown pin '" + p + "'");
    net.pins.push_back(*idx);
  }
  finalized_ = false;
  net_ids_.emplace(net.id, nets_.size());
  nets_.push_back(std::move(net));
  return nets_.size() - 1;
}

void Netlist::add_anchor(std::string_view macro_id, Point target, double weight) {
  auto idx = find_node(macro_id);
  if (!idx) {
    throw IntegrityError(std::string(macro_id), "anchor references unknown node '" + std::string(macro_id) + "'");
  }
  finalized_ = false;
  anchors_.push_back({*idx, target, weight});
}

std::optional<std::size_t> Netlist::find_node(std::string_view id) const {
  auto it = node_ids_.find(std::string(id));
  if (it == node_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Netlist::find_pin(std::string_view id) const {
  auto it = pin_ids_.find(std::string(id));
  if (it == pin_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Netlist::find_net(std::string_view id) const {
  auto it = net_ids_.find(std::string(id));
  if (it == net_ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Netlist::node_index(std::string_view id) const {
  auto idx = find_node(id);
  if (!idx) throw IntegrityError(std::string(id), "unknown node '" + std::string(id) + "'");
  return *idx;
}

void Netlist::finalize() {
  const Canvas& c = canvas_;
  if (!(c.width > 0) || !(c.height > 0)) throw GeometryError("canvas width and height must be positive");
  if (c.grid_cols < 2 || c.grid_rows < 2) throw GeometryError("canvas grid must be at least 2x2");

  macros_.clear();
  ports_.clear();
  soft_nodes_.clear();
  std_cells_.clear();
  double macro_area = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.width < 0 || n.height < 0) throw GeometryError("node '" + n.id + "' has negative dimensions");
    if (n.width > c.width + kGeomTol || n.height > c.height + kGeomTol) {
      throw GeometryError("node '" + n.id + "' is larger than the canvas");
    }
    if (n.fixed && !n.position) throw GeometryError("fixed node '" + n.id + "' has no position");
    if (n.position) {
      const Rect r = Rect::centered(*n.position, n.width, n.height);
      if (r.x0 < -kGeomTol || r.y0 < -kGeomTol || r.x1 > c.width + kGeomTol || r.y1 > c.height + kGeomTol) {
        throw GeometryError("node '" + n.id + "' lies outside the canvas");
      }
    }
    switch (n.kind) {
      case NodeKind::macro:
        if (!(n.width > 0) || !(n.height > 0)) throw GeometryError("macro '" + n.id + "' must have positive area");
        macros_.push_back(i);
        macro_area += n.area();
        break;
      case NodeKind::port:
        if (n.width != 0 || n.height != 0) throw GeometryError("port '" + n.id + "' must have zero area");
        if (!n.fixed) throw GeometryError("port '" + n.id + "' must be fixed");
        ports_.push_back(i);
        break;
      case NodeKind::std_cell:
        std_cells_.push_back(i);
        soft_nodes_.push_back(i);
        break;
      case NodeKind::cluster:
        soft_nodes_.push_back(i);
        break;
    }
  }
  if (macros_.empty()) throw InputError("netlist has no macros");
  if (macro_area > c.width * c.height + kGeomTol) throw GeometryError("total macro area exceeds canvas area");

  for (const Pin& p : pins_) {
    const Node& n = nodes_[p.owner];
    if (std::abs(p.offset.x) > n.width / 2 + kGeomTol || std::abs(p.offset.y) > n.height / 2 + kGeomTol) {
      throw GeometryError("pin '" + p.id + "' offset lies outside node '" + n.id + "'");
    }
  }

  node_nets_.assign(nodes_.size(), {});
  for (std::size_t ni = 0; ni < nets_.size(); ++ni) {
    const Net& net = nets_[ni];
    if (net.pins.empty()) throw InputError("net '" + net.id + "' has no pins");
    std::vector<std::size_t> sorted = net.pins;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InputError("net '" + net.id + "' lists a pin twice");
    }
    for (std::size_t p : net.pins) {
      auto& list = node_nets_[pins_[p].owner];
      if (list.empty() || list.back() != ni) list.push_back(ni);
    }
  }

  for (const Anchor& a : anchors_) {
    const Node& n = nodes_[a.macro];
    if (n.kind != NodeKind::macro) throw InputError("anchor node '" + n.id + "' is not a macro");
    if (a.target.x < -kGeomTol || a.target.x > c.width + kGeomTol || a.target.y < -kGeomTol ||
        a.target.y > c.height + kGeomTol) {
      throw GeometryError("anchor target for '" + n.id + "' lies outside the canvas");
    }
    if (!(a.weight >= 0) || !std::isfinite(a.weight)) {
      throw InputError("anchor weight for '" + n.id + "' must be non-negative");
    }
  }
  finalized_ = true;
}

// ---------------------------------------------------------------- parse

Netlist parse_netlist(std::string_view text) {
  struct NodeRec { Node node; std::size_t line; };
  struct PinRec { std::string id, owner; Point off; std::size_t line; Token owner_tok; };
  struct NetRec { std::string id; std::vector<std::string> pins; std::vector<Token> pin_toks; std::size_t line; };
  struct AnchorRec { std::string node; Point target; double weight; std::size_t line; Token node_tok; };

  std::optional<Canvas> canvas;
  std::vector<NodeRec> nodes;
  std::vector<PinRec> pins;
  std::vector<NetRec> nets;
  std::vector<AnchorRec> anchors;

  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line = li + 1;
    auto toks = tokenize(lines[li]);
    if (toks.empty()) continue;
    const auto kw = toks[0].text;
    auto arity = [&](std::size_t lo, std::size_t hi) {
      if (toks.size() < lo || toks.size() > hi) {
        const std::size_t col = toks.size() > hi ? toks[hi].column : lines[li].size() + 1;
        throw ParseError(line, col, "wrong number of fields for '" + std::string(kw) + "' record");
      }
    };
    if (kw == "canvas") {
      arity(5, 5);
      if (canvas) throw ParseError(line, toks[0].column, "duplicate canvas record");
      canvas = Canvas{parse_double(toks[1], line), parse_double(toks[2], line), parse_int(toks[3], line),
                      parse_int(toks[4], line)};
    } else if (kw == "node") {
      arity(5, 8);
      Node n;
      n.id = std::string(toks[1].text);
      auto kind = parse_node_kind(toks[2].text);
      if (!kind) throw ParseError(line, toks[2].column, "unknown node kind '" + std::string(toks[2].text) + "'");
      n.kind = *kind;
      n.width = parse_double(toks[3], line);
      n.height = parse_double(toks[4], line);
      if (toks.size() > 5) {
        if (toks.size() != 8 || toks[5].text != "fixed") {
          throw ParseError(line, toks[5].column, "expected 'fixed X Y'");
        }
        n.fixed = true;
        n.position = Point{parse_double(toks[6], line), parse_double(toks[7], line)};
      }
      nodes.push_back({std::move(n), line});
    } else if (kw == "pin") {
      arity(5, 5);
      pins.push_back({std::string(toks[1].text), std::string(toks[2].text),
                      Point{parse_double(toks[3], line), parse_double(toks[4], line)}, line, toks[2]});
    } else if (kw == "net") {
      if (toks.size() < 3) throw ParseError(line, lines[li].size() + 1, "net needs an id and at least one pin");
      NetRec r{std::string(toks[1].text), {}, {}, line};
      for (std::size_t i = 2; i < toks.size(); ++i) {
        r.pins.emplace_back(toks[i].text);
        r.pin_toks.push_back(toks[i]);
      }
      nets.push_back(std::move(r));
    } else if (kw == "anchor") {
      arity(5, 5);
      anchors.push_back({std::string(toks[1].text), Point{parse_double(toks[2], line), parse_double(toks[3], line)},
                         parse_double(toks[4], line), line, toks[1]});
    } else {
      throw ParseError(line, toks[0].column, "unknown record '" + std::string(kw) + "'");
    }
  }
  if (!canvas) throw ParseError(lines.size() + 1, 1, "missing canvas record");

  Netlist nl(*canvas);
  auto at_line = [](std::size_t line, const std::string& msg) { return "line " + std::to_string(line) + ": " + msg; };
  for (auto& r : nodes) {
    try {
      nl.add_node(std::move(r.node));
    } catch (const InputError& e) {
      throw InputError(at_line(r.line, e.what()));
    }
  }
  for (auto& r : pins) {
    try {
      nl.add_pin(r.id, r.owner, r.off);
    } catch (const IntegrityError& e) {
      throw IntegrityError(e.id(), at_line(r.line, e.what()));
    } catch (const InputError& e) {
      throw InputError(at_line(r.line, e.what()));
    }
  }
  for (auto& r : nets) {
    try {
      nl.add_net(r.id, r.pins);
    } catch (const IntegrityError& e) {
      throw IntegrityError(e.id(), at_line(r.line, e.what()));
    } catch (const InputError& e) {
      throw InputError(at_line(r.line, e.what()));
    }
  }
  for (auto& r : anchors) {
    try {
      nl.add_anchor(r.node, r.target, r.weight);
    } catch (const IntegrityError& e) {
      throw IntegrityError(e.id(), at_line(r.line, e.what()));
    }
  }
  nl.finalize();
  return nl;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

Netlist read_netlist_file(const std::string& path) { return parse_netlist(read_text_file(path)); }

// ---------------------------------------------------------------- serialize

std::string serialize_netlist(const Netlist& nl) {
  std::string out;
  auto num = [&](double v) {
    out += ' ';
    out += format_number(v);
  };
  const Canvas& c = nl.canvas();
  out += "canvas";
  num(c.width);
  num(c.height);
  out += ' ' + std::to_string(c.grid_cols) + ' ' + std::to_string(c.grid_rows) + '\n';
  for (const Node& n : nl.nodes()) {
    out += "node " + n.id + ' ' + std::string(to_string(n.kind));
    num(n.width);
    num(n.height);
    if (n.fixed) {
      out += " fixed";
      num(n.position->x);
      num(n.position->y);
    }
    out += '\n';
  }
  for (const Pin& p : nl.pins()) {
    out += "pin " + p.id + ' ' + nl.node(p.owner).id;
    num(p.offset.x);
    num(p.offset.y);
    out += '\n';
  }
  for (const Net& net : nl.nets()) {
    out += "net " + net.id;
    for (std::size_t p : net.pins) out += ' ' + nl.pins()[p].id;
    out += '\n';
  }
  for (const Anchor& a : nl.anchors()) {
    out += "anchor " + nl.node(a.macro).id;
    num(a.target.x);
    num(a.target.y);
    num(a.weight);
    out += '\n';
  }
  return out;
}

std::string netlist_hash(const Netlist& netlist) { return sha256_hex(serialize_netlist(netlist)); }

void set_center_anchors(Netlist& nl) {
  nl.clear_anchors();
  const Point center{nl.canvas().width / 2, nl.canvas().height / 2};
  for (const Node& n : nl.nodes()) {
    if (n.kind == NodeKind::macro && !n.fixed) nl.add_anchor(n.id, center, std::sqrt(n.area()));
  }
  nl.finalize();
}

// ---------------------------------------------------------------- synthetic

Netlist generate_synthetic(const SyntheticOptions& o) {
  if (o.macros == 0) throw std::invalid_argument("generate_synthetic: at least one macro is required");
  if (o.nets == 0) throw std::invalid_argument("generate_synthetic: at least one net is required");
  if (!(o.canvas.width > 0) || !(o.canvas.height > 0) || o.canvas.grid_cols < 2 || o.canvas.grid_rows < 2) {
    throw std::invalid_argument("generate_synthetic: invalid canvas");
  }
  if (o.macro_area_fraction <= 0 || o.soft_area_fraction < 0) {
    throw std::invalid_argument("generate_synthetic: area fractions must be positive");
  }
  if (o.macro_area_fraction + o.soft_area_fraction > 0.6 + 1e-12) {
    throw InfeasibleError("generate_synthetic: requested utilization exceeds 60%");
  }

  Rng rng(o.seed);
  const double W = o.canvas.width, H = o.canvas.height;
  Netlist nl(o.canvas);

  // Macros: areas drawn around the mean, aspect in [0.6, 1.6]. A macro side
  // never exceeds the canvas minus one action cell so a legal center exists.
  const double max_w = std::min(0.8 * W, W - W / o.canvas.grid_cols);
  const double max_h = std::min(0.8 * H, H - H / o.canvas.grid_rows);
  std::vector<double> raw(o.macros);
  double raw_sum = 0;
  for (auto& r : raw) raw_sum += (r = rng.uniform(0.6, 1.4));
  for (std::size_t i = 0; i < o.macros; ++i) {
    const double area = o.macro_area_fraction * W * H * raw[i] / raw_sum;
    const double aspect = rng.uniform(0.6, 1.6);
    double w = std::sqrt(area * aspect);
    double h = area / w;
    w = std::min(w, max_w);
    h = std::min(h, max_h);
    w = std::max(round2(w), 0.01);
    h = std::max(round2(h), 0.01);
    nl.add_node({"m" + std::to_string(i), NodeKind::macro, w, h, false, std::nullopt});
  }

  const bool cells = o.cells_per_cluster > 0;
  const std::size_t n_soft = cells ? o.clusters * o.cells_per_cluster : o.clusters;
  const double soft_area = n_soft ? o.soft_area_fraction * W * H / static_cast<double>(n_soft) : 0.0;
  std::vector<std::size_t> soft_group(n_soft);
  for (std::size_t j = 0; j < n_soft; ++j) {
    double side = std::sqrt(soft_area);
    if (!cells) side = std::sqrt(soft_area * rng.uniform(0.8, 1.2));
    side = std::max(round2(side), 0.01);
    const std::string id = (cells ? "s" : "c") + std::to_string(j);
    nl.add_node({id, cells ? NodeKind::std_cell : NodeKind::cluster, side, side, false, std::nullopt});
    soft_group[j] = cells ? j / o.cells_per_cluster : j;
  }

  for (std::size_t k = 0; k < o.ports; ++k) {
    const double tx = round2(rng.uniform(0.05, 0.95) * W);
    const double ty = round2(rng.uniform(0.05, 0.95) * H);
    Point p;
    switch (k % 4) {
      case 0: p = {tx, 0.0}; break;
      case 1: p = {W, ty}; break;
      case 2: p = {tx, H}; break;
      default: p = {0.0, ty}; break;
    }
    nl.add_node({"p" + std::to_string(k), NodeKind::port, 0.0, 0.0, true, p});
  }

  const std::size_t groups = cells ? o.clusters : std::max<std::size_t>(1, (o.clusters + 3) / 4);
  // Locality group of every node: soft nodes by construction, macros and
  // ports spread evenly over groups.
  const std::size_t n_nodes = nl.nodes().size();
  std::vector<std::size_t> group_of(n_nodes, 0);
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < o.macros; ++i) group_of[i] = i * groups / o.macros;
  for (std::size_t j = 0; j < n_soft; ++j) {
    const std::size_t g = cells ? soft_group[j] : soft_group[j] * groups / std::max<std::size_t>(1, n_soft);
    group_of[o.macros + j] = g;
    members[g].push_back(o.macros + j);
  }
  for (std::size_t k = 0; k < o.ports; ++k) group_of[o.macros + n_soft + k] = k * groups / std::max<std::size_t>(1, o.ports);

  std::vector<std::vector<std::size_t>> net_nodes;
  net_nodes.reserve(o.nets);

  // Cover every node: chunks of the group-sorted node list form local nets.
  std::vector<std::size_t> order(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) order[i] = i;
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return group_of[a] < group_of[b]; });
  const std::size_t chunk = std::max<std::size_t>(2, (n_nodes + o.nets - 1) / o.nets);
  for (std::size_t s = 0; s < n_nodes; s += chunk) {
    std::vector<std::size_t> net(order.begin() + s, order.begin() + std::min(n_nodes, s + chunk));
    if (net.size() == 1 && !net_nodes.empty()) {
      net_nodes.back().push_back(net[0]);
    } else {
      net_nodes.push_back(std::move(net));
    }
  }
  if (net_nodes.size() > o.nets) throw InfeasibleError("generate_synthetic: too few nets to touch every node");

  while (net_nodes.size() < o.nets) {
    std::size_t degree = 2;
    while (degree < 6 && rng.uniform() < 0.5) ++degree;
    degree = std::min(degree, n_nodes);
    const std::size_t g = rng.below(groups);
    std::vector<std::size_t> net;
    for (int attempt = 0; net.size() < degree && attempt < 64; ++attempt) {
      const double u = rng.uniform();
      std::size_t pick;
      if (u < 0.7 && !members[g].empty()) {
        pick = members[g][rng.below(members[g].size())];
      } else if (u < 0.85) {
        pick = rng.below(o.macros);
      } else if (u < 0.9 && o.ports > 0) {
        pick = o.macros + n_soft + rng.below(o.ports);
      } else {
        pick = rng.below(n_nodes);
      }
      if (std::find(net.begin(), net.end(), pick) == net.end()) net.push_back(pick);
    }
    if (net.size() < 2) net = {rng.below(o.macros), (rng.below(o.macros) + 1) % n_nodes};
    if (net[0] == net[1] && net.size() == 2) net[1] = (net[0] + 1) % n_nodes;
    net_nodes.push_back(std::move(net));
  }

  std::vector<std::size_t> pin_count(n_nodes, 0);
  for (std::size_t ni = 0; ni < net_nodes.size(); ++ni) {
    std::vector<std::string> pin_ids;
    for (std::size_t node : net_nodes[ni]) {
      const Node& n = nl.node(node);
      std::string pid = n.id + "." + std::to_string(pin_count[node]++);
      Point off;
      if (n.kind == NodeKind::macro) {
        off = {round2(rng.uniform(-0.45, 0.45) * n.width), round2(rng.uniform(-0.45, 0.45) * n.height)};
      } else if (n.kind == NodeKind::std_cell) {
        off = {round2(rng.uniform(-0.25, 0.25) * n.width), round2(rng.uniform(-0.25, 0.25) * n.height)};
      }
      nl.add_pin(pid, n.id, off);
      pin_ids.push_back(std::move(pid));
    }
    nl.add_net("n" + std::to_string(ni), pin_ids);
  }

  nl.finalize();
  if (o.anchors) set_center_anchors(nl);
  return nl;
}

// ---------------------------------------------------------------- placements

std::string serialize_placement(const PlacementFile& file) {
  std::string out;
  for (const auto& p : file.nodes) {
    out += "place " + p.id + ' ' + format_number(p.center.x) + ' ' + format_number(p.center.y) + '\n';
  }
  if (!file.metrics.empty()) {
    out += "# metrics\n";
    for (const auto& [k, v] : file.metrics) out += "# " + k + ' ' + format_number(v) + '\n';
  }
  return out;
}

PlacementFile parse_placement(std::string_view text) {
  PlacementFile file;
  bool in_metrics = false;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line = li + 1;
    std::string_view l = lines[li];
    const auto first = l.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    if (l[first] == '#') {
      auto toks = tokenize(l.substr(first + 1));
      if (toks.size() == 1 && toks[0].text == "metrics") {
        in_metrics = true;
      } else if (in_metrics && toks.size() == 2) {
        file.metrics.emplace_back(std::string(toks[0].text), parse_double(toks[1], line));
      }
      continue;
    }
    auto toks = tokenize(l);
    if (toks[0].text != "place") {
      throw ParseError(line, toks[0].column, "unknown record '" + std::string(toks[0].text) + "'");
    }
    if (toks.size() != 4) throw ParseError(line, toks[0].column, "expected 'place NODE_ID X Y'");
    file.nodes.push_back({std::string(toks[1].text), Point{parse_double(toks[2], line), parse_double(toks[3], line)}});
  }
  return file;
}

}  // namespace moppo
