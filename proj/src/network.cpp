#include "moppo/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "moppo/rng.hpp"

namespace moppo {

// ---------------------------------------------------------------- encoder

StateEncoder::StateEncoder(const PlacementEnv& env) : env_(&env) {
  const Netlist& nl = env.netlist();
  summary_cols_ = std::min(8, env.grid_cols());
  summary_rows_ = std::min(8, env.grid_rows());
  dim_ = static_cast<std::size_t>(summary_cols_ * summary_rows_) + 4 + 2 + 2 + 1 + 3 + 3;

  const double canvas_area = nl.canvas().width * nl.canvas().height;
  double macro_area = 0, soft_area = 0;
  for (std::size_t m : nl.macros()) {
    macro_area += nl.node(m).area();
    max_degree_ = std::max(max_degree_, static_cast<double>(nl.degree(m)));
  }
  for (std::size_t s : nl.soft_nodes()) soft_area += nl.node(s).area();
  macro_area_fraction_ = std::min(1.0, macro_area / canvas_area);
  soft_area_fraction_ = std::min(1.0, soft_area / canvas_area);

  auto hard = [&](std::size_t n) {
    const NodeKind k = nl.node(n).kind;
    return k == NodeKind::macro || k == NodeKind::port;
  };
  for (std::size_t m : env.order()) {
    std::map<std::size_t, double> w;
    for (std::size_t net : nl.nets_of(m)) {
      for (std::size_t p : nl.nets()[net].pins) {
        const std::size_t u = nl.pins()[p].owner;
        if (u == m) continue;
        if (hard(u)) {
          w[u] += 1.0;
          continue;
        }
        for (std::size_t net2 : nl.nets_of(u)) {
          if (net2 == net) continue;
          for (std::size_t p2 : nl.nets()[net2].pins) {
            const std::size_t v = nl.pins()[p2].owner;
            if (v != m && hard(v)) w[v] += 0.5;
          }
        }
      }
    }
    std::vector<Neighbour> list;
    for (const auto& [n, weight] : w) list.push_back({n, weight});
    neighbours_.push_back(std::move(list));

    std::optional<Point> target;
    for (const Anchor& a : nl.anchors()) {
      if (a.macro == m) target = a.target;
    }
    anchor_.push_back(target);
  }
}

std::vector<double> StateEncoder::encode(const PlacementState& s) const {
  const Netlist& nl = env_->netlist();
  const double W = nl.canvas().width, H = nl.canvas().height;
  auto sx = [&](double x) { return std::clamp(2.0 * x / W - 1.0, -1.0, 1.0); };
  auto sy = [&](double y) { return std::clamp(2.0 * y / H - 1.0, -1.0, 1.0); };

  std::vector<double> f;
  f.reserve(dim_);
  const int cols = env_->grid_cols(), rows = env_->grid_rows();
  for (int br = 0; br < summary_rows_; ++br) {
    const int r0 = br * rows / summary_rows_, r1 = (br + 1) * rows / summary_rows_;
    for (int bc = 0; bc < summary_cols_; ++bc) {
      const int c0 = bc * cols / summary_cols_, c1 = (bc + 1) * cols / summary_cols_;
      int occupied = 0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) occupied += s.occupancy[r * cols + c] ? 1 : 0;
      }
      f.push_back(static_cast<double>(occupied) / ((r1 - r0) * (c1 - c0)));
    }
  }

  const auto& order = env_->order();
  const bool has_cursor = s.cursor < order.size() && !s.done;
  if (has_cursor) {
    const Node& n = nl.node(order[s.cursor]);
    f.push_back(n.width / W);
    f.push_back(n.height / H);
    f.push_back(n.area() / (W * H));
    f.push_back(nl.degree(order[s.cursor]) / max_degree_);
  } else {
    f.insert(f.end(), 4, 0.0);
  }
  f.push_back(macro_area_fraction_);
  f.push_back(soft_area_fraction_);

  double cx = 0, cy = 0;
  for (std::size_t i = 0; i < s.cursor; ++i) {
    const Point p = s.placement.at(order[i]);
    cx += p.x;
    cy += p.y;
  }
  if (s.cursor > 0) {
    f.push_back(sx(cx / s.cursor));
    f.push_back(sy(cy / s.cursor));
  } else {
    f.insert(f.end(), 2, 0.0);
  }
  f.push_back(order.empty() ? 1.0 : static_cast<double>(s.cursor) / order.size());

  if (has_cursor) {
    double wx = 0, wy = 0, placed = 0, total = 0;
    for (const auto& nb : neighbours_[s.cursor]) {
      total += nb.weight;
      if (!s.placement.placed(nb.node)) continue;
      const Point p = s.placement.at(nb.node);
      wx += nb.weight * p.x;
      wy += nb.weight * p.y;
      placed += nb.weight;
    }
    if (placed > 0) {
      f.push_back(sx(wx / placed));
      f.push_back(sy(wy / placed));
    } else {
      f.insert(f.end(), 2, 0.0);
    }
    f.push_back(total > 0 ? placed / total : 0.0);
    if (const auto& a = anchor_[s.cursor]) {
      f.push_back(sx(a->x));
      f.push_back(sy(a->y));
      f.push_back(1.0);
    } else {
      f.insert(f.end(), 3, 0.0);
    }
  } else {
    f.insert(f.end(), 6, 0.0);
  }
  return f;
}

// ---------------------------------------------------------------- networks

namespace {

Matrix xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& v : m.data) v = rng.uniform(-a, a);
  return m;
}

// Plain forward helpers used for single-state inference.
std::vector<double> affine(std::span<const double> x, const Matrix& w, const Matrix& b) {
  std::vector<double> y(b.data.begin(), b.data.end());
  for (std::size_t k = 0; k < w.rows; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += xk * w(k, j);
  }
  return y;
}

}  // namespace

void ActorCritic::add_network(const std::string& prefix, std::size_t outputs, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t h = config_.hidden, ph = config_.preference_hidden, k = config_.objectives;
  params_.add(prefix + ".w1", xavier(input_dim_, h, rng));
  params_.add(prefix + ".b1", Matrix(1, h));
  params_.add(prefix + ".wp", xavier(k, ph, rng));
  params_.add(prefix + ".bp", Matrix(1, ph));
  params_.add(prefix + ".w2", xavier(h + ph, h, rng));
  params_.add(prefix + ".b2", Matrix(1, h));
  params_.add(prefix + ".wh", Matrix(h, outputs));
  params_.add(prefix + ".bh", Matrix(1, outputs));
}

ActorCritic::ActorCritic(std::size_t input_dim, std::size_t actions, NetworkConfig config, std::uint64_t seed)
    : input_dim_(input_dim), actions_(actions), config_(config) {
  if (input_dim == 0 || actions == 0 || config.hidden == 0 || config.objectives == 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  add_network("policy", actions, derive_seed(seed, {0}));
  for (std::size_t k = 0; k < config.objectives; ++k) {
    add_network("value" + std::to_string(k), 1, derive_seed(seed, {k + 1}));
  }
}

ActorCritic ActorCritic::from_params(ParameterSet params, NetworkConfig config) {
  ActorCritic net;
  net.config_ = config;
  const Parameter& w1 = params.at("policy.w1");
  const Parameter& wh = params.at("policy.wh");
  net.input_dim_ = w1.value.rows;
  net.actions_ = wh.value.cols;
  net.config_.hidden = w1.value.cols;
  net.config_.preference_hidden = params.at("policy.wp").value.cols;
  net.config_.objectives = params.at("policy.wp").value.rows;
  ActorCritic shape(net.input_dim_, net.actions_, net.config_, 0);
  if (shape.params_.params().size() != params.params().size()) throw InputError("parameter set does not match the network layout");
  for (const auto& p : shape.params_.params()) {
    if (!params.contains(p.name)) throw InputError("missing parameter '" + p.name + "'");
    const auto& q = params.at(p.name);
    if (q.value.rows != p.value.rows || q.value.cols != p.value.cols) {
      throw InputError("parameter '" + p.name + "' has the wrong shape");
    }
  }
  net.params_ = std::move(params);
  return net;
}

Var ActorCritic::trunk(Tape& tape, const std::string& prefix, const Matrix& x, const Matrix& preference) {
  auto P = [&](const char* n) { return tape.param(params_.at(prefix + n)); };
  Var xv = tape.constant(x);
  Var wv = tape.constant(preference);
  Var h1 = elu(add_row(matmul(xv, P(".w1")), P(".b1")));
  Var ph = tanh(add_row(matmul(wv, P(".wp")), P(".bp")));
  Var h2 = elu(add_row(matmul(concat_cols(h1, ph), P(".w2")), P(".b2")));
  return add_row(matmul(h2, P(".wh")), P(".bh"));
}

Var ActorCritic::policy_log_probs(Tape& tape, const Matrix& x, const Matrix& preference, std::span<const char> mask) {
  return masked_log_softmax(trunk(tape, "policy", x, preference), mask);
}

Var ActorCritic::values(Tape& tape, const Matrix& x, const Matrix& preference) {
  Var out = trunk(tape, "value0", x, preference);
  for (std::size_t k = 1; k < config_.objectives; ++k) {
    out = concat_cols(out, trunk(tape, "value" + std::to_string(k), x, preference));
  }
  return out;
}

namespace {

std::vector<double> plain_forward(const ParameterSet& ps, const std::string& prefix, std::span<const double> x,
                                  const Preference& w) {
  auto P = [&](const char* n) -> const Matrix& { return ps.at(prefix + n).value; };
  auto h1 = affine(x, P(".w1"), P(".b1"));
  for (double& v : h1) v = v > 0 ? v : std::expm1(v);
  auto ph = affine(w, P(".wp"), P(".bp"));
  for (double& v : ph) v = std::tanh(v);
  h1.insert(h1.end(), ph.begin(), ph.end());
  auto h2 = affine(h1, P(".w2"), P(".b2"));
  for (double& v : h2) v = v > 0 ? v : std::expm1(v);
  return affine(h2, P(".wh"), P(".bh"));
}

}  // namespace

std::vector<double> ActorCritic::logits(std::span<const double> x, const Preference& w) const {
  if (x.size() != input_dim_) throw std::invalid_argument("state encoding has the wrong dimension");
  return plain_forward(params_, "policy", x, w);
}

std::vector<double> ActorCritic::probabilities(std::span<const double> x, const Preference& w,
                                               std::span<const char> mask) const {
  auto z = logits(x, w);
  if (mask.size() != z.size()) throw std::invalid_argument("mask has the wrong size");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (mask[j]) mx = std::max(mx, z[j]);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("policy queried with no legal cell");
  double s = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = mask[j] ? std::exp(z[j] - mx) : 0.0;
    s += z[j];
  }
  for (double& v : z) v /= s;
  return z;
}

RewardVector ActorCritic::value(std::span<const double> x, const Preference& w) const {
  if (x.size() != input_dim_) throw std::invalid_argument("state encoding has the wrong dimension");
  RewardVector out{};
  for (std::size_t k = 0; k < kObjectives && k < config_.objectives; ++k) {
    out[k] = plain_forward(params_, "value" + std::to_string(k), x, w)[0];
  }
  return out;
}

Matrix preference_rows(std::span<const Preference> prefs) {
  Matrix m(prefs.size(), kObjectives);
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    for (std::size_t k = 0; k < kObjectives; ++k) m(i, k) = prefs[i][k];
  }
  return m;
}

// ---------------------------------------------------------------- optimizer

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(&params), config_(config) {
  for (const auto& p : params.params()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(double lr) {
  params_->check_finite_grads();
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto& ps = params_->params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& value = ps[i].value.data;
    const auto& grad = ps[i].grad.data;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
      value[j] -= lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + config_.eps);
    }
  }
}

double lr_schedule(double lr0, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return lr0;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return lr0 * (1.0 - 0.9 * frac);
}

}  // namespace moppo
