#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. None of these call into the code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moppo/env.hpp"
#include "moppo/metrics.hpp"
#include "moppo/netlist.hpp"
#include "moppo/ppo.hpp"
#include "moppo/rng.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(MOPPO_TEST_DATA) + "/" + name; }

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Bounding box half perimeter from all pin pairs: for each axis the largest
/// pairwise distance is the extent.
inline double hpwl_all_pairs(const moppo::Placement& pl) {
  const auto& nl = pl.netlist();
  double total = 0;
  for (const auto& net : nl.nets()) {
    double dx = 0, dy = 0;
    for (std::size_t a : net.pins) {
      for (std::size_t b : net.pins) {
        const auto pa = pl.pin_position(a), pb = pl.pin_position(b);
        dx = std::max(dx, std::abs(pa.x - pb.x));
        dy = std::max(dy, std::abs(pa.y - pb.y));
      }
    }
    total += dx + dy;
  }
  return -total;
}

/// ACE(k): mean of the top ceil(k% of n) values after a full descending sort.
inline double ace_sorted(std::vector<double> values, double k) {
  std::sort(values.begin(), values.end(), std::greater<>());
  const auto n = static_cast<std::size_t>(std::ceil(k / 100.0 * static_cast<double>(values.size()) - 1e-9));
  const std::size_t m = std::max<std::size_t>(1, std::min(n, values.size()));
  double s = 0;
  for (std::size_t i = 0; i < m; ++i) s += values[i];
  return s / static_cast<double>(m);
}

inline double congestion_oracle(const std::vector<double>& values, std::span<const double> ks) {
  double s = 0;
  for (double k : ks) s += ace_sorted(values, k);
  return -s / static_cast<double>(ks.size());
}

inline double anchor_oracle(const moppo::Placement& pl, std::span<const moppo::Anchor> anchors) {
  double s = 0;
  for (const auto& a : anchors) {
    const auto p = pl.at(a.macro);
    s += a.weight * std::sqrt((p.x - a.target.x) * (p.x - a.target.x) + (p.y - a.target.y) * (p.y - a.target.y));
  }
  return -s;
}

/// Advantages by the explicit nested sum over future TD errors.
inline std::vector<moppo::RewardVector> gae_nested(std::span<const moppo::RewardVector> r,
                                                   std::span<const moppo::RewardVector> v, double gamma,
                                                   double lambda) {
  const std::size_t T = r.size();
  std::vector<moppo::RewardVector> out(T);
  for (std::size_t k = 0; k < moppo::kObjectives; ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      double a = 0;
      for (std::size_t l = 0; t + l < T; ++l) {
        const double delta = r[t + l][k] + gamma * v[t + l + 1][k] - v[t + l][k];
        a += std::pow(gamma * lambda, static_cast<double>(l)) * delta;
      }
      out[t][k] = a;
    }
  }
  return out;
}

inline std::vector<bool> pareto_pairwise(const std::vector<std::array<double, 2>>& pts) {
  std::vector<bool> keep(pts.size(), true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const bool no_worse = pts[j][0] >= pts[i][0] && pts[j][1] >= pts[i][1];
      const bool better = pts[j] != pts[i];
      if (no_worse && better) keep[i] = false;
    }
  }
  return keep;
}

inline std::optional<double> pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// All complete non-stuck macro sequences of an environment, with their reward vectors.
struct Enumerated {
  std::vector<moppo::RewardVector> rewards;
  std::vector<std::vector<int>> actions;
};

inline Enumerated enumerate_placements(const moppo::PlacementEnv& env) {
  Enumerated out;
  std::function<void(moppo::PlacementState&)> walk = [&](moppo::PlacementState& s) {
    if (s.done) {
      if (!s.stuck) {
        out.rewards.push_back(s.reward);
        out.actions.push_back(s.actions);
      }
      return;
    }
    const auto mask = env.legal_mask(s);
    for (int a = 0; a < static_cast<int>(mask.size()); ++a) {
      if (!mask[a]) continue;
      moppo::PlacementState c = s;
      env.step(c, a);
      walk(c);
    }
  };
  auto s0 = env.reset({1.0, 0.0});
  walk(s0);
  return out;
}

/// Small random netlist: `macros` macros, `cells` std-cells, `nets` nets with
/// 2..5 pins, four corner ports. Pins sit at random offsets inside their node.
inline moppo::Netlist random_netlist(std::uint64_t seed, std::size_t macros = 3, std::size_t cells = 12,
                                     std::size_t nets = 15, bool centered_pins = false) {
  moppo::Rng rng(seed);
  moppo::Netlist nl(moppo::Canvas{100.0, 100.0, 10, 10});
  std::vector<std::string> pins;
  auto add = [&](const std::string& id, moppo::NodeKind kind, double w, double h, std::optional<moppo::Point> fixed) {
    nl.add_node({id, kind, w, h, fixed.has_value(), fixed});
    const int k = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < k; ++i) {
      const double dx = centered_pins ? 0.0 : rng.uniform(-w / 2, w / 2);
      const double dy = centered_pins ? 0.0 : rng.uniform(-h / 2, h / 2);
      const std::string pid = id + "." + std::to_string(i);
      nl.add_pin(pid, id, {dx, dy});
      pins.push_back(pid);
    }
  };
  for (std::size_t i = 0; i < macros; ++i) {
    add("m" + std::to_string(i), moppo::NodeKind::macro, rng.uniform(5, 20), rng.uniform(5, 20), std::nullopt);
  }
  for (std::size_t i = 0; i < cells; ++i) {
    add("s" + std::to_string(i), moppo::NodeKind::std_cell, 1.0, 1.0, std::nullopt);
  }
  const moppo::Point corners[4] = {{0, 0}, {100, 0}, {0, 100}, {100, 100}};
  for (int i = 0; i < 4; ++i) add("p" + std::to_string(i), moppo::NodeKind::port, 0, 0, corners[i]);
  for (std::size_t n = 0; n < nets; ++n) {
    const std::size_t k = 2 + rng.below(4);
    std::vector<std::string> members;
    while (members.size() < k) {
      const auto& p = pins[rng.below(pins.size())];
      if (std::find(members.begin(), members.end(), p) == members.end()) members.push_back(p);
    }
    nl.add_net("n" + std::to_string(n), members);
  }
  nl.finalize();
  return nl;
}

/// Per-transition omega^T A, standardized with the population deviation when asked.
inline std::vector<double> scalar_adv_oracle(const std::vector<const moppo::Transition*>& ts, bool standardize) {
  std::vector<double> a;
  for (const moppo::Transition* t : ts) {
    a.push_back(t->preference[0] * t->advantage[0] + t->preference[1] * t->advantage[1]);
  }
  if (!standardize) return a;
  double m = 0;
  for (double x : a) m += x;
  m /= a.size();
  double v = 0;
  for (double x : a) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / a.size());
  for (double& x : a) x = (x - m) / (sd + 1e-8);
  return a;
}

/// Clipped surrogate by a loop over transitions, ratios from single-state probabilities.
inline double clip_oracle(const moppo::ActorCritic& net, const std::vector<const moppo::Transition*>& ts, double eps,
                          bool standardize) {
  const auto adv = scalar_adv_oracle(ts, standardize);
  double s = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const moppo::Transition& t = *ts[i];
    const double p = net.probabilities(t.features, t.preference, t.mask)[t.action];
    const double rho = std::exp(std::log(p) - t.log_prob);
    const double clipped = std::min(std::max(rho, 1 - eps), 1 + eps);
    s += std::min(rho * adv[i], clipped * adv[i]);
  }
  return s / ts.size();
}

inline double value_oracle(const moppo::ActorCritic& net, const std::vector<const moppo::Transition*>& ts) {
  double s = 0;
  for (const moppo::Transition* t : ts) {
    const moppo::RewardVector v = net.value(t->features, t->preference);
    double d = 0;
    for (std::size_t k = 0; k < moppo::kObjectives; ++k) d += t->preference[k] * (v[k] - t->target[k]);
    s += std::abs(d);
  }
  return s / ts.size();
}

inline double entropy_oracle(const moppo::ActorCritic& net, const std::vector<const moppo::Transition*>& ts) {
  double s = 0;
  for (const moppo::Transition* t : ts) {
    for (double p : net.probabilities(t->features, t->preference, t->mask)) {
      if (p > 0) s -= p * std::log(p);
    }
  }
  return s / ts.size();
}

}  // namespace testing
