#include "moppo/env.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "moppo/rng.hpp"

namespace moppo {

void check_preference(const Preference& w) {
  double sum = 0;
  for (double x : w) {
    if (!std::isfinite(x) || x < -1e-9) throw std::invalid_argument("preference weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("preference weights must sum to 1");
}

PlacementEnv::PlacementEnv(const Netlist& netlist, RewardConfig config, Normalizer normalizer)
    : netlist_(&netlist), config_(std::move(config)), normalizer_(normalizer) {
  for (std::size_t m : netlist.macros()) (netlist.node(m).fixed ? fixed_macros_ : order_).push_back(m);
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    const double aa = netlist.node(a).area(), ab = netlist.node(b).area();
    if (aa != ab) return aa > ab;
    return netlist.node(a).id < netlist.node(b).id;
  });
  cols_ = netlist.canvas().grid_cols;
  rows_ = netlist.canvas().grid_rows;
  cell_w_ = netlist.canvas().width / cols_;
  cell_h_ = netlist.canvas().height / rows_;
}

Point PlacementEnv::cell_center(int action) const {
  const int c = action % cols_, r = action / cols_;
  return {(c + 0.5) * cell_w_, (r + 0.5) * cell_h_};
}

bool PlacementEnv::fits(const PlacementState& state, std::size_t macro, Point center) const {
  const Node& n = netlist_->node(macro);
  const Canvas& cv = netlist_->canvas();
  const Rect r = Rect::centered(center, n.width, n.height);
  constexpr double tol = 1e-9;
  if (r.x0 < -tol || r.y0 < -tol || r.x1 > cv.width + tol || r.y1 > cv.height + tol) return false;
  for (std::size_t m : fixed_macros_) {
    if (overlaps(r, state.placement.footprint(m))) return false;
  }
  for (std::size_t i = 0; i < state.cursor; ++i) {
    if (overlaps(r, state.placement.footprint(order_[i]))) return false;
  }
  return true;
}

void PlacementEnv::mark_occupancy(PlacementState& state, std::size_t macro) const {
  const Rect r = state.placement.footprint(macro);
  constexpr double tol = 1e-9;
  for (int row = 0; row < rows_; ++row) {
    const double y0 = row * cell_h_, y1 = y0 + cell_h_;
    if (std::min(y1, r.y1) - std::max(y0, r.y0) <= tol) continue;
    for (int col = 0; col < cols_; ++col) {
      const double x0 = col * cell_w_, x1 = x0 + cell_w_;
      if (std::min(x1, r.x1) - std::max(x0, r.x0) > tol) state.occupancy[row * cols_ + col] = 1;
    }
  }
}

PlacementState PlacementEnv::reset(const Preference& preference) const {
  check_preference(preference);
  PlacementState s{Placement(*netlist_)};
  s.occupancy.assign(action_count(), 0);
  s.preference = preference;
  for (std::size_t m : fixed_macros_) mark_occupancy(s, m);
  if (order_.empty()) {
    finish(s);
  } else {
    const auto mask = legal_mask(s);
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
      s.done = s.stuck = true;
      s.reward = {kStuckReward, kStuckReward};
    }
  }
  return s;
}

std::vector<char> PlacementEnv::legal_mask(const PlacementState& state) const {
  if (state.done || state.cursor >= order_.size()) throw std::logic_error("legal_mask queried on a terminal state");
  const std::size_t macro = order_[state.cursor];
  std::vector<char> mask(action_count(), 0);
  for (int a = 0; a < action_count(); ++a) mask[a] = fits(state, macro, cell_center(a)) ? 1 : 0;
  return mask;
}

StepResult PlacementEnv::step(PlacementState& state, int action) const {
  if (state.done) throw std::logic_error("step called on a terminal state");
  if (action < 0 || action >= action_count()) {
    throw GeometryError("action " + std::to_string(action) + " is outside the action grid");
  }
  const std::size_t macro = order_[state.cursor];
  if (!fits(state, macro, cell_center(action))) {
    throw GeometryError("illegal action " + std::to_string(action) + " for macro '" + netlist_->node(macro).id +
                        "': footprint leaves the canvas or overlaps a placed macro");
  }
  state.placement.set(macro, cell_center(action));
  mark_occupancy(state, macro);
  state.actions.push_back(action);
  ++state.cursor;

  StepResult out;
  if (state.cursor == order_.size()) {
    finish(state);
  } else {
    const auto mask = legal_mask(state);
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
      state.done = state.stuck = true;
      state.reward = {kStuckReward, kStuckReward};
    }
  }
  out.terminal = state.done;
  out.reward = state.done ? state.reward : RewardVector{0.0, 0.0};
  return out;
}

void PlacementEnv::finish(PlacementState& state) const {
  const Evaluation ev = score(state.placement);
  state.raw = ev.raw;
  state.normalized = normalizer_.normalize(ev.raw, config_.weights);
  state.reward = reward_of(*state.normalized);
  state.done = true;
}

Evaluation PlacementEnv::score(const Placement& placement) const { return evaluate_placement(placement, config_); }

RewardVector PlacementEnv::reward_of(const MetricSet& n) const { return {n.wlc(config_.weights), n.anchor}; }

PlacementState PlacementEnv::replay(std::span<const int> actions, const Preference& preference) const {
  PlacementState s = reset(preference);
  for (int a : actions) {
    if (s.done) throw GeometryError("replay has more actions than the episode allows");
    step(s, a);
  }
  if (!s.done) throw GeometryError("replay ended before every macro was placed");
  return s;
}

PlacementFile PlacementEnv::export_trace(const PlacementState& state) const {
  PlacementFile f;
  for (std::size_t i = 0; i < state.cursor; ++i) {
    const std::size_t m = order_[i];
    f.nodes.push_back({netlist_->node(m).id, state.placement.at(m)});
  }
  if (state.raw) {
    f.metrics = {{"wl", state.raw->wl}, {"cong", state.raw->cong}, {"anchor", state.raw->anchor}};
    f.metrics.push_back({"r_wlc", state.reward[0]});
    f.metrics.push_back({"r_anchor", state.reward[1]});
  }
  if (state.stuck) f.metrics.push_back({"stuck", 1.0});
  return f;
}

PlacementState uniform_rollout(const PlacementEnv& env, const Preference& preference, std::uint64_t seed) {
  Rng rng(seed);
  PlacementState s = env.reset(preference);
  std::vector<int> legal;
  while (!s.done) {
    const auto mask = env.legal_mask(s);
    legal.clear();
    for (int a = 0; a < static_cast<int>(mask.size()); ++a) {
      if (mask[a]) legal.push_back(a);
    }
    env.step(s, legal[rng.below(legal.size())]);
  }
  return s;
}

Normalizer normalizer_from_samples(std::span<const MetricSet> samples, std::vector<std::string>* warnings) {
  Normalizer n;
  n.sample_count = samples.size();
  double wl = 0, cong = 0, anc = 0;
  for (const auto& m : samples) {
    wl += m.wl;
    cong += m.cong;
    anc += m.anchor;
  }
  const double count = static_cast<double>(samples.size());
  auto scale = [&](double total, const char* name) {
    const double mean = samples.empty() ? 0.0 : total / count;
    if (mean == 0.0) {
      if (warnings) warnings->push_back(std::string("mean of ") + name + " is 0; using scale 1");
      return 1.0;
    }
    return std::abs(mean);
  };
  n.wl_scale = scale(wl, "wl");
  n.cong_scale = scale(cong, "cong");
  n.anchor_scale = scale(anc, "anchor");
  return n;
}

NormalizerFit fit_normalizer(const PlacementEnv& env, std::size_t samples, std::uint64_t seed, int threads) {
  if (samples < 1) throw std::invalid_argument("fit_normalizer: samples must be at least 1");
  std::vector<std::optional<MetricSet>> results(samples);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples; i = next++) {
      const PlacementState s = uniform_rollout(env, {1.0, 0.0}, derive_seed(seed, {i}));
      if (!s.stuck) results[i] = s.raw;
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(samples)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  NormalizerFit fit;
  for (auto& r : results) {
    if (r) fit.samples.push_back(*r);
    else ++fit.stuck;
  }
  if (fit.samples.empty()) throw InfeasibleError("fit_normalizer: every rollout got stuck");
  fit.normalizer = normalizer_from_samples(fit.samples, &fit.warnings);
  return fit;
}

std::string NormalizerFit::samples_csv() const {
  std::string out = "episode,wl,cong,anchor\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += std::to_string(i) + ',' + format_number(samples[i].wl) + ',' + format_number(samples[i].cong) + ',' +
           format_number(samples[i].anchor) + '\n';
  }
  return out;
}

}  // namespace moppo
