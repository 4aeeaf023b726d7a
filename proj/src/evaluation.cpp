#include "moppo/evaluation.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include "moppo/ppo.hpp"
#include "moppo/rng.hpp"

namespace moppo {

std::vector<Preference> preference_grid(double lo, double hi, double step) {
  if (!(lo >= 0 && hi <= 1 && lo <= hi)) throw std::invalid_argument("preference grid must satisfy 0 <= lo <= hi <= 1");
  if (!(step > 0)) {
    if (lo == hi) return {Preference{lo, 1.0 - lo}};
    throw std::invalid_argument("preference grid step must be positive");
  }
  std::vector<Preference> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = std::min(hi, lo + static_cast<double>(i) * step);
    out.push_back({w, 1.0 - w});
  }
  if (hi - out.back()[0] > 1e-9) out.push_back({hi, 1.0 - hi});
  return out;
}

std::vector<Preference> parse_preference_grid(std::string_view spec) {
  double v[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? spec.find(':', pos) : spec.size();
    if (end == std::string_view::npos) throw std::invalid_argument("grid must look like lo:hi:step");
    const auto part = spec.substr(pos, end - pos);
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v[i]);
    if (ec != std::errc() || p != part.data() + part.size()) {
      throw std::invalid_argument("grid value '" + std::string(part) + "' is not a number");
    }
    pos = end + 1;
  }
  return preference_grid(v[0], v[1], v[2]);
}

const EvaluationRow* EvaluationReport::find(const Preference& w, double tol) const {
  for (const auto& r : rows) {
    if (std::abs(r.preference[0] - w[0]) <= tol && std::abs(r.preference[1] - w[1]) <= tol) return &r;
  }
  return nullptr;
}

std::vector<bool> pareto_filter(std::span<const std::array<double, 2>> pts) {
  std::vector<bool> flags(pts.size(), true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const bool ge = pts[j][0] >= pts[i][0] && pts[j][1] >= pts[i][1];
      const bool gt = pts[j][0] > pts[i][0] || pts[j][1] > pts[i][1];
      if (ge && gt) {
        flags[i] = false;
        break;
      }
    }
  }
  return flags;
}

void mark_pareto(EvaluationReport& report) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& r : report.rows) pts.push_back({r.wlc, r.anchor});
  const auto flags = pareto_filter(pts);
  for (std::size_t i = 0; i < flags.size(); ++i) report.rows[i].pareto = flags[i];
}

EvaluationReport zero_shot_eval(const PlacementEnv& env, const ActorCritic& net, std::span<const Preference> grid,
                                std::size_t episodes, std::uint64_t seed, int threads) {
  const StateEncoder encoder(env);
  if (encoder.dim() != net.input_dim() || static_cast<std::size_t>(env.action_count()) != net.actions()) {
    throw InputError("checkpoint network does not match this netlist's encoding or action grid");
  }
  for (const auto& w : grid) check_preference(w);
  const auto& weights = env.config().weights;

  struct Job {
    std::size_t row;
    std::size_t episode;  // 0 = greedy
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t e = 0; e <= episodes; ++e) jobs.push_back({i, e});
  }
  std::vector<Trajectory> results(jobs.size());
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      Rng rng(derive_seed(seed, {jobs[k].row, jobs[k].episode}));
      results[k] = run_episode(env, encoder, net, grid[jobs[k].row], rng, jobs[k].episode == 0);
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  EvaluationReport report;
  report.netlist_hash = netlist_hash(env.netlist());
  std::size_t k = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EvaluationRow row;
    row.preference = grid[i];
    const Trajectory& g = results[k++];
    row.greedy_wlc = g.reward[0];
    row.greedy_anchor = g.reward[1];
    row.greedy_objective = scalarize(g.reward, grid[i]);
    row.greedy_stuck = g.stuck;
    if (g.raw) row.greedy_raw = *g.raw;
    row.actions = g.actions;
    PlacementState replayed = env.reset(grid[i]);
    for (int a : g.actions) env.step(replayed, a);
    row.placement = env.export_trace(replayed);

    double wlc = 0, anc = 0, obj = 0;
    for (std::size_t e = 0; e < episodes; ++e) {
      const Trajectory& t = results[k++];
      wlc += t.reward[0];
      anc += t.reward[1];
      obj += scalarize(t.reward, grid[i]);
      if (t.stuck) ++row.stuck;
    }
    row.episodes = episodes;
    if (episodes > 0) {
      const double n = static_cast<double>(episodes);
      row.wlc = wlc / n;
      row.anchor = anc / n;
      row.objective = obj / n;
    } else {
      row.wlc = row.greedy_wlc;
      row.anchor = row.greedy_anchor;
      row.objective = row.greedy_objective;
    }
    row.eda = row.wlc + weights.delta * row.anchor;
    report.rows.push_back(std::move(row));
  }
  mark_pareto(report);
  return report;
}

double epsilon_gap(const EvaluationReport& a, const EvaluationReport& b, const Preference& w) {
  const auto* ra = a.find(w);
  const auto* rb = b.find(w);
  if (!ra || !rb) throw std::invalid_argument("preference missing from a report");
  return std::abs(ra->objective - rb->objective);
}

namespace {

nlohmann::json placement_json(const PlacementFile& f) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : f.nodes) nodes.push_back({{"id", n.id}, {"x", n.center.x}, {"y", n.center.y}});
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : f.metrics) metrics[k] = v;
  return {{"nodes", nodes}, {"metrics", metrics}};
}

PlacementFile placement_from_json(const nlohmann::json& j) {
  PlacementFile f;
  for (const auto& n : j.at("nodes")) f.nodes.push_back({n.at("id"), {n.at("x"), n.at("y")}});
  for (const auto& [k, v] : j.at("metrics").items()) f.metrics.emplace_back(k, v.get<double>());
  return f;
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"omega", r.preference},
                         {"wlc", r.wlc},
                         {"anchor", r.anchor},
                         {"eda", r.eda},
                         {"objective", r.objective},
                         {"greedy_wlc", r.greedy_wlc},
                         {"greedy_anchor", r.greedy_anchor},
                         {"greedy_objective", r.greedy_objective},
                         {"greedy_raw",
                          {{"wl", r.greedy_raw.wl},
                           {"cong", r.greedy_raw.cong},
                           {"anchor", r.greedy_raw.anchor},
                           {"eda", r.greedy_raw.eda}}},
                         {"episodes", r.episodes},
                         {"stuck", r.stuck},
                         {"greedy_stuck", r.greedy_stuck},
                         {"actions", r.actions},
                         {"placement", placement_json(r.placement)},
                         {"pareto", r.pareto}});
  }
  return {{"netlist_hash", netlist_hash}, {"checkpoint_hash", checkpoint_hash}, {"rows", rows_json}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  EvaluationReport rep;
  rep.netlist_hash = j.value("netlist_hash", "");
  rep.checkpoint_hash = j.value("checkpoint_hash", "");
  for (const auto& r : j.at("rows")) {
    EvaluationRow row;
    row.preference = r.at("omega").get<Preference>();
    row.wlc = r.at("wlc");
    row.anchor = r.at("anchor");
    row.eda = r.at("eda");
    row.objective = r.at("objective");
    row.greedy_wlc = r.at("greedy_wlc");
    row.greedy_anchor = r.at("greedy_anchor");
    row.greedy_objective = r.at("greedy_objective");
    const auto& raw = r.at("greedy_raw");
    row.greedy_raw = {raw.at("wl"), raw.at("cong"), raw.at("anchor"), raw.at("eda")};
    row.episodes = r.at("episodes");
    row.stuck = r.at("stuck");
    row.greedy_stuck = r.at("greedy_stuck");
    row.actions = r.at("actions").get<std::vector<int>>();
    row.placement = placement_from_json(r.at("placement"));
    row.pareto = r.at("pareto");
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace moppo
