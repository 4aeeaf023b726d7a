// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include "moppo/checkpoint.hpp"
#include "moppo/cli.hpp"
#include "moppo/clustering.hpp"
#include "moppo/evaluation.hpp"
#include "moppo/manifest.hpp"
#include "support.hpp"

using namespace moppo;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

int hardware_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// ---------------------------------------------------------------- metrics

void metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  Rng rng(2024);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Netlist nl = testing::random_netlist(seed, 3, 12 + seed % 20, 15 + seed % 25);
    Placement pl(nl);
    std::vector<Anchor> anchors;
    for (std::size_t m : nl.macros()) {
      const Node& n = nl.node(m);
      pl.set(m, {rng.uniform(n.width / 2, 100 - n.width / 2), rng.uniform(n.height / 2, 100 - n.height / 2)});
      anchors.push_back({m, {rng.uniform(0, 100), rng.uniform(0, 100)}, rng.uniform(0.5, 5)});
    }
    RewardConfig cfg;
    cfg.weights = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 2)};
    const Evaluation ev = evaluate_placement(pl, cfg, std::span<const Anchor>(anchors));

    const double wl = testing::hpwl_all_pairs(ev.placement);
    const double cong = testing::congestion_oracle(ev.congestion.congestion(), cfg.ks);
    const double anc = testing::anchor_oracle(ev.placement, anchors);
    const double eda = cfg.weights.alpha * wl + cfg.weights.beta * cong + cfg.weights.delta * anc;
    worst = std::max({worst, rel_err(ev.raw.wl, wl), rel_err(hpwl(ev.placement), wl), rel_err(ev.raw.cong, cong),
                      rel_err(ev.raw.anchor, anc), rel_err(anchor_distance(ev.placement, anchors), anc),
                      rel_err(ev.raw.eda, eda), rel_err(eda_objective(wl, cong, anc, cfg.weights), eda)});

    std::vector<double> hist(1 + rng.below(2000));
    for (double& x : hist) x = rng.uniform(0, 3);
    worst = std::max(worst, rel_err(congestion_cost(hist), testing::congestion_oracle(hist, kDefaultAceKs)));
  }
  std::vector<double> example(995, 1.0);
  example.insert(example.begin() + 500, 5, 2.0);
  const double ace = congestion_cost(example);
  const double secs = seconds_since(t0);
  report(worst <= 1e-9 && ace == -1.4625 && secs < 60, "metric-oracles",
         fmt("500 instances, worst relative error %.2e; ACE example %.6f; %.1f s", worst, ace, secs));
}

// ---------------------------------------------------------------- gae

void gae() {
  Rng rng(77);
  double worst = 0;
  std::size_t cases = 0;
  for (std::size_t T = 1; T <= 20; ++T) {
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<RewardVector> r(T), v(T + 1);
      for (auto& x : r) x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      for (std::size_t t = 0; t < T; ++t) v[t] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double gamma = rng.uniform(0.01, 1.0), lambda = rng.uniform(0, 1);
      const GaeResult g = compute_gae(r, v, gamma, lambda);
      const auto ref = testing::gae_nested(r, v, gamma, lambda);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < kObjectives; ++k) {
          worst = std::max(worst, std::abs(g.advantages[t][k] - ref[t][k]) / std::max(1.0, std::abs(ref[t][k])));
        }
      }
      ++cases;
    }
  }
  report(worst <= 1e-12, "gae", fmt("%zu trajectories, T = 1..20, worst error %.2e", cases, worst));
}

// ---------------------------------------------------------------- losses

struct Transitions {
  std::vector<Trajectory> episodes;
  std::vector<const Transition*> ptrs;
};

Transitions random_transitions(const PlacementEnv& env, const StateEncoder& enc, const ActorCritic& net,
                               std::uint64_t seed, std::size_t episodes) {
  Transitions out;
  Rng rng(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    Trajectory t = run_episode(env, enc, net, sample_preference(rng), rng, false);
    for (auto& s : t.steps) {
      s.log_prob += rng.uniform(-0.5, 0.5);
      for (std::size_t k = 0; k < kObjectives; ++k) {
        s.advantage[k] = rng.uniform(-1, 1);
        s.target[k] = rng.uniform(-1, 0);
      }
    }
    out.episodes.push_back(std::move(t));
  }
  for (const auto& t : out.episodes) {
    for (const auto& s : t.steps) out.ptrs.push_back(&s);
  }
  return out;
}

ActorCritic random_net(const PlacementEnv& env, const StateEncoder& enc, std::uint64_t seed, double spread) {
  ActorCritic net(enc.dim(), env.action_count(), {}, seed);
  Rng rng(seed ^ 0x5eed);
  for (auto& p : net.params().params()) {
    for (double& v : p.value.data) v = rng.uniform(-spread, spread);
  }
  return net;
}

void losses(const Netlist& toy) {
  const PlacementEnv env(toy, {}, Normalizer{1500, 1.3, 900, 1});
  const StateEncoder enc(env);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ActorCritic net = random_net(env, enc, seed, 0.3);
    const Transitions tr = random_transitions(env, enc, net, seed + 500, 6);
    const Batch b = Batch::from(tr.ptrs);
    const double c1 = 0.5, c2 = 0.01 + 0.05 * static_cast<double>(seed % 3);
    for (bool standardize : {false, true}) {
      Tape tape;
      const LossTerms terms = total_objective(tape, net, b, 0.2, c1, c2, standardize);
      const double clip = testing::clip_oracle(net, tr.ptrs, 0.2, standardize);
      const double value = testing::value_oracle(net, tr.ptrs);
      const double entropy = testing::entropy_oracle(net, tr.ptrs);
      worst = std::max({worst, rel_err(terms.clip.value()(0, 0), clip), rel_err(terms.value.value()(0, 0), value),
                        rel_err(terms.entropy.value()(0, 0), entropy),
                        rel_err(terms.objective.value()(0, 0), clip - c1 * value + c2 * entropy)});
    }
  }

  // Behavior log-probabilities taken from the same network: every ratio is exactly 1.
  ActorCritic net = random_net(env, enc, 99, 0.3);
  const Transitions tr = random_transitions(env, enc, net, 600, 6);
  std::vector<Transition> same;
  {
    const Batch b = Batch::from(tr.ptrs);
    Tape tape;
    const Var logp = net.policy_log_probs(tape, b.features, b.preferences, b.masks);
    for (std::size_t i = 0; i < tr.ptrs.size(); ++i) {
      Transition t = *tr.ptrs[i];
      t.log_prob = logp.value()(i, t.action);
      same.push_back(t);
    }
  }
  std::vector<const Transition*> ptrs;
  for (const auto& t : same) ptrs.push_back(&t);
  Tape tape;
  const double got = clip_objective(tape, net, Batch::from(ptrs), 0.2, false).value()(0, 0);
  double expect = 0;
  for (const Transition* t : ptrs) expect += t->preference[0] * t->advantage[0] + t->preference[1] * t->advantage[1];
  expect /= static_cast<double>(ptrs.size());
  report(worst <= 1e-9 && got == expect, "losses",
         fmt("20 batches, worst relative error %.2e; ratio-one objective %.17g vs mean %.17g", worst, got, expect));
}

// ---------------------------------------------------------------- gradients

// Central-difference check of every (or a sample of) parameter coordinates.
double fd_error(ParameterSet& ps, const std::function<Var(Tape&)>& f, std::size_t max_coords, Rng& rng) {
  ps.zero_grad();
  {
    Tape tape;
    tape.backward(f(tape));
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < ps.params().size(); ++p) {
    for (std::size_t i = 0; i < ps.params()[p].value.size(); ++i) coords.emplace_back(p, i);
  }
  if (coords.size() > max_coords) {
    for (std::size_t i = 0; i < max_coords; ++i) std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    coords.resize(max_coords);
  }
  double num = 0, den = 0;
  for (auto [p, i] : coords) {
    double& x = ps.params()[p].value.data[i];
    const double keep = x, h = 1e-6 * std::max(1.0, std::abs(keep));
    x = keep + h;
    Tape up;
    const double fu = f(up).value()(0, 0);
    x = keep - h;
    Tape down;
    const double fdn = f(down).value()(0, 0);
    x = keep;
    const double fd = (fu - fdn) / (2 * h);
    const double g = ps.params()[p].grad.data[i];
    num += (g - fd) * (g - fd);
    den += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

// A random chain of shape-compatible ops ending in a scalar.
std::function<Var(Tape&)> random_graph(ParameterSet& ps, Rng& rng) {
  const std::size_t n = 2 + rng.below(4), m = 2 + rng.below(4);
  auto rand_matrix = [&](std::size_t r, std::size_t c) {
    Matrix x(r, c);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    return x;
  };
  ps.add("x", rand_matrix(n, m));
  struct Step {
    int op;
    std::size_t cols;
    std::string param;
  };
  std::vector<Step> steps;
  std::size_t cols = m;
  const std::size_t length = 3 + rng.below(6);
  for (std::size_t s = 0; s < length; ++s) {
    const int op = static_cast<int>(rng.below(12));
    const std::string name = "p" + std::to_string(s);
    switch (op) {
      case 0: {  // matmul
        const std::size_t k = 2 + rng.below(4);
        ps.add(name, rand_matrix(cols, k));
        cols = k;
        break;
      }
      case 1:  // add_row
        ps.add(name, rand_matrix(1, cols));
        break;
      case 2:
      case 3:
      case 4:
      case 5:  // add, sub, mul, minimum
        ps.add(name, rand_matrix(n, cols));
        break;
      case 6: {  // concat
        const std::size_t k = 1 + rng.below(3);
        ps.add(name, rand_matrix(n, k));
        cols += k;
        break;
      }
      default:
        break;
    }
    steps.push_back({op, cols, name});
  }
  std::vector<char> mask(n * cols, 1);
  std::vector<std::size_t> index(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) mask[r * cols + c] = rng.below(4) != 0 || c == 0;
    do {
      index[r] = rng.below(cols);
    } while (!mask[r * cols + index[r]]);
  }
  const int tail = static_cast<int>(rng.below(3));
  return [&ps, steps, mask, index, tail](Tape& t) {
    Var v = t.param(ps.at("x"));
    for (const Step& s : steps) {
      switch (s.op) {
        case 0: v = matmul(v, t.param(ps.at(s.param))); break;
        case 1: v = add_row(v, t.param(ps.at(s.param))); break;
        case 2: v = add(v, t.param(ps.at(s.param))); break;
        case 3: v = sub(v, t.param(ps.at(s.param))); break;
        case 4: v = mul(v, t.param(ps.at(s.param))); break;
        case 5: v = minimum(v, t.param(ps.at(s.param))); break;
        case 6: v = concat_cols(v, t.param(ps.at(s.param))); break;
        case 7: v = elu(v); break;
        case 8: v = tanh(v); break;
        case 9: v = exp(tanh(v)); break;
        case 10: v = abs(add_scalar(v, 0.1)); break;
        default: v = scale(clamp(v, -0.7, 0.7), 1.3); break;
      }
    }
    switch (tail) {
      case 0: return mean(entropy_rows(masked_log_softmax(v, mask)));
      case 1: return sum(gather_cols(masked_log_softmax(v, mask), index));
      default: return mean(mul(sum_cols(v), sum_cols(v)));
    }
  };
}

void gradients(const Netlist& toy) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(123);
  double worst = 0;
  std::size_t graphs = 0;
  for (int g = 0; g < 40; ++g) {
    ParameterSet ps;
    const auto f = random_graph(ps, rng);
    worst = std::max(worst, fd_error(ps, f, 1000, rng));
    ++graphs;
  }
  const PlacementEnv env(toy, {}, Normalizer{1500, 1.3, 900, 1});
  const StateEncoder enc(env);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ActorCritic net = random_net(env, enc, seed + 40, 0.2);
    const Transitions tr = random_transitions(env, enc, net, seed + 900, 3);
    const Batch b = Batch::from(tr.ptrs);
    const bool standardize = seed % 2 == 0;
    const auto f = [&](Tape& t) { return total_objective(t, net, b, 0.2, 0.5, 0.05, standardize).objective; };
    worst = std::max(worst, fd_error(net.params(), f, 400, rng));
    ++graphs;
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-4 && secs < 120, "gradients",
         fmt("%zu graphs (10 full policy+value losses), worst relative error %.2e; %.1f s", graphs, worst, secs));
}

// ---------------------------------------------------------------- toy instance

struct ToySetup {
  Normalizer normalizer;
  RewardVector best{};   // enumerated optimum per objective
  RewardVector random{}; // uniform-policy mean per objective
  std::size_t placements = 0;
};

ToySetup toy_setup(const Netlist& toy) {
  ToySetup s;
  const PlacementEnv raw(toy);
  s.normalizer = fit_normalizer(raw, 1000, 1, hardware_threads()).normalizer;
  const PlacementEnv env(toy, {}, s.normalizer);
  const auto all = testing::enumerate_placements(env);
  s.placements = all.rewards.size();
  s.best = {-1e300, -1e300};
  for (const auto& r : all.rewards) {
    for (std::size_t k = 0; k < kObjectives; ++k) s.best[k] = std::max(s.best[k], r[k]);
  }
  for (std::uint64_t e = 0; e < 2000; ++e) {
    const PlacementState st = uniform_rollout(env, {0.5, 0.5}, derive_seed(31, {e}));
    for (std::size_t k = 0; k < kObjectives; ++k) s.random[k] += st.reward[k] / 2000.0;
  }
  return s;
}

TrainConfig fixed_config(const Preference& w) {
  TrainConfig c;
  c.buffer_episodes = 256;
  c.batch = 256;
  c.epochs = 4;
  c.lr = 2e-3;
  c.c2 = 0.3;
  c.total_updates = 200;
  c.early_stop = false;
  c.fixed_preference = w;
  c.seed = 1;
  c.threads = hardware_threads();
  return c;
}

TrainConfig moppo_config() {
  TrainConfig c;
  c.buffer_episodes = 256;
  c.batch = 256;
  c.epochs = 4;
  c.lr = 2e-3;
  c.c2 = 0.3;
  c.total_updates = 400;
  c.early_stop = false;
  c.seed = 1;
  c.threads = hardware_threads();
  return c;
}

constexpr std::size_t kEvalEpisodes = 32;

void toy_criteria(const Netlist& toy) {
  const auto t0 = std::chrono::steady_clock::now();
  const ToySetup s = toy_setup(toy);
  const PlacementEnv env(toy, {}, s.normalizer);
  const Preference w1{1.0, 0.0}, w0{0.0, 1.0};
  const std::vector<Preference> ends = {w0, w1};

  const TrainResult fixed1 = train(env, fixed_config(w1));
  const TrainResult fixed0 = train(env, fixed_config(w0));
  const EvaluationReport f1 = zero_shot_eval(env, fixed1.net, std::vector<Preference>{w1}, kEvalEpisodes, 5,
                                             hardware_threads());
  const EvaluationReport f0 = zero_shot_eval(env, fixed0.net, std::vector<Preference>{w0}, kEvalEpisodes, 5,
                                             hardware_threads());
  EvaluationReport fixed;
  fixed.rows = {f0.rows[0], f1.rows[0]};

  const double j1 = f1.rows[0].objective;
  const double gap_a = std::abs(j1 - s.best[0]) / std::abs(s.best[0]);
  report(gap_a <= 0.05, "toy-optimality-a",
         fmt("%zu enumerated placements; fixed PPO at (1,0) J = %.6f, optimum %.6f, gap %.2f%% (limit 5%%)",
             s.placements, j1, s.best[0], 100 * gap_a));

  const TrainResult mo = train(env, moppo_config());
  const auto grid = parse_preference_grid("0:1:0.1");
  const EvaluationReport rep = zero_shot_eval(env, mo.net, grid, kEvalEpisodes, 5, hardware_threads());

  bool ok_b = true;
  std::string detail;
  for (std::size_t k = 0; k < 2; ++k) {
    const Preference& w = ends[k];
    const double gap = epsilon_gap(rep, fixed, w);
    const double random_j = scalarize(s.random, w);
    const double range = std::abs(fixed.find(w)->objective - random_j);
    ok_b = ok_b && gap <= 0.1 * range;
    detail += fmt("%s(%g,%g) MOPPO %.6f fixed %.6f random %.6f gap %.6f <= %.6f", k ? "; " : "", w[0], w[1],
                  rep.find(w)->objective, fixed.find(w)->objective, random_j, gap, 0.1 * range);
  }
  report(ok_b, "toy-optimality-b", detail);

  // Pareto recovery over the distinct non-dominated points ordered by omega_1.
  std::vector<const EvaluationRow*> front;
  std::vector<std::array<double, 2>> pts;
  for (const auto& r : rep.rows) pts.push_back({r.wlc, r.anchor});
  const auto flags = testing::pareto_pairwise(pts);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    if (!flags[i] || rep.rows[i].pareto != flags[i]) continue;
    bool dup = false;
    for (const auto* f : front) dup = dup || (f->wlc == rep.rows[i].wlc && f->anchor == rep.rows[i].anchor);
    if (!dup) front.push_back(&rep.rows[i]);
  }
  bool flags_agree = true;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) flags_agree = flags_agree && rep.rows[i].pareto == flags[i];
  std::size_t inversions = 0;
  double worst_inversion = 0;
  for (std::size_t i = 1; i < front.size(); ++i) {
    const double dw = front[i - 1]->wlc - front[i]->wlc;       // > 0 means wlc got worse
    const double da = front[i]->anchor - front[i - 1]->anchor;  // > 0 means anchor got better
    if (dw > 0 || da > 0) {
      ++inversions;
      worst_inversion = std::max({worst_inversion, dw, da});
    }
  }
  std::string pts_text;
  for (const auto* f : front) pts_text += fmt(" (%.2f: %.4f, %.4f)", f->preference[0], f->wlc, f->anchor);
  report(flags_agree && front.size() >= 4 && inversions <= 1 && worst_inversion <= 0.02, "pareto-recovery",
         fmt("%zu non-dominated points, %zu inversions (worst %.4f):", front.size(), inversions, worst_inversion) +
             pts_text);

  const EvaluationRow* r1 = rep.find(w1);
  const EvaluationRow* r0 = rep.find(w0);
  report(r1->wlc > r0->wlc && r0->anchor > r1->anchor, "objective-discrimination",
         fmt("wlc (1,0) %.6f > (0,1) %.6f; anchor (0,1) %.6f > (1,0) %.6f", r1->wlc, r0->wlc, r0->anchor, r1->anchor));
  std::printf("toy criteria took %.1f s\n", seconds_since(t0));
}

// ---------------------------------------------------------------- clustering

void clustering_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> counts{10, 25, 50, 100, 250};
  constexpr std::uint64_t kNetlists = 16;
  std::vector<double> mean(counts.size(), 0.0);
  double worst_route = 0;
  for (std::uint64_t seed = 0; seed < kNetlists; ++seed) {
    SyntheticOptions o;
    o.seed = seed;
    o.macros = 6;
    o.clusters = 10;
    o.cells_per_cluster = 50;
    o.nets = 600;
    const Netlist nl = generate_synthetic(o);
    const auto candidates = generate_candidate_placements(nl, 10, seed);
    CorrelationOptions opt;
    opt.seed = seed;
    const CorrelationReport rep = select_cluster_count(nl, candidates, counts, opt);

    // Second route: score both netlists directly and correlate with the oracle.
    auto wl_of = [&](const Netlist& n) {
      std::vector<double> wl;
      for (const auto& c : candidates) {
        Placement pl(n);
        pl.apply(c);
        wl.push_back(evaluate_placement(pl, opt.reward).raw.wl);
      }
      return wl;
    };
    const auto flat = wl_of(nl);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const ClusteredNetlist cn = build_clustered_netlist(nl, partition(nl, counts[i], opt.balance_tolerance, seed));
      const double r = testing::pearson_oracle(flat, wl_of(cn.netlist)).value_or(0.0);
      worst_route = std::max(worst_route, std::abs(r - rep.rows[i].wl_correlation.value_or(0.0)));
      mean[i] += r / kNetlists;
    }
  }
  std::size_t inversions = 0;
  double worst = 0;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (mean[i] < mean[i - 1]) {
      ++inversions;
      worst = std::max(worst, mean[i - 1] - mean[i]);
    }
  }
  std::string trend;
  for (std::size_t i = 0; i < counts.size(); ++i) trend += fmt(" %zu:%.3f", counts[i], mean[i]);
  report(mean.back() > 0.85 && inversions <= 1 && worst <= 0.02 && worst_route <= 1e-9, "clustering-fidelity",
         fmt("%llu netlists of 500 cells, 10 candidates; mean wl correlation", static_cast<unsigned long long>(kNetlists)) +
             trend + fmt("; %zu inversions; routes agree to %.1e; %.1f s", inversions, worst_route, seconds_since(t0)));
}

// ---------------------------------------------------------------- reward budget

void reward_budget() {
  SyntheticOptions o;
  o.seed = 1;
  o.macros = 16;
  o.clusters = 5000;
  o.nets = 10000;
  o.canvas = Canvas{1000, 1000, 32, 32};
  const Netlist nl = generate_synthetic(o);
  const PlacementEnv env(nl);
  const PlacementState s = uniform_rollout(env, {1, 0}, 3);
  const auto t0 = std::chrono::steady_clock::now();
  const Evaluation ev = evaluate_placement(s.placement, RewardConfig{});
  const double secs = seconds_since(t0);
  report(!s.stuck && nl.soft_nodes().size() == 5000 && std::isfinite(ev.raw.eda) && secs < 10, "reward-budget",
         fmt("%zu clusters, %zu nets, single thread: %.3f s (limit 10 s)", nl.soft_nodes().size(), nl.nets().size(),
             secs));
}

// ---------------------------------------------------------------- determinism

struct CliRun {
  int rc;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "moppo");
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

void determinism(const std::string& toy_path) {
  const fs::path dir = fs::temp_directory_path() / ("moppo_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  const std::vector<std::string> train_args = {"train", "--netlist", toy_path, "--seed", "4", "--updates", "5",
                                               "--set", "buffer_episodes=32", "--set", "batch=64", "--set",
                                               "normalizer_samples=100"};
  std::vector<std::string> problems;
  auto run = [&](std::vector<std::string> args) {
    const CliRun r = cli(args);
    if (r.rc != 0) problems.push_back(args[0] + " exited " + std::to_string(r.rc) + ": " + r.err);
    return r;
  };

  auto a = train_args, b = train_args;
  a.insert(a.end(), {"--threads", "1", "--out", p("train_a")});
  b.insert(b.end(), {"--threads", "4", "--out", p("train_b")});
  run(a);
  run(b);
  bool identical = true;
  for (const char* f : {"final.ckpt", "train_log.jsonl", "normalizer.json", "checkpoints/update_00005.ckpt"}) {
    identical = identical && fs::exists(dir / "train_a" / f) &&
                sha256_file(p("train_a/") + f) == sha256_file(p("train_b/") + f);
  }
  if (!identical) problems.push_back("train outputs differ between runs");

  run({"gen", "--seed", "8", "--macros", "4", "--clusters", "5", "--cells-per-cluster", "20", "--nets", "80", "--out",
       p("gen.netlist")});
  run({"cluster", "--netlist", p("gen.netlist"), "--clusters", "10", "--seed", "2", "--out", p("map.txt")});
  run({"correlate", "--netlist", p("gen.netlist"), "--counts", "10,50", "--candidates", "5", "--out", p("corr.csv")});
  run({"normalize", "--netlist", toy_path, "--samples", "50", "--seed", "3", "--out", p("norm.json")});
  run({"sweep", "--checkpoint", p("train_a/final.ckpt"), "--netlist", toy_path, "--grid", "0:1:0.5", "--episodes",
       "2", "--out", p("sweep")});
  run({"eval", "--checkpoint", p("train_a/final.ckpt"), "--netlist", toy_path, "--grid", "0:1:0.5", "--episodes",
       "2", "--out", p("report.json")});
  run({"score", "--netlist", toy_path, "--placement", p("sweep/placement_w1.place"), "--normalizer",
       p("train_a/normalizer.json"), "--out", p("scored.place")});

  std::size_t replayed = 0, artifacts = 0;
  for (const std::string m : {"train_a/manifest.json", "gen.netlist.manifest.json", "map.txt.manifest.json",
                              "corr.csv.manifest.json", "norm.json.manifest.json", "sweep/manifest.json",
                              "report.json.manifest.json", "scored.place.manifest.json"}) {
    if (!fs::exists(dir / m)) {
      problems.push_back("missing manifest " + m);
      continue;
    }
    artifacts += read_manifest(p(m)).artifacts.size();
    const CliRun r = cli({"replay", "--manifest", p(m), "--out", p("replay_" + std::to_string(replayed))});
    if (r.rc != 0 || r.out.find("MISMATCH") != std::string::npos) problems.push_back("replay of " + m + ": " + r.err);
    ++replayed;
  }
  std::string detail = fmt("train with 1 and 4 threads byte-identical: %s; %zu manifests replayed, %zu artifacts",
                           identical ? "yes" : "no", replayed, artifacts);
  for (const auto& pr : problems) detail += "; " + pr;
  report(problems.empty(), "determinism", detail);
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional filter: run only criteria whose name contains argv[1].
  const std::string only = argc > 1 ? argv[1] : "";
  auto want = [&](const char* name) { return only.empty() || std::string(name).find(only) != std::string::npos; };
  const std::string toy_path = testing::data_path("toy.netlist");
  const Netlist toy = read_netlist_file(toy_path);

  if (want("metric-oracles")) metric_oracles();
  if (want("gae")) gae();
  if (want("losses")) losses(toy);
  if (want("gradients")) gradients(toy);
  if (want("toy") || want("pareto") || want("objective")) toy_criteria(toy);
  if (want("clustering-fidelity")) clustering_fidelity();
  if (want("reward-budget")) reward_budget();
  if (want("determinism")) determinism(toy_path);
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
