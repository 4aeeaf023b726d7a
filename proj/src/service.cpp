#include "moppo/service.hpp"

#include <chrono>
#include <map>
#include <shared_mutex>

#include <httplib.h>

#include "moppo/evaluation.hpp"
#include "moppo/ppo.hpp"

namespace moppo {

namespace {

constexpr std::size_t kMaxParetoPoints = 101;

ServiceResponse error(int status, const std::string& code, const std::string& message) {
  return {status, {{"code", code}, {"message", message}}};
}

nlohmann::json metric_json(const MetricSet& m) {
  return {{"wl", m.wl}, {"cong", m.cong}, {"anchor", m.anchor}, {"eda", m.eda}};
}

}  // namespace

struct ExploreService::Impl {
  const Netlist* netlist;
  ActorCritic net;
  Normalizer normalizer;
  RewardConfig reward;
  std::string checkpoint_hash;
  std::size_t pareto_episodes;
  PlacementEnv env;

  mutable std::shared_mutex cache_mutex;
  std::map<std::string, nlohmann::json> pareto_cache;

  httplib::Server server;

  Impl(const Netlist& nl, ActorCritic n, Normalizer norm, RewardConfig r, std::string hash, std::size_t episodes)
      : netlist(&nl),
        net(std::move(n)),
        normalizer(norm),
        reward(std::move(r)),
        checkpoint_hash(std::move(hash)),
        pareto_episodes(episodes),
        env(nl, reward, normalizer) {}
};

ExploreService::ExploreService(const Netlist& netlist, ActorCritic net, Normalizer normalizer, RewardConfig reward,
                               std::string checkpoint_hash, std::size_t pareto_episodes)
    : impl_(std::make_unique<Impl>(netlist, std::move(net), normalizer, std::move(reward), std::move(checkpoint_hash),
                                   pareto_episodes)) {
  const StateEncoder encoder(impl_->env);
  if (encoder.dim() != impl_->net.input_dim() ||
      static_cast<std::size_t>(impl_->env.action_count()) != impl_->net.actions()) {
    throw InputError("checkpoint network does not match the netlist");
  }
}

ExploreService::~ExploreService() = default;

ServiceResponse ExploreService::health() const {
  return {200,
          {{"status", "ok"},
           {"checkpoint_hash", impl_->checkpoint_hash},
           {"netlist_hash", netlist_hash(*impl_->netlist)}}};
}

ServiceResponse ExploreService::netlist() const {
  const Netlist& nl = *impl_->netlist;
  const Canvas& c = nl.canvas();
  nlohmann::json nodes = nlohmann::json::array();
  for (const Node& n : nl.nodes()) {
    if (n.kind == NodeKind::std_cell) continue;
    nlohmann::json j{{"id", n.id}, {"kind", to_string(n.kind)}, {"width", n.width}, {"height", n.height},
                     {"fixed", n.fixed}};
    if (n.position) {
      j["x"] = n.position->x;
      j["y"] = n.position->y;
    }
    nodes.push_back(std::move(j));
  }
  nlohmann::json nets = nlohmann::json::array();
  for (const Net& net : nl.nets()) {
    std::vector<std::string> ends;
    for (std::size_t p : net.pins) {
      const std::string& id = nl.node(nl.pins()[p].owner).id;
      if (std::find(ends.begin(), ends.end(), id) == ends.end()) ends.push_back(id);
    }
    nets.push_back({{"id", net.id}, {"nodes", ends}});
  }
  nlohmann::json anchors = nlohmann::json::array();
  for (const Anchor& a : nl.anchors()) {
    anchors.push_back({{"macro", nl.node(a.macro).id}, {"x", a.target.x}, {"y", a.target.y}, {"weight", a.weight}});
  }
  return {200,
          {{"canvas", {{"width", c.width}, {"height", c.height}, {"grid_cols", c.grid_cols}, {"grid_rows", c.grid_rows}}},
           {"nodes", nodes},
           {"nets", nets},
           {"anchors", anchors}}};
}

ServiceResponse ExploreService::infer(std::string_view body) const {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto req = nlohmann::json::parse(body);
    if (!req.contains("omega")) return error(400, "invalid_request", "missing 'omega'");
    const Preference w = req.at("omega").get<Preference>();
    check_preference(w);
    const std::string mode = req.value("mode", "greedy");
    if (mode != "greedy" && mode != "sample") return error(400, "invalid_request", "mode must be greedy or sample");
    const std::uint64_t seed = req.value("seed", std::uint64_t{0});

    std::optional<Netlist> overridden;
    std::optional<PlacementEnv> local_env;
    const PlacementEnv* env = &impl_->env;
    if (req.contains("anchors") && !req.at("anchors").is_null()) {
      overridden = *impl_->netlist;
      overridden->clear_anchors();
      for (const auto& a : req.at("anchors")) {
        const std::string id = a.at("macro");
        const auto idx = overridden->find_node(id);
        if (!idx || overridden->node(*idx).kind != NodeKind::macro) {
          return error(400, "invalid_request", "anchor references unknown macro '" + id + "'");
        }
        overridden->add_anchor(id, {a.at("x").get<double>(), a.at("y").get<double>()}, a.at("weight").get<double>());
      }
      overridden->finalize();
      local_env.emplace(*overridden, impl_->reward, impl_->normalizer);
      env = &*local_env;
    }

    const StateEncoder encoder(*env);
    Rng rng(seed);
    const Trajectory t = run_episode(*env, encoder, impl_->net, w, rng, mode == "greedy");
    PlacementState s = env->replay(t.actions, w);
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& rec : s.placement.export_nodes(false).nodes) {
      placements.push_back({{"id", rec.id}, {"x", rec.center.x}, {"y", rec.center.y}});
    }
    nlohmann::json out{{"omega", w}, {"mode", mode}, {"placements", placements}, {"stuck", s.stuck},
                       {"reward", s.reward}, {"actions", t.actions}};
    if (s.raw) {
      out["metrics"] = {{"raw", metric_json(*s.raw)}, {"normalized", metric_json(*s.normalized)}};
    } else {
      out["metrics"] = nullptr;
    }
    out["episode_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {200, out};
  } catch (const nlohmann::json::exception& e) {
    return error(400, "invalid_request", std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, "invalid_request", e.what());
  } catch (const InputError& e) {
    return error(400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

ServiceResponse ExploreService::pareto(std::string_view grid_spec) {
  std::vector<Preference> grid;
  try {
    grid = parse_preference_grid(grid_spec.empty() ? "0:1:0.1" : grid_spec);
  } catch (const std::invalid_argument& e) {
    return error(400, "invalid_request", e.what());
  }
  if (grid.size() > kMaxParetoPoints) {
    return error(400, "invalid_request",
                 "grid has " + std::to_string(grid.size()) + " points; at most " + std::to_string(kMaxParetoPoints));
  }
  std::string key = impl_->checkpoint_hash + '|';
  for (const auto& w : grid) key += format_number(w[0]) + ',';
  {
    std::shared_lock lock(impl_->cache_mutex);
    auto it = impl_->pareto_cache.find(key);
    if (it != impl_->pareto_cache.end()) return {200, it->second};
  }
  try {
    EvaluationReport rep = zero_shot_eval(impl_->env, impl_->net, grid, impl_->pareto_episodes, 0);
    rep.checkpoint_hash = impl_->checkpoint_hash;
    nlohmann::json payload = rep.to_json();
    std::unique_lock lock(impl_->cache_mutex);
    auto [it, inserted] = impl_->pareto_cache.emplace(key, std::move(payload));
    return {200, it->second};
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

std::size_t ExploreService::pareto_cache_size() const {
  std::shared_lock lock(impl_->cache_mutex);
  return impl_->pareto_cache.size();
}

int ExploreService::bind(const std::string& host, int port, const std::string& static_dir) {
  auto& srv = impl_->server;
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  srv.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  srv.Get("/netlist", [this, send](const httplib::Request&, httplib::Response& res) { send(res, netlist()); });
  srv.Post("/infer", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, infer(req.body)); });
  srv.Get("/pareto", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, pareto(req.has_param("grid") ? req.get_param_value("grid") : std::string()));
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "error";
    res.set_content(nlohmann::json{{"code", code}, {"message", "HTTP " + std::to_string(res.status)}}.dump(),
                    "application/json");
  });
  if (!static_dir.empty() && !srv.set_mount_point("/", static_dir)) {
    throw std::runtime_error("static directory '" + static_dir + "' does not exist");
  }
  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
    if (port_ < 0) throw std::runtime_error("cannot bind to " + host);
  } else {
    if (!srv.bind_to_port(host, port)) throw std::runtime_error("cannot bind to " + host + ":" + std::to_string(port));
    port_ = port;
  }
  return port_;
}

void ExploreService::serve_bound() {
  if (!impl_->server.listen_after_bind()) throw std::runtime_error("service stopped with an error");
}

void ExploreService::listen(const std::string& host, int port, const std::string& static_dir) {
  bind(host, port, static_dir);
  serve_bound();
}

void ExploreService::stop() { impl_->server.stop(); }

}  // namespace moppo
