#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "moppo/env.hpp"
#include "moppo/network.hpp"

namespace moppo {

/// Status code plus JSON body of one handled request.
struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Read-only inference service over one checkpoint and netlist. Handlers are
/// safe to call concurrently; the Pareto cache is the only shared mutable state.
class ExploreService {
 public:
  ExploreService(const Netlist& netlist, ActorCritic net, Normalizer normalizer, RewardConfig reward,
                 std::string checkpoint_hash, std::size_t pareto_episodes = 8);
  ~ExploreService();

  ServiceResponse health() const;
  ServiceResponse netlist() const;
  /// Body: {"omega": [w1, w2], "mode": "greedy"|"sample", "seed": n,
  ///        "anchors": [{"macro", "x", "y", "weight"}]}.
  ServiceResponse infer(std::string_view body) const;
  ServiceResponse pareto(std::string_view grid);
  std::size_t pareto_cache_size() const;

  /// Binds and serves until stop(). Port 0 picks a free port (see port()).
  /// Throws std::runtime_error when binding fails.
  void listen(const std::string& host, int port, const std::string& static_dir = {});
  /// Binds without serving; returns the bound port.
  int bind(const std::string& host, int port, const std::string& static_dir = {});
  void serve_bound();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace moppo
