#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "moppo/checkpoint.hpp"
#include "moppo/cli.hpp"
#include "moppo/config.hpp"
#include "moppo/evaluation.hpp"
#include "moppo/manifest.hpp"
#include "support.hpp"

using namespace moppo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "moppo");
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("moppo_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

const std::string kToy = testing::data_path("toy.netlist");

// Small training run shared by the checkpoint-consuming tests.
const fs::path& trained() {
  static const fs::path dir = [] {
    const fs::path d = scratch("train");
    const Run r = cli({"train", "--netlist", kToy, "--seed", "3", "--updates", "2", "--set", "buffer_episodes=8",
                       "--set", "batch=16", "--set", "epochs=1", "--set", "normalizer_samples=20", "--set",
                       "checkpoint_every=1", "--threads", "2", "--out", (d / "run").string()});
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    return d / "run";
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen is deterministic") {
    const fs::path d = scratch("gen");
    const std::vector<std::string> base = {"gen", "--seed", "7", "--macros", "4", "--clusters", "6", "--nets", "40"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", (d / "a.netlist").string()});
    b.insert(b.end(), {"--out", (d / "b.netlist").string()});
    REQUIRE(cli(a).rc == 0);
    REQUIRE(cli(b).rc == 0);
    CHECK(slurp(d / "a.netlist") == slurp(d / "b.netlist"));
    CHECK(fs::exists(d / "a.netlist.manifest.json"));
    CHECK_NOTHROW(read_netlist_file((d / "a.netlist").string()));
  }

  TEST_CASE("exit statuses") {
    const Run unknown = cli({"gen", "--bogus", "--out", "x"});
    CHECK(unknown.rc == kExitUsage);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(cli({}).rc == kExitUsage);
    CHECK(cli({"frobnicate"}).rc == kExitUsage);

    const fs::path d = scratch("codes");
    CHECK(cli({"score", "--netlist", (d / "missing.netlist").string(), "--placement", "x"}).rc == kExitInput);
    std::ofstream(d / "bad.netlist") << "canvas 10 10 2 2\nnode a macro 5\n";
    CHECK(cli({"score", "--netlist", (d / "bad.netlist").string(), "--placement", "x"}).rc == kExitInput);
    std::ofstream(d / "bad.ckpt") << "MOPPOCKP garbage";
    CHECK(cli({"eval", "--checkpoint", (d / "bad.ckpt").string(), "--netlist", kToy, "--out",
               (d / "r.json").string()})
              .rc == kExitInput);
  }

  TEST_CASE("the binary reports usage errors") {
    const std::string cmd = std::string(MOPPO_BINARY) + " gen --bogus > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);
  }

  TEST_CASE("score matches the metrics module") {
    const fs::path d = scratch("score");
    const Netlist nl = read_netlist_file(kToy);
    const PlacementEnv env(nl);
    const PlacementState s = uniform_rollout(env, {0.5, 0.5}, 4);
    write_text_file_atomic((d / "p.place").string(), serialize_placement(env.export_trace(s)));
    const Run r = cli({"score", "--netlist", kToy, "--placement", (d / "p.place").string()});
    REQUIRE(r.rc == 0);
    const auto j = nlohmann::json::parse(r.out);
    Placement pl(nl);
    pl.apply(parse_placement(slurp(d / "p.place")));
    const Evaluation ev = evaluate_placement(pl, RewardConfig{});
    CHECK(j.at("wl").get<double>() == doctest::Approx(ev.raw.wl).epsilon(1e-12));
    CHECK(j.at("cong").get<double>() == doctest::Approx(ev.raw.cong).epsilon(1e-12));
    CHECK(j.at("anchor").get<double>() == doctest::Approx(ev.raw.anchor).epsilon(1e-12));
  }

  TEST_CASE("train writes checkpoints, log and manifest") {
    const fs::path& run = trained();
    CHECK(fs::exists(run / "final.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "update_00000.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "update_00002.ckpt"));
    CHECK(fs::exists(run / "normalizer.json"));
    CHECK(fs::exists(run / "manifest.json"));
    std::istringstream log(slurp(run / "train_log.jsonl"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.contains("entropy"));
      CHECK(j.contains("bin_returns"));
      ++lines;
    }
    CHECK(lines == 2);
  }

  TEST_CASE("manifest replay reproduces every artifact") {
    const fs::path d = scratch("replay");
    const Run r = cli({"replay", "--manifest", (trained() / "manifest.json").string(), "--out", d.string()});
    CHECK_MESSAGE(r.rc == 0, r.err);
    CHECK(r.out.find("MISMATCH") == std::string::npos);
    CHECK(r.out.find("match") != std::string::npos);
  }

  TEST_CASE("sweep rows equal direct evaluation") {
    const fs::path d = scratch("sweep");
    const std::string ckpt = (trained() / "final.ckpt").string();
    const Run r = cli({"sweep", "--checkpoint", ckpt, "--netlist", kToy, "--grid", "0:1:0.25", "--episodes", "3",
                       "--seed", "9", "--threads", "2", "--out", (d / "out").string()});
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    const EvaluationReport rep = EvaluationReport::from_json(nlohmann::json::parse(slurp(d / "out" / "report.json")));

    const Netlist nl = read_netlist_file(kToy);
    const Checkpoint c = load_checkpoint(ckpt);
    const ActorCritic net = ActorCritic::from_params(c.params, TrainConfig::from_json(c.meta.at("config")).network);
    const PlacementEnv env(nl, RunConfig::from_json(c.meta.at("config")).reward,
                           normalizer_from_json(c.meta.at("normalizer")));
    const auto grid = parse_preference_grid("0:1:0.25");
    const EvaluationReport direct = zero_shot_eval(env, net, grid, 3, 9);
    REQUIRE(rep.rows.size() == direct.rows.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(rep.rows[i].wlc == direct.rows[i].wlc);
      CHECK(rep.rows[i].anchor == direct.rows[i].anchor);
      CHECK(rep.rows[i].objective == direct.rows[i].objective);
      CHECK(rep.rows[i].pareto == direct.rows[i].pareto);
      CHECK(rep.rows[i].actions == direct.rows[i].actions);
    }
    CHECK(fs::exists(d / "out" / "pareto.csv"));
    CHECK(fs::exists(d / "out" / "placement_w0.5.place"));

    const fs::path again = scratch("sweep2");
    const Run r2 = cli({"replay", "--manifest", (d / "out" / "manifest.json").string(), "--out", again.string()});
    CHECK_MESSAGE(r2.rc == 0, r2.err);
  }

  TEST_CASE("replay notices changed inputs") {
    const fs::path d = scratch("changed");
    const Netlist nl = read_netlist_file(kToy);
    write_text_file_atomic((d / "t.netlist").string(), slurp(kToy));
    const PlacementEnv env(nl);
    write_text_file_atomic((d / "p.place").string(),
                           serialize_placement(env.export_trace(uniform_rollout(env, {1, 0}, 1))));
    REQUIRE(cli({"score", "--netlist", (d / "t.netlist").string(), "--placement", (d / "p.place").string(), "--out",
                 (d / "scored.place").string()})
                .rc == 0);
    const Run same = cli({"replay", "--manifest", (d / "scored.place.manifest.json").string(), "--out",
                          (d / "re1").string()});
    CHECK_MESSAGE(same.rc == 0, same.err);
    std::ofstream(d / "t.netlist", std::ios::app) << "# edited\n";
    const Run r = cli({"replay", "--manifest", (d / "scored.place.manifest.json").string(), "--out",
                       (d / "re2").string()});
    CHECK(r.rc == kExitInput);
  }
}
