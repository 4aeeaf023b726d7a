#include "moppo/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "moppo/checkpoint.hpp"
#include "moppo/clustering.hpp"
#include "moppo/config.hpp"
#include "moppo/evaluation.hpp"
#include "moppo/manifest.hpp"
#include "moppo/ppo.hpp"
#include "moppo/service.hpp"

namespace moppo {

namespace fs = std::filesystem;

namespace {

int default_threads() {
  if (const char* env = std::getenv("MOPPO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Collects provenance for one command and writes it next to the output.
class Recorder {
 public:
  Recorder(std::string command, const std::vector<std::string>& args) : start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.argv.assign(args.begin() + 1, args.end());
  }

  RunManifest& manifest() { return manifest_; }
  void input(const std::string& path) { manifest_.inputs[path] = sha256_file(path); }

  /// `base` is the output directory, or the output file for single-file commands.
  void set_base(const std::string& out, bool directory) {
    out_ = out;
    base_dir_ = directory ? fs::path(out) : fs::path(out).parent_path();
  }
  void artifact(const std::string& path) {
    const std::string key = base_dir_.empty() ? path : fs::relative(path, base_dir_).generic_string();
    manifest_.artifacts[key] = sha256_file(path);
  }

  void finish() {
    manifest_.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!out_.empty()) write_manifest(manifest_path_for(out_), manifest_);
  }

 private:
  RunManifest manifest_;
  std::string out_;
  fs::path base_dir_;
  std::chrono::steady_clock::time_point start_;
};

void write_json(const std::string& path, const nlohmann::json& j) { write_text_file_atomic(path, j.dump(2) + "\n"); }

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides, Recorder* rec) {
  RunConfig cfg;
  if (!path.empty()) {
    cfg = parse_run_config(read_text_file(path));
    if (rec) rec->input(path);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + o + "'");
    auto kv = parse_key_values(o);
    apply_setting(cfg, kv.at(0).key, kv.at(0).value);
  }
  return cfg;
}

struct LoadedModel {
  Checkpoint checkpoint;
  RunConfig config;
  Normalizer normalizer;
  ActorCritic net;
  std::string hash;
};

LoadedModel load_model(const std::string& path, const Netlist& nl) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  m.hash = sha256_file(path);
  const auto& meta = m.checkpoint.meta;
  if (meta.value("netlist_hash", "") != netlist_hash(nl)) {
    throw InputError("checkpoint '" + path + "' was trained on a different netlist (hash mismatch)");
  }
  m.config = RunConfig::from_json(meta.at("config"));
  m.normalizer = normalizer_from_json(meta.at("normalizer"));
  m.net = ActorCritic::from_params(m.checkpoint.params, m.config.train.network);
  return m;
}

std::string report_csv(const EvaluationReport& rep) {
  std::ostringstream s;
  s << "omega_1,omega_2,wlc,anchor,eda,objective,greedy_wlc,greedy_anchor,pareto\n";
  for (const auto& r : rep.rows) {
    s << format_number(r.preference[0]) << ',' << format_number(r.preference[1]) << ',' << format_number(r.wlc) << ','
      << format_number(r.anchor) << ',' << format_number(r.eda) << ',' << format_number(r.objective) << ','
      << format_number(r.greedy_wlc) << ',' << format_number(r.greedy_anchor) << ',' << (r.pareto ? 1 : 0) << '\n';
  }
  return s.str();
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw InputError("cluster count '" + item + "' is not an integer");
    }
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-objective PPO macro placement"};
  app.require_subcommand(1);
  std::function<void()> action;

  int threads = 0;
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (default: MOPPO_THREADS or hardware)");
  };
  std::uint64_t seed = 0;
  std::string netlist_path, out_path, config_path, checkpoint_path, grid = "0:1:0.1";
  std::vector<std::string> overrides;

  // gen
  SyntheticOptions gen;
  double canvas_size = 0;
  int grid_cells = 0;
  bool no_anchors = false;
  auto* g = app.add_subcommand("gen", "Generate a synthetic netlist");
  g->add_option("--seed", seed);
  g->add_option("--out", out_path)->required();
  g->add_option("--macros", gen.macros);
  g->add_option("--clusters", gen.clusters);
  g->add_option("--cells-per-cluster", gen.cells_per_cluster);
  g->add_option("--nets", gen.nets);
  g->add_option("--ports", gen.ports);
  g->add_option("--canvas", canvas_size, "Canvas side length");
  g->add_option("--grid", grid_cells, "Action grid cells per side");
  g->add_option("--macro-area", gen.macro_area_fraction);
  g->add_option("--soft-area", gen.soft_area_fraction);
  g->add_flag("--no-anchors", no_anchors);
  g->callback([&] {
    action = [&] {
      Recorder rec("gen", args);
      gen.seed = seed;
      if (canvas_size > 0) gen.canvas.width = gen.canvas.height = canvas_size;
      if (grid_cells > 0) gen.canvas.grid_cols = gen.canvas.grid_rows = grid_cells;
      gen.anchors = !no_anchors;
      const Netlist nl = generate_synthetic(gen);
      write_text_file_atomic(out_path, serialize_netlist(nl));
      rec.set_base(out_path, false);
      rec.artifact(out_path);
      rec.manifest().seed = seed;
      rec.manifest().config = {{"macros", gen.macros},     {"clusters", gen.clusters},
                               {"cells_per_cluster", gen.cells_per_cluster},
                               {"nets", gen.nets},         {"ports", gen.ports},
                               {"canvas", gen.canvas.width}, {"grid", gen.canvas.grid_cols},
                               {"macro_area", gen.macro_area_fraction},
                               {"soft_area", gen.soft_area_fraction}, {"anchors", gen.anchors}};
      rec.finish();
      out << "wrote " << out_path << " (" << nl.nodes().size() << " nodes, " << nl.nets().size() << " nets)\n";
    };
  });

  // cluster
  std::size_t cluster_count = 0;
  double tolerance = 0.1;
  auto* c = app.add_subcommand("cluster", "Partition std-cells into clusters");
  c->add_option("--netlist", netlist_path)->required();
  c->add_option("--clusters", cluster_count)->required();
  c->add_option("--tolerance", tolerance);
  c->add_option("--seed", seed);
  c->add_option("--out", out_path)->required();
  c->callback([&] {
    action = [&] {
      Recorder rec("cluster", args);
      rec.input(netlist_path);
      const Netlist nl = read_netlist_file(netlist_path);
      const ClusterMap map = partition(nl, cluster_count, tolerance, seed);
      const ClusteredNetlist cn = build_clustered_netlist(nl, map);
      const std::string map_path = out_path + ".clusters";
      write_text_file_atomic(out_path, serialize_netlist(cn.netlist));
      write_text_file_atomic(map_path, serialize_cluster_map(map));
      rec.set_base(out_path, false);
      rec.artifact(out_path);
      rec.artifact(map_path);
      rec.manifest().seed = seed;
      rec.manifest().config = {{"clusters", cluster_count}, {"tolerance", tolerance}};
      rec.finish();
      out << "wrote " << out_path << " (" << cluster_count << " clusters, cut " << cut_size(nl, map) << ")\n";
    };
  });

  // correlate
  std::string counts_text;
  std::size_t candidates = 10;
  double threshold = 0.85;
  auto* r = app.add_subcommand("correlate", "Correlate clustered and unclustered metrics over cluster counts");
  r->add_option("--netlist", netlist_path)->required();
  r->add_option("--counts", counts_text, "Comma-separated ascending cluster counts")->required();
  r->add_option("--candidates", candidates);
  r->add_option("--threshold", threshold);
  r->add_option("--tolerance", tolerance);
  r->add_option("--seed", seed);
  r->add_option("--out", out_path)->required();
  r->callback([&] {
    action = [&] {
      Recorder rec("correlate", args);
      rec.input(netlist_path);
      const Netlist nl = read_netlist_file(netlist_path);
      const auto counts = parse_counts(counts_text);
      const auto cands = generate_candidate_placements(nl, candidates, seed);
      CorrelationOptions opt;
      opt.threshold = threshold;
      opt.balance_tolerance = tolerance;
      opt.seed = seed;
      const CorrelationReport report = select_cluster_count(nl, cands, counts, opt);
      write_text_file_atomic(out_path, report.to_csv(false));
      rec.set_base(out_path, false);
      rec.artifact(out_path);
      rec.manifest().seed = seed;
      rec.manifest().config = {{"counts", counts}, {"candidates", candidates}, {"threshold", threshold},
                               {"tolerance", tolerance}};
      rec.finish();
      out << report.to_csv() << "chosen cluster count " << report.chosen << (report.fallback ? " (no count met the threshold)" : "")
          << "\n";
    };
  });

  // score
  std::string placement_path, normalizer_path;
  auto* s = app.add_subcommand("score", "Score a macro placement");
  s->add_option("--netlist", netlist_path)->required();
  s->add_option("--placement", placement_path)->required();
  s->add_option("--config", config_path);
  s->add_option("--set", overrides, "Config override key=value");
  s->add_option("--normalizer", normalizer_path);
  s->add_option("--out", out_path);
  s->callback([&] {
    action = [&] {
      Recorder rec("score", args);
      rec.input(netlist_path);
      rec.input(placement_path);
      const RunConfig cfg = load_config(config_path, overrides, &rec);
      const Netlist nl = read_netlist_file(netlist_path);
      Placement pl(nl);
      pl.apply(parse_placement(read_text_file(placement_path)));
      validate_macro_placement(pl);
      const Evaluation ev = evaluate_placement(pl, cfg.reward);
      nlohmann::json result{{"wl", ev.raw.wl}, {"cong", ev.raw.cong}, {"anchor", ev.raw.anchor}, {"eda", ev.raw.eda},
                            {"wlc", ev.raw.wlc(cfg.reward.weights)}, {"ace", ev.ace}};
      PlacementFile f = pl.export_nodes(false);
      f.metrics = {{"wl", ev.raw.wl}, {"cong", ev.raw.cong}, {"anchor", ev.raw.anchor}, {"eda", ev.raw.eda}};
      if (!normalizer_path.empty()) {
        rec.input(normalizer_path);
        const Normalizer n = normalizer_from_json(nlohmann::json::parse(read_text_file(normalizer_path)));
        const MetricSet m = n.normalize(ev.raw, cfg.reward.weights);
        result["normalized"] = {{"wl", m.wl}, {"cong", m.cong}, {"anchor", m.anchor}, {"eda", m.eda},
                                {"wlc", m.wlc(cfg.reward.weights)}};
        f.metrics.push_back({"r_wlc", m.wlc(cfg.reward.weights)});
        f.metrics.push_back({"r_anchor", m.anchor});
      }
      out << result.dump(2) << "\n";
      if (!out_path.empty()) {
        write_text_file_atomic(out_path, serialize_placement(f));
        rec.set_base(out_path, false);
        rec.artifact(out_path);
        rec.manifest().config = cfg.to_json();
        rec.finish();
      }
    };
  });

  // normalize
  std::size_t samples = 0;
  auto* n = app.add_subcommand("normalize", "Fit objective scales from initial-policy rollouts");
  n->add_option("--netlist", netlist_path)->required();
  n->add_option("--samples", samples, "Rollouts (default: normalizer_samples from config)");
  n->add_option("--config", config_path);
  n->add_option("--set", overrides);
  n->add_option("--seed", seed);
  add_threads(n);
  n->add_option("--out", out_path)->required();
  n->callback([&] {
    action = [&] {
      Recorder rec("normalize", args);
      rec.input(netlist_path);
      const RunConfig cfg = load_config(config_path, overrides, &rec);
      const Netlist nl = read_netlist_file(netlist_path);
      const PlacementEnv env(nl, cfg.reward);
      const NormalizerFit fit = fit_normalizer(env, samples ? samples : cfg.train.normalizer_samples, seed,
                                               threads ? threads : default_threads());
      for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
      const std::string csv = out_path + ".samples.csv";
      write_json(out_path, normalizer_to_json(fit.normalizer));
      write_text_file_atomic(csv, fit.samples_csv());
      rec.set_base(out_path, false);
      rec.artifact(out_path);
      rec.artifact(csv);
      rec.manifest().seed = seed;
      rec.manifest().config = cfg.to_json();
      rec.finish();
      out << normalizer_to_json(fit.normalizer).dump() << "\n";
    };
  });

  // train
  std::optional<std::size_t> updates;
  std::optional<double> fixed_w1;
  bool seed_set = false;
  auto* t = app.add_subcommand("train", "Train a preference-conditioned policy");
  t->add_option("--netlist", netlist_path)->required();
  t->add_option("--config", config_path);
  t->add_option("--set", overrides);
  t->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  t->add_option("--updates", updates);
  t->add_option("--fixed-preference", fixed_w1, "Train fixed-preference PPO at omega_1");
  t->add_option("--normalizer", normalizer_path, "Reuse a fitted normalizer");
  add_threads(t);
  t->add_option("--out", out_path)->required();
  t->callback([&] {
    action = [&] {
      Recorder rec("train", args);
      rec.input(netlist_path);
      RunConfig cfg = load_config(config_path, overrides, &rec);
      if (seed_set) cfg.train.seed = seed;
      if (updates) cfg.train.total_updates = *updates;
      if (fixed_w1) cfg.train.fixed_preference = Preference{*fixed_w1, 1.0 - *fixed_w1};
      cfg.train.threads = threads ? threads : default_threads();
      cfg.train.validate();
      const Netlist nl = read_netlist_file(netlist_path);
      fs::create_directories(out_path);
      rec.set_base(out_path, true);

      Normalizer normalizer;
      if (!normalizer_path.empty()) {
        rec.input(normalizer_path);
        normalizer = normalizer_from_json(nlohmann::json::parse(read_text_file(normalizer_path)));
      } else {
        const PlacementEnv raw_env(nl, cfg.reward);
        const NormalizerFit fit = fit_normalizer(raw_env, cfg.train.normalizer_samples, cfg.train.seed,
                                                 cfg.train.threads);
        for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
        normalizer = fit.normalizer;
        const std::string csv = (fs::path(out_path) / "normalizer_samples.csv").string();
        write_text_file_atomic(csv, fit.samples_csv());
        rec.artifact(csv);
      }
      const std::string norm_file = (fs::path(out_path) / "normalizer.json").string();
      write_json(norm_file, normalizer_to_json(normalizer));
      rec.artifact(norm_file);

      const PlacementEnv env(nl, cfg.reward, normalizer);
      nlohmann::json config_json = cfg.to_json();
      config_json["threads"] = 1;  // parallelism does not change results
      const std::string hash = netlist_hash(nl);
      const fs::path ckdir = fs::path(out_path) / "checkpoints";
      const std::string log_path = (fs::path(out_path) / "train_log.jsonl").string();
      std::string log_text;
      TrainHooks hooks;
      hooks.on_update = [&](const UpdateLog& l) {
        nlohmann::json j = l.to_json();
        j.erase("seconds");
        log_text += j.dump() + "\n";
        write_text_file_atomic(log_path, log_text);
        err << "update " << l.update << " mean_return " << l.mean_return << " entropy " << l.entropy << " ("
            << std::fixed << std::setprecision(2) << l.seconds << "s)\n"
            << std::defaultfloat;
      };
      std::string last_ckpt;
      hooks.on_checkpoint = [&](std::size_t update, const ActorCritic& net) {
        std::ostringstream name;
        name << "update_" << std::setw(5) << std::setfill('0') << update << ".ckpt";
        const nlohmann::json meta{{"netlist_hash", hash},
                                  {"normalizer", normalizer_to_json(normalizer)},
                                  {"config", config_json},
                                  {"update", update},
                                  {"input_dim", net.input_dim()},
                                  {"actions", net.actions()}};
        last_ckpt = (ckdir / name.str()).string();
        save_checkpoint(last_ckpt, net.params(), meta);
        rec.artifact(last_ckpt);
      };
      const TrainResult result = train(env, cfg.train, hooks);
      if (!log_text.empty()) rec.artifact(log_path);
      const std::string final_path = (fs::path(out_path) / "final.ckpt").string();
      fs::copy_file(last_ckpt, final_path, fs::copy_options::overwrite_existing);
      rec.artifact(final_path);
      rec.manifest().seed = cfg.train.seed;
      rec.manifest().config = config_json;
      rec.finish();
      if (!result.message.empty()) err << result.message << "\n";
      out << "trained " << result.updates << " updates; final checkpoint " << final_path << "\n";
      if (result.diverged) throw std::runtime_error("training diverged; last good checkpoint kept");
    };
  });

  // eval / sweep
  std::size_t episodes = 16;
  auto add_eval_options = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint_path)->required();
    sub->add_option("--netlist", netlist_path)->required();
    sub->add_option("--grid", grid, "omega_1 grid lo:hi:step");
    sub->add_option("--episodes", episodes, "Sampled episodes per preference");
    sub->add_option("--seed", seed);
    add_threads(sub);
    sub->add_option("--out", out_path)->required();
  };
  auto evaluate = [&](Recorder& rec) {
    rec.input(netlist_path);
    rec.input(checkpoint_path);
    const Netlist nl = read_netlist_file(netlist_path);
    const LoadedModel model = load_model(checkpoint_path, nl);
    const PlacementEnv env(nl, model.config.reward, model.normalizer);
    const auto prefs = parse_preference_grid(grid);
    EvaluationReport rep = zero_shot_eval(env, model.net, prefs, episodes, seed, threads ? threads : default_threads());
    rep.checkpoint_hash = model.hash;
    rec.manifest().seed = seed;
    rec.manifest().config = {{"grid", grid}, {"episodes", episodes}};
    return rep;
  };
  auto* e = app.add_subcommand("eval", "Zero-shot evaluation over a preference grid");
  add_eval_options(e);
  e->callback([&] {
    action = [&] {
      Recorder rec("eval", args);
      const EvaluationReport rep = evaluate(rec);
      write_json(out_path, rep.to_json());
      rec.set_base(out_path, false);
      rec.artifact(out_path);
      rec.finish();
      out << report_csv(rep);
    };
  });
  auto* w = app.add_subcommand("sweep", "Pareto sweep: CSV plus one placement per preference");
  add_eval_options(w);
  w->callback([&] {
    action = [&] {
      Recorder rec("sweep", args);
      const EvaluationReport rep = evaluate(rec);
      fs::create_directories(out_path);
      rec.set_base(out_path, true);
      const std::string csv = (fs::path(out_path) / "pareto.csv").string();
      write_text_file_atomic(csv, report_csv(rep));
      rec.artifact(csv);
      const std::string json_path = (fs::path(out_path) / "report.json").string();
      write_json(json_path, rep.to_json());
      rec.artifact(json_path);
      for (const auto& row : rep.rows) {
        const std::string p =
            (fs::path(out_path) / ("placement_w" + format_number(row.preference[0]) + ".place")).string();
        write_text_file_atomic(p, serialize_placement(row.placement));
        rec.artifact(p);
      }
      rec.finish();
      out << report_csv(rep);
    };
  });

  // serve
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  std::size_t pareto_episodes = 8;
  auto* v = app.add_subcommand("serve", "HTTP inference service");
  v->add_option("--checkpoint", checkpoint_path)->required();
  v->add_option("--netlist", netlist_path)->required();
  v->add_option("--host", host);
  v->add_option("--port", port);
  v->add_option("--static", static_dir, "Directory served at /");
  v->add_option("--pareto-episodes", pareto_episodes);
  v->callback([&] {
    action = [&] {
      const Netlist nl = read_netlist_file(netlist_path);
      LoadedModel model = load_model(checkpoint_path, nl);
      ExploreService service(nl, std::move(model.net), model.normalizer, model.config.reward, model.hash,
                             pareto_episodes);
      const int bound = service.bind(host, port, static_dir);
      err << "serving on http://" << host << ":" << bound << "\n";
      service.serve_bound();
    };
  });

  // replay
  std::string manifest_path, replay_dir;
  auto* p = app.add_subcommand("replay", "Re-run a manifest and compare artifact hashes");
  p->add_option("--manifest", manifest_path)->required();
  p->add_option("--out", replay_dir, "Directory for the re-run outputs")->required();
  p->callback([&] {
    action = [&] {
      const RunManifest m = read_manifest(manifest_path);
      for (const auto& [path, hash] : m.inputs) {
        if (sha256_file(path) != hash) throw InputError("input '" + path + "' changed since the run");
      }
      std::vector<std::string> argv{"moppo"};
      std::string new_out;
      for (std::size_t i = 0; i < m.argv.size(); ++i) {
        argv.push_back(m.argv[i]);
        if (m.argv[i] == "--out" && i + 1 < m.argv.size()) {
          new_out = (fs::path(replay_dir) / fs::path(m.argv[i + 1]).filename()).string();
          argv.push_back(new_out);
          ++i;
        }
      }
      if (new_out.empty()) throw InputError("manifest command has no --out");
      std::ostringstream sink;
      const int rc = run_cli(argv, sink, err);
      if (rc != kExitOk) throw std::runtime_error("replayed command failed with status " + std::to_string(rc));
      const fs::path base = fs::is_directory(new_out) ? fs::path(new_out) : fs::path(new_out).parent_path();
      std::size_t mismatches = 0;
      for (const auto& [key, hash] : m.artifacts) {
        const fs::path target = m.command == "train" || m.command == "sweep" ? base / key : base / fs::path(key);
        const bool same = fs::exists(target) && sha256_file(target.string()) == hash;
        out << (same ? "match    " : "MISMATCH ") << key << "\n";
        if (!same) ++mismatches;
      }
      if (mismatches) throw std::runtime_error(std::to_string(mismatches) + " artifact(s) differ");
    };
  });

  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    action();
    return kExitOk;
  } catch (const CheckpointError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& ex) {
    err << "error: malformed JSON input: " << ex.what() << "\n";
    return kExitInput;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace moppo
