#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "getad/anomaly_forge.hpp"
#include "getad/anomaly_scores.hpp"
#include "getad/eval_metrics.hpp"
#include "getad/experiment.hpp"
#include "getad/gradcheck_suite.hpp"
#include "getad/road_graph.hpp"
#include "getad/synth_world.hpp"
#include "getad/train_engine.hpp"

namespace getad::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::pair<std::string, std::string> split_set(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

// Flat run configuration: every TrainConfig key plus input/output paths.
struct RunConfig {
  TrainConfig train;
  std::map<std::string, std::string> paths;

  static bool is_path_key(const std::string& k) {
    return k == "edges" || k == "trajectories" || k == "out";
  }
  void apply(const std::string& k, const std::string& v) {
    if (is_path_key(k))
      paths[k] = v;
    else
      train.apply(k, v);
  }
};

// Bad keys or values are usage errors.
RunConfig resolve_config(const std::string& config_file, const std::vector<std::string>& sets) {
  RunConfig rc;
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot open " + config_file);
      for (const auto& [k, v] : parse_kv_lines(in)) rc.apply(k, v);
    }
    for (const auto& s : sets) {
      const auto [k, v] = split_set(s);
      rc.apply(k, v);
    }
    rc.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const ParseError& e) {
    throw UsageError(config_file + ": " + e.what());
  }
  return rc;
}

void log_config(std::ostream& err, const RunConfig& rc) {
  for (const auto& [k, v] : rc.paths) err << "config " << k << " = " << v << '\n';
  for (const auto& [k, v] : rc.train.to_kv()) err << "config " << k << " = " << v << '\n';
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(tok, &used);
    if (used != tok.size()) throw UsageError("bad seed '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--seeds needs at least one value");
  return out;
}

// Labeled JSONL when the first record carries a label, plain trajectories otherwise.
LabeledSet load_items(const fs::path& p, bool& labeled) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  labeled = !first.empty() && json::parse(first).contains("label");
  in.clear();
  in.seekg(0);
  if (labeled) return read_labeled(in);
  LabeledSet s;
  for (auto& t : read_trajectories(in)) {
    const std::string id = t.id;
    s.items.push_back({std::move(t), Label::normal, id});
  }
  return s;
}

// ---- subcommands ----------------------------------------------------------------

struct SynthArgs {
  GridSpec grid;
  std::string edges = "edges.csv", trajectories = "trajectories.jsonl";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const RoadNetwork net = grid_network(a.grid);
  const auto trajs = generate_trajectories(net, a.grid);
  auto eo = open_out(a.edges);
  write_network(eo, net);
  auto to = open_out(a.trajectories);
  write_trajectories(to, trajs);
  out << json{{"segments", net.size()}, {"edges", net.edge_count()}, {"trajectories", trajs.size()}}.dump()
      << '\n';
  return 0;
}

struct GraphArgs {
  std::string edges, out;
};

int cmd_build_graph(const GraphArgs& a, std::ostream& out) {
  const RoadNetwork net = load_network(a.edges);
  if (!a.out.empty()) {
    auto o = open_out(a.out);
    write_network(o, net);
  }
  out << json{{"segments", net.size()}, {"edges", net.edge_count()}, {"classes", net.class_names()}}.dump()
      << '\n';
  return 0;
}

struct StatsArgs {
  std::string edges, trajectories, features, transitions;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  const RoadNetwork net = load_network(a.edges);
  const auto trajs = load_trajectories(a.trajectories);
  const TransitionStats stats = transition_stats(net, trajs);
  const FeatureMatrix fm = build_features(net, stats);
  for (const auto& w : fm.warnings) err << "warning: " << w << '\n';
  if (!a.features.empty()) {
    auto o = open_out(a.features);
    o << "segment_id";
    for (const auto& c : fm.columns) o << ',' << c.name;
    o << '\n';
    for (std::size_t i = 0; i < net.size(); ++i) {
      o << net.segment(static_cast<SegIndex>(i)).id;
      for (std::size_t j = 0; j < fm.values.cols(); ++j) o << ',' << fm.values(i, j);
      o << '\n';
    }
  }
  if (!a.transitions.empty()) {
    auto o = open_out(a.transitions);
    o << "from_id,to_id,count,prob\n";
    for (const auto& [uv, n] : stats.pairs()) {
      o << net.segment(uv.first).id << ',' << net.segment(uv.second).id << ',' << n << ','
        << stats.prob(uv.first, uv.second) << '\n';
    }
  }
  out << json{{"segments", net.size()},
              {"trajectories", trajs.size()},
              {"observed_transitions", stats.pairs().size()},
              {"feature_width", fm.values.cols()}}
             .dump()
      << '\n';
  return 0;
}

struct AnomalyArgs {
  std::string edges, trajectories, out = "labeled.jsonl", vocab_from;
  std::string mode = "constrained", bound = "replacement";
  double rate = 0.05, max_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_retries = 32;
};

int cmd_gen_anomalies(const AnomalyArgs& a, std::ostream& out) {
  RoadNetwork net = load_network(a.edges);
  const auto normals = load_trajectories(a.trajectories);
  DetourSpec spec;
  spec.mode = parse_detour_mode(a.mode);
  if (a.bound == "replacement")
    spec.bound = DetourBound::replacement_length;
  else if (a.bound == "growth")
    spec.bound = DetourBound::total_growth;
  else
    throw UsageError("--bound must be replacement or growth");
  spec.max_fraction = a.max_fraction;
  spec.rng_seed = a.seed;
  spec.max_retries = a.max_retries;
  if (!a.vocab_from.empty()) {
    const auto train = load_trajectories(a.vocab_from);
    net = restrict_network(net, build_vocab(train).segments());
  }
  const LabeledSet set = build_eval_set(net, normals, a.rate, spec);
  auto o = open_out(a.out);
  write_labeled(o, set);
  out << json{{"items", set.items.size()}, {"anomalies", set.anomalies()}}.dump() << '\n';
  return 0;
}

struct TrainArgs {
  std::string edges, trajectories, out, config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> sets = a.sets;
  if (a.seed) sets.push_back("seed=" + std::to_string(*a.seed));
  RunConfig rc = resolve_config(a.config, sets);
  if (!a.edges.empty()) rc.paths["edges"] = a.edges;
  if (!a.trajectories.empty()) rc.paths["trajectories"] = a.trajectories;
  if (!a.out.empty()) rc.paths["out"] = a.out;
  for (const char* k : {"edges", "trajectories", "out"})
    if (!rc.paths.count(k)) throw UsageError(std::string("train: missing ") + k);
  log_config(err, rc);

  RoadNetwork net = load_network(rc.paths["edges"]);
  const auto trajs = load_trajectories(rc.paths["trajectories"]);
  std::vector<std::string> warnings;
  ModelData data = prepare_data(std::move(net), trajs, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  const TrainResult res = train(std::move(data), trajs, rc.train, [&](const EpochLog& e) {
    err << "epoch " << e.epoch << " ce " << e.ce << " link " << e.link << " total " << e.total << '\n';
  });
  save_checkpoint(res.checkpoint, rc.paths["out"]);
  out << json{{"checkpoint", rc.paths["out"]},
              {"parameters", res.checkpoint.params.scalar_count()},
              {"vocab", res.checkpoint.data.vocab.size()},
              {"final_ce", res.log.empty() ? 0.0 : res.log.back().ce}}
             .dump()
      << '\n';
  return 0;
}

struct ScoreArgs {
  std::string checkpoint, input, out, metric = "cw_nll";
  bool per_token = false;
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const Scoring metric = parse_scoring(a.metric);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Scorer scorer(ckpt);
  bool labeled = false;
  const LabeledSet set = load_items(a.input, labeled);
  std::vector<ScoredItem> items;
  std::size_t rejected = 0;
  for (const auto& it : set.items) {
    const Encoded enc = encode(it.trajectory, scorer.vocab());
    if (!enc.ok()) {
      ++rejected;
      std::string pos;
      for (std::size_t p : enc.oov_positions) pos += (pos.empty() ? "" : ",") + std::to_string(p);
      err << "rejected id=" << it.trajectory.id << " reason=oov positions=" << pos << '\n';
      continue;
    }
    ScoredItem s;
    s.id = it.trajectory.id;
    if (labeled) s.label = it.label == Label::anomalous ? "anomalous" : "normal";
    s.breakdown = scorer.score(*enc.seq);
    items.push_back(std::move(s));
  }
  std::ostringstream buf;
  write_scores(buf, items, a.per_token);
  // Attach the selected metric as "score" for downstream tools.
  std::ostringstream lines;
  std::istringstream in(buf.str());
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j["metric"] = to_string(metric);
    j["score"] = j[to_string(metric)];
    lines << j.dump() << '\n';
  }
  if (a.out.empty()) {
    out << lines.str();
  } else {
    auto o = open_out(a.out);
    o << lines.str();
    out << json{{"scored", items.size()}, {"rejected", rejected}}.dump() << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string scores, metric = "cw_nll", metrics_out, curve_out;
  std::optional<double> threshold;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Scoring metric = parse_scoring(a.metric);
  std::ifstream in(a.scores);
  if (!in) throw std::runtime_error("cannot open " + a.scores);
  const auto recs = read_scores(in);
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  for (const auto& r : recs) {
    if (!r.label) throw std::runtime_error("eval: record '" + r.id + "' has no label");
    s.push_back(r.value(metric));
    y.push_back(*r.label == "anomalous" ? 1 : 0);
  }
  const double* thr = a.threshold ? &*a.threshold : nullptr;
  const EvalResult r = evaluate(s, y, to_string(metric), thr);
  if (!a.metrics_out.empty()) {
    const fs::path mp = a.metrics_out;
    if (mp.has_parent_path()) fs::create_directories(mp.parent_path());
    report(r, mp, a.curve_out);
  }
  out << json::parse(metrics_json(r)).dump() << '\n';
  return 0;
}

struct GradcheckArgs {
  double eps = 1e-3, tol = 1e-4;
  std::uint64_t seed = 7;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(a.seed, a.eps, a.tol)) {
    out << (r.report.passed ? "PASS " : "FAIL ") << r.name << " max_rel_err=" << r.report.max_rel_err
        << " checked=" << r.report.checked << " skipped=" << r.report.skipped << '\n';
    ok = ok && r.report.passed;
  }
  if (!ok) throw std::runtime_error("gradcheck: at least one check exceeded tolerance");
  return 0;
}

struct AblateArgs {
  std::string seeds = "1,2,3", config, out;
  std::vector<std::string> sets;
  std::size_t epochs = 15, width = 10, height = 10, agents = 20, train_trips = 40, eval_trips = 20;
  double noise = 0.05, rate = 0.05;
  std::string mode = "constrained";
};

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const auto seeds = parse_seeds(a.seeds);
  RunConfig base = resolve_config(a.config, a.sets);
  base.train.epochs = a.epochs;
  log_config(err, base);

  struct Variant {
    std::string name;
    bool gpe, link;
  };
  const Variant variants[] = {
      {"gpe+link", true, true}, {"gpe", true, false}, {"rpe+link", false, true}, {"rpe", false, false}};

  json rows = json::array();
  for (const auto& v : variants) {
    std::array<std::vector<double>, 3> auc, f1;
    for (std::uint64_t seed : seeds) {
      ExperimentSpec spec;
      spec.grid.width = a.width;
      spec.grid.height = a.height;
      spec.grid.n_agents = a.agents;
      spec.grid.route_noise = a.noise;
      spec.train_trips = a.train_trips;
      spec.eval_trips = a.eval_trips;
      spec.anomaly_rate = a.rate;
      spec.detour.mode = parse_detour_mode(a.mode);
      spec.train = base.train;
      spec.train.model.use_gpe = v.gpe;
      spec.train.model.use_rpe = !v.gpe;
      spec.train.use_link_loss = v.link;
      spec.set_seed(seed);
      const ExperimentData data = make_experiment_data(spec);
      const RunOutcome run = run_experiment(spec, data);
      for (std::size_t k = 0; k < kAllScorings.size(); ++k) {
        auc[k].push_back(run.metrics[k].pr_auc);
        f1[k].push_back(run.metrics[k].f1);
      }
      err << "ablate " << v.name << " seed " << seed << " cw_nll pr_auc " << run.metrics[0].pr_auc
          << '\n';
    }
    for (std::size_t k = 0; k < kAllScorings.size(); ++k) {
      auto mean = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double d : x) s += d;
        return s / static_cast<double>(x.size());
      };
      json row{{"config", v.name},
               {"scoring", to_string(kAllScorings[k])},
               {"pr_auc", mean(auc[k])},
               {"f1", mean(f1[k])},
               {"pr_auc_per_seed", auc[k]},
               {"f1_per_seed", f1[k]},
               {"seeds", seeds}};
      out << row.dump() << '\n';
      rows.push_back(row);
    }
  }
  if (!a.out.empty()) {
    auto o = open_out(a.out);
    o << rows.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"getad: graph-aware trajectory anomaly detection"};
  app.require_subcommand(1);
  std::function<int()> action;
  std::string active;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a grid world and commuter trajectories");
  s->add_option("--width", synth.grid.width, "Intersections per row")->capture_default_str();
  s->add_option("--height", synth.grid.height, "Intersections per column")->capture_default_str();
  s->add_option("--agents", synth.grid.n_agents, "Number of agents")->capture_default_str();
  s->add_option("--trips", synth.grid.trips_per_agent, "Trips per agent")->capture_default_str();
  s->add_option("--noise", synth.grid.route_noise, "Second-best route probability")->capture_default_str();
  s->add_option("--seed", synth.grid.seed, "World seed")->capture_default_str();
  s->add_option("--edges", synth.edges, "Output edge CSV")->capture_default_str();
  s->add_option("--trajectories", synth.trajectories, "Output trajectory JSONL")->capture_default_str();
  s->callback([&] { action = [&] { return cmd_synth(synth, out); }; });

  GraphArgs graph;
  auto* g = app.add_subcommand("build-graph", "Load and validate a road network");
  g->add_option("--edges", graph.edges, "Edge CSV")->required();
  g->add_option("--out", graph.out, "Write the normalized edge CSV");
  g->callback([&] { action = [&] { return cmd_build_graph(graph, out); }; });

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Transition statistics and segment features");
  st->add_option("--edges", stats.edges, "Edge CSV")->required();
  st->add_option("--trajectories", stats.trajectories, "Trajectory JSONL")->required();
  st->add_option("--features", stats.features, "Output feature CSV");
  st->add_option("--transitions", stats.transitions, "Output transition CSV");
  st->callback([&] { action = [&] { return cmd_stats(stats, out, err); }; });

  AnomalyArgs anom;
  auto* ga = app.add_subcommand("gen-anomalies", "Inject detour anomalies into normal trajectories");
  ga->add_option("--edges", anom.edges, "Edge CSV")->required();
  ga->add_option("--trajectories", anom.trajectories, "Normal trajectory JSONL")->required();
  ga->add_option("--out", anom.out, "Output labeled JSONL")->capture_default_str();
  ga->add_option("--mode", anom.mode, "constrained|unconstrained")
      ->check(CLI::IsMember({"constrained", "unconstrained"}))
      ->capture_default_str();
  ga->add_option("--rate", anom.rate, "Fraction of trajectories to convert")->capture_default_str();
  ga->add_option("--max-fraction", anom.max_fraction, "Constrained detour bound")->capture_default_str();
  ga->add_option("--bound", anom.bound, "replacement|growth")->capture_default_str();
  ga->add_option("--max-retries", anom.max_retries, "Windows tried per trajectory")->capture_default_str();
  ga->add_option("--seed", anom.seed, "Anomaly seed")->capture_default_str();
  ga->add_option("--vocab-from", anom.vocab_from, "Keep detours on segments seen in this JSONL");
  ga->callback([&] { action = [&] { return cmd_gen_anomalies(anom, out); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--edges", tr.edges, "Edge CSV");
  t->add_option("--trajectories", tr.trajectories, "Training trajectory JSONL");
  t->add_option("--out", tr.out, "Checkpoint path");
  t->add_option("--config", tr.config, "Flat key = value config file");
  t->add_option("--set", tr.sets, "Override one config key (key=value)");
  t->add_option("--seed", tr.seed, "Training seed");
  t->callback([&] { action = [&] { return cmd_train(tr, out, err); }; });

  ScoreArgs sc;
  auto* so = app.add_subcommand("score", "Score trajectories with a checkpoint");
  so->add_option("--checkpoint", sc.checkpoint, "Checkpoint path")->required();
  so->add_option("--input", sc.input, "Trajectory or labeled JSONL")->required();
  so->add_option("--out", sc.out, "Output score JSONL (default stdout)");
  so->add_option("--metric", sc.metric, "cw_nll|nll|perplexity")
      ->check(CLI::IsMember({"cw_nll", "nll", "perplexity"}))
      ->capture_default_str();
  so->add_flag("--per-token", sc.per_token, "Include per-token l, H, c");
  so->callback([&] { action = [&] { return cmd_score(sc, out, err); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "PR-AUC and F1 from labeled scores");
  e->add_option("--scores", ev.scores, "Score JSONL")->required();
  e->add_option("--metric", ev.metric, "cw_nll|nll|perplexity")
      ->check(CLI::IsMember({"cw_nll", "nll", "perplexity"}))
      ->capture_default_str();
  e->add_option("--metrics", ev.metrics_out, "Output metrics JSON");
  e->add_option("--curve", ev.curve_out, "Output PR curve CSV");
  e->add_option("--threshold", ev.threshold, "Fixed F1 threshold instead of the best one");
  e->callback([&] { action = [&] { return cmd_eval(ev, out); }; });

  GradcheckArgs gc;
  auto* gcs = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gcs->add_option("--eps", gc.eps, "Central difference step")->capture_default_str();
  gcs->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();
  gcs->add_option("--seed", gc.seed, "Input seed")->capture_default_str();
  gcs->callback([&] { action = [&] { return cmd_gradcheck(gc, out); }; });

  AblateArgs ab;
  auto* ac = app.add_subcommand("ablate", "GPE/RPE x link/no-link grid with all three scorings");
  ac->add_option("--seeds", ab.seeds, "Comma-separated seeds")->capture_default_str();
  ac->add_option("--epochs", ab.epochs, "Epochs per run")->capture_default_str();
  ac->add_option("--width", ab.width, "Grid width")->capture_default_str();
  ac->add_option("--height", ab.height, "Grid height")->capture_default_str();
  ac->add_option("--agents", ab.agents, "Agents")->capture_default_str();
  ac->add_option("--train-trips", ab.train_trips, "Training trips per agent")->capture_default_str();
  ac->add_option("--eval-trips", ab.eval_trips, "Evaluation trips per agent")->capture_default_str();
  ac->add_option("--noise", ab.noise, "Route noise")->capture_default_str();
  ac->add_option("--rate", ab.rate, "Anomaly rate")->capture_default_str();
  ac->add_option("--mode", ab.mode, "constrained|unconstrained")
      ->check(CLI::IsMember({"constrained", "unconstrained"}))
      ->capture_default_str();
  ac->add_option("--config", ab.config, "Base config file");
  ac->add_option("--set", ab.sets, "Override one config key (key=value)");
  ac->add_option("--out", ab.out, "Write all rows as a JSON array");
  ac->callback([&] { action = [&] { return cmd_ablate(ab, out, err); }; });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: usage: " << one_line(ex.what()) << '\n' << app.help();
    return 2;
  }
  for (auto* sub : app.get_subcommands()) active = sub->get_name();
  try {
    return action();
  } catch (const UsageError& ex) {
    err << "error: usage: " << active << ": " << one_line(ex.what()) << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: runtime: " << active << ": " << one_line(ex.what()) << '\n';
    return 1;
  }
}

}  // namespace getad::cli
