// fairgraph command-line driver. Exit codes: 0 success, 1 numerical or
// verification failure, 2 usage, configuration or input failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairgraph/data.hpp"
#include "fairgraph/edit_theory.hpp"
#include "fairgraph/errors.hpp"
#include "fairgraph/pipeline.hpp"
#include "fairgraph/verify.hpp"

using namespace fairgraph;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

// Raised for invalid flag combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

Dataset open_dataset(const std::string& name) {
  return load_dataset(DatasetSpec::in_directory(resolve_dataset_dir(name)));
}

// Flags shared by the config-driven commands.
struct RunFlags {
  std::string dataset = "german";
  std::string config_path;
  std::string mode;
  std::string optimizer;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> splits;
  std::optional<double> alpha, beta, gamma, omega, eta, kappa, lr;
  std::optional<std::size_t> K, K_prime, T_train, T_pre;
  bool no_edit = false;
  std::string out = "runs";

  void attach(CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--dataset", dataset, "dataset name under the data root, or a directory");
    cmd->add_option("--config", config_path, "JSON training config");
    cmd->add_option("--mode", mode, "HSCCAF, CAF, CAF+GE or HSCCAF-GE");
    cmd->add_option("--optimizer", optimizer, "gd or adam");
    cmd->add_option("--seed", seed, "base seed; runs use seed, seed+1, ...");
    cmd->add_option("--splits", splits, "number of random splits");
    cmd->add_option("--alpha", alpha);
    cmd->add_option("--beta", beta);
    cmd->add_option("--gamma", gamma);
    cmd->add_option("--omega", omega);
    cmd->add_option("--eta", eta);
    cmd->add_option("--kappa", kappa);
    cmd->add_option("--lr", lr);
    cmd->add_option("--K", K);
    cmd->add_option("--K-prime", K_prime);
    cmd->add_option("--T-train", T_train);
    cmd->add_option("--T-pre", T_pre);
    cmd->add_flag("--no-edit", no_edit, "skip the graph edit whatever the mode");
    if (with_out) cmd->add_option("--out", out, "output directory");
  }

  TrainConfig config() const {
    TrainConfig c = config_path.empty() ? TrainConfig{} : config_from_json(read_file(config_path));
    if (!mode.empty()) c.mode = parse_mode(mode);
    if (!optimizer.empty()) {
      json j = json::parse(config_to_json(c));
      j["optimizer"] = optimizer;
      c = config_from_json(j.dump());
    }
    if (alpha) c.weights.alpha = *alpha;
    if (beta) c.weights.beta = *beta;
    if (gamma) c.weights.gamma = *gamma;
    if (omega) c.weights.omega = *omega;
    if (eta) c.weights.eta = *eta;
    if (kappa) c.weights.kappa = *kappa;
    if (lr) c.lr = *lr;
    if (K) c.weights.K = *K;
    if (K_prime) c.weights.K_prime = *K_prime;
    if (T_train) c.T_train = *T_train;
    if (T_pre) c.T_pre = *T_pre;
    if (no_edit) c.disable_edit = true;
    if (seed || splits) {
      const std::uint64_t base = seed.value_or(c.seeds.front());
      const std::size_t count = splits.value_or(seed ? 1 : c.seeds.size());
      c.seeds.clear();
      for (std::size_t i = 0; i < count; ++i) c.seeds.push_back(base + i);
    }
    c.validate();
    return c;
  }
};

void print_census(const EdgeCensus& c) {
  std::printf("edges %lld  same-class %lld  same-sensitive %lld\n", static_cast<long long>(c.m),
              static_cast<long long>(c.same_class), static_cast<long long>(c.same_sensitive));
  std::printf("type I %lld  II %lld  III %lld  IV %lld\n", static_cast<long long>(c.by_type[0]),
              static_cast<long long>(c.by_type[1]), static_cast<long long>(c.by_type[2]),
              static_cast<long long>(c.by_type[3]));
}

json census_json(const EdgeCensus& c) {
  json j = {{"m", c.m}, {"N_c", c.same_class}, {"N_s", c.same_sensitive},
            {"I", c.by_type[0]}, {"II", c.by_type[1]}, {"III", c.by_type[2]}, {"IV", c.by_type[3]}};
  if (c.m > 0) {
    j["hr_c"] = c.hr_c();
    j["hr_s"] = c.hr_s();
  }
  return j;
}

// Training view with pseudo-labels from a stored checkpoint.
NodeLabels pseudo_view(const Dataset& ds, const TrainConfig& cfg, const std::string& checkpoint) {
  const auto params = params_from_json(read_file(checkpoint));
  const auto data = prepare(ds, cfg, cfg.seeds.front());
  NodeLabels view = training_view(ds.nodes.labels, data.masks);
  const auto probs = predict(params.predictor, encode(params.encoder, ds.graph, data.x).c);
  const auto hard = hard_labels(probs);
  view.pseudo_label.resize(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    view.pseudo_label[i] = view.class_label[i] != kUnknownLabel ? view.class_label[i] : hard[i];
  }
  return view;
}

NodeLabels pick_labels(const Dataset& ds, const std::string& source, const std::string& checkpoint,
                       const RunFlags& flags) {
  if (source == "truth") {
    for (auto y : ds.nodes.labels.class_label) {
      if (y == kUnknownLabel) throw UsageError("dataset has unlabeled nodes; use --labels pseudo");
    }
    return ds.nodes.labels;
  }
  if (source == "pseudo") {
    if (checkpoint.empty()) throw UsageError("--labels pseudo requires --checkpoint");
    return pseudo_view(ds, flags.config(), checkpoint);
  }
  throw UsageError("--labels must be truth or pseudo");
}

int cmd_analyze(const RunFlags& flags, const std::string& source, const std::string& checkpoint,
                const std::string& json_out) {
  const auto ds = open_dataset(flags.dataset);
  const auto labels = pick_labels(ds, source, checkpoint, flags);
  const auto census = edge_census(ds.graph, labels);
  json j = {{"dataset", ds.name},     {"nodes", ds.graph.num_nodes()},
            {"labels", source},       {"dropped_edges", ds.dropped_edges},
            {"census", census_json(census)}};
  std::printf("%s: %zu nodes, %zu edges (%zu duplicates dropped)\n", ds.name.c_str(),
              ds.graph.num_nodes(), ds.graph.num_edges(), ds.dropped_edges);
  print_census(census);
  if (census.m > 0) std::printf("hr_c %.4f  hr_s %.4f\n", census.hr_c(), census.hr_s());
  if (!json_out.empty()) write_file(json_out, j.dump(2));
  return kOk;
}

int cmd_edit(const RunFlags& flags, const std::string& source, const std::string& checkpoint,
             std::optional<std::size_t> budget) {
  auto ds = open_dataset(flags.dataset);
  const auto labels = pick_labels(ds, source, checkpoint, flags);
  auto edit = fair_edge_remove(ds.graph, labels, budget);
  const auto& r = edit.report;
  std::printf("removed %zu Type III edges\n", r.removed_edges.size());
  std::printf("hr_c %.4f -> %.4f  hr_s %.4f -> %.4f\n", r.hr_c_before, r.hr_c_after, r.hr_s_before,
              r.hr_s_after);
  json j = {{"removed", r.removed_edges.size()},
            {"census_before", census_json(r.census_before)},
            {"census_after", census_json(r.census_after)}};
  ds.graph = std::move(edit.graph);
  write_dataset(flags.out, ds);
  write_file(fs::path(flags.out) / "edit_report.json", j.dump(2));
  return kOk;
}

int cmd_pretrain(const RunFlags& flags) {
  const auto ds = open_dataset(flags.dataset);
  const auto cfg = flags.config();
  const std::uint64_t seed = cfg.seeds.front();
  const auto data = prepare(ds, cfg, seed);
  const auto view = training_view(ds.nodes.labels, data.masks);
  const auto pre = pretrain(ds.graph, data.x, view, data.masks.train, cfg, seed);
  std::size_t positives = 0;
  for (auto y : pre.labels.pseudo_label) positives += y == 1;
  std::printf("pretrain: %zu epochs, loss %.6f -> %.6f, %zu/%zu nodes labeled 1\n", pre.losses.size(),
              pre.losses.empty() ? 0.0 : pre.losses.front(), pre.losses.empty() ? 0.0 : pre.losses.back(),
              positives, pre.labels.size());
  write_file(fs::path(flags.out) / "params.json", params_to_json(pre.params));
  json j = {{"version", kVersion}, {"seed", seed}, {"config_hash", config_hash(cfg)},
            {"config", json::parse(config_to_json(cfg))}, {"losses", pre.losses},
            {"pseudo_labels", pre.labels.pseudo_label}};
  write_file(fs::path(flags.out) / "pretrain.json", j.dump(2));
  return kOk;
}

void print_aggregate(const Aggregate& a) {
  auto cell = [](const Summary& s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f(%.2f)", s.mean, s.std);
    return std::string(buf);
  };
  std::printf("%-14s %-14s %-14s %-14s %-14s\n", "BACC", "AUC", "F1", "dSP", "dEO");
  std::printf("%-14s %-14s %-14s %-14s %-14s\n", cell(a.bacc).c_str(), cell(a.auc).c_str(),
              cell(a.f1).c_str(), cell(a.delta_sp).c_str(), cell(a.delta_eo).c_str());
}

int cmd_train(const RunFlags& flags) {
  const auto ds = open_dataset(flags.dataset);
  const auto cfg = flags.config();
  std::vector<RunResult> runs;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    auto r = run_experiment(ds, cfg, cfg.seeds[i], static_cast<std::int64_t>(i));
    std::printf("split %zu seed %llu: best epoch %zu  BACC %.2f  AUC %.2f  F1 %.2f  dSP %.2f  dEO %.2f\n",
                i, static_cast<unsigned long long>(r.seed), r.best_epoch, r.test.bacc, r.test.auc,
                r.test.f1, r.test.delta_sp, r.test.delta_eo);
    for (const auto& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
    const fs::path dir = fs::path(flags.out) / ("run_" + std::to_string(i));
    write_file(dir / "report.json", run_to_json(r, cfg, flags.dataset));
    write_file(dir / "params.json", params_to_json(r.best_params));
    runs.push_back(std::move(r));
  }
  const auto agg = aggregate(runs);
  std::printf("%s on %s, %zu splits\n", to_string(cfg.mode), ds.name.c_str(), runs.size());
  print_aggregate(agg);
  write_file(fs::path(flags.out) / "aggregate.json", aggregate_to_json(agg, cfg, flags.dataset));
  return kOk;
}

struct StoredRun {
  TrainConfig cfg;
  json report;
  ModelParams params;
};

StoredRun load_run(const std::string& dir) {
  StoredRun s;
  try {
    s.report = json::parse(read_file((fs::path(dir) / "report.json").string()));
    s.cfg = config_from_json(s.report.at("config").dump());
  } catch (const json::exception& e) {
    throw ParseError(std::string("run report: ") + e.what());
  }
  s.params = params_from_json(read_file((fs::path(dir) / "params.json").string()));
  return s;
}

// Graph and features exactly as the stored run trained on them.
std::pair<Graph, PreparedData> rebuild(const Dataset& ds, const StoredRun& s) {
  const auto seed = s.report.at("seed").get<std::uint64_t>();
  auto data = prepare(ds, s.cfg, seed);
  std::set<std::pair<NodeId, NodeId>> removed;
  for (const auto& e : s.report.at("phase1").at("removed_edges")) {
    removed.emplace(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  }
  std::vector<std::size_t> positions;
  const auto edges = ds.graph.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (removed.count({edges[i].u, edges[i].v})) positions.push_back(i);
  }
  if (positions.size() != removed.size()) throw ParseError("stored removed edges are not in the dataset");
  return {ds.graph.without_edges(positions), std::move(data)};
}

int cmd_evaluate(const std::string& dataset, const std::string& run_dir) {
  const auto ds = open_dataset(dataset);
  const auto stored = load_run(run_dir);
  const auto [graph, data] = rebuild(ds, stored);
  const auto probs = predict(stored.params.predictor, encode(stored.params.encoder, graph, data.x).c);
  auto report = evaluate(probs, ds.nodes.labels.class_label, ds.nodes.labels.sensitive, data.masks.test);
  report.seed = stored.report.at("seed").get<std::uint64_t>();
  report.split_id = stored.report.at("split_id").get<std::int64_t>();
  std::printf("BACC %.2f  AUC %.2f  F1 %.2f  dSP %.2f  dEO %.2f  score %.3f\n", report.bacc, report.auc,
              report.f1, report.delta_sp, report.delta_eo, report.score);
  const json now = json::parse(to_json(report));
  if (now != stored.report.at("test")) {
    std::printf("mismatch with stored report\n");
    return kFailure;
  }
  std::printf("matches stored report\n");
  return kOk;
}

int cmd_export(const std::string& dataset, const std::string& run_dir, const std::string& out) {
  const auto ds = open_dataset(dataset);
  const auto stored = load_run(run_dir);
  const auto [graph, data] = rebuild(ds, stored);
  const auto state = encode(stored.params.encoder, graph, data.x);
  export_embeddings(out, state, ds.nodes.labels, data.masks);
  std::printf("wrote %zu x %zu embeddings to %s\n", state.h.rows(), state.h.cols() + 4, out.c_str());
  return kOk;
}

int cmd_grid(const RunFlags& flags, const std::string& grid_path) {
  const auto ds = open_dataset(flags.dataset);
  const auto cfg = flags.config();
  GridSpec grid;
  if (!grid_path.empty()) {
    try {
      const json j = json::parse(read_file(grid_path));
      for (const auto& [key, v] : j.items()) {
        if (key == "K") grid.K = v.get<std::vector<std::size_t>>();
        else if (key == "K_prime") grid.K_prime = v.get<std::vector<std::size_t>>();
        else if (key == "alpha") grid.alpha = v.get<std::vector<double>>();
        else if (key == "beta") grid.beta = v.get<std::vector<double>>();
        else if (key == "gamma") grid.gamma = v.get<std::vector<double>>();
        else if (key == "omega") grid.omega = v.get<std::vector<double>>();
        else if (key == "eta") grid.eta = v.get<std::vector<double>>();
        else throw ConfigError("unknown grid field: " + key);
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("grid file: ") + e.what());
    }
  }
  const auto cells = grid_search(ds, cfg, grid);
  json ranked = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto agg = aggregate(c.runs);
    const auto& w = c.weights;
    if (i < 10) {
      std::printf("%2zu  val %.3f  K %zu K' %zu a %g b %g g %g w %g e %g  test BACC %.2f dSP %.2f dEO %.2f\n",
                  i + 1, c.mean_val_score, w.K, w.K_prime, w.alpha, w.beta, w.gamma, w.omega, w.eta,
                  agg.bacc.mean, agg.delta_sp.mean, agg.delta_eo.mean);
    }
    ranked.push_back({{"rank", i + 1},
                      {"mean_val_score", c.mean_val_score},
                      {"weights",
                       {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"omega", w.omega},
                        {"eta", w.eta}, {"K", w.K}, {"K_prime", w.K_prime}, {"kappa", w.kappa}}},
                      {"test", json::parse(aggregate_to_json(agg, cfg, flags.dataset))}});
  }
  json j = {{"version", kVersion}, {"config_hash", config_hash(cfg)},
            {"config", json::parse(config_to_json(cfg))}, {"cells", ranked}};
  write_file(fs::path(flags.out) / "grid.json", j.dump(2));
  return kOk;
}

int cmd_verify(std::size_t graphs, std::uint64_t seed, bool fault, const std::string& json_out) {
  verify::SuiteOptions opt{graphs, seed, fault};
  const verify::SuiteReport reports[] = {verify::identity_suite(opt), verify::single_edge_suite(opt),
                                         verify::minimal_deletion_suite(opt),
                                         verify::enumeration_suite(opt)};
  bool ok = true;
  json all = json::array();
  for (const auto& r : reports) {
    std::printf("%-22s %s  cases %zu  failures %zu  max residual %.3g  %.2fs\n", r.name.c_str(),
                r.passed() ? "pass" : "FAIL", r.cases, r.failures, r.max_residual, r.seconds);
    if (!r.passed() && r.counterexample) std::printf("  counterexample: %s\n", r.counterexample->c_str());
    ok = ok && r.passed();
    all.push_back(json::parse(verify::to_json(r)));
  }
  if (!json_out.empty()) write_file(json_out, json({{"passed", ok}, {"suites", all}}).dump(2));
  return ok ? kOk : kFailure;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out) {
  const auto res = synth_generate(cfg);
  const auto& ds = res.dataset;
  write_dataset(out, ds);
  const auto census = edge_census(ds.graph, ds.nodes.labels);
  std::printf("synthetic: %zu nodes, %zu edges\n", ds.graph.num_nodes(), ds.graph.num_edges());
  print_census(census);
  if (census.m > 0) std::printf("hr_c %.4f  hr_s %.4f\n", census.hr_c(), census.hr_s());
  std::printf("expected per type: %.1f %.1f %.1f %.1f\n", res.expected.mean[0], res.expected.mean[1],
              res.expected.mean[2], res.expected.mean[3]);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware graph editing and counterfactual fair GNN training"};
  app.require_subcommand(1);

  RunFlags flags;
  std::string label_source = "truth", checkpoint, json_out, run_dir, grid_path, export_out;
  std::optional<std::size_t> budget;
  std::size_t graphs = 100;
  std::uint64_t verify_seed = 0;
  bool fault = false;
  SynthConfig synth;
  std::string synth_out = "synthetic";

  auto* analyze = app.add_subcommand("analyze", "edge census and homophily ratios");
  flags.attach(analyze, false);
  analyze->add_option("--labels", label_source, "truth or pseudo");
  analyze->add_option("--checkpoint", checkpoint, "pre-trained params.json for pseudo-labels");
  analyze->add_option("--json", json_out, "write the census as JSON");

  auto* edit = app.add_subcommand("edit", "remove Type III edges and write the edited dataset");
  flags.attach(edit);
  edit->add_option("--labels", label_source, "truth or pseudo");
  edit->add_option("--checkpoint", checkpoint, "pre-trained params.json for pseudo-labels");
  edit->add_option("--budget", budget, "remove at most this many Type III edges");

  auto* pre = app.add_subcommand("pretrain", "pre-train on the prediction loss");
  flags.attach(pre);
  auto* train = app.add_subcommand("train", "full pipeline over every split");
  flags.attach(train);
  auto* grid = app.add_subcommand("grid", "grid search ranked by validation score");
  flags.attach(grid);
  grid->add_option("--grid", grid_path, "JSON with value lists per hyper-parameter");

  auto* eval = app.add_subcommand("evaluate", "recompute a stored run's test metrics");
  eval->add_option("--dataset", flags.dataset);
  eval->add_option("--run", run_dir, "run directory written by train")->required();

  auto* exp = app.add_subcommand("export", "write a stored run's embeddings as CSV");
  exp->add_option("--dataset", flags.dataset);
  exp->add_option("--run", run_dir, "run directory written by train")->required();
  exp->add_option("--out", export_out, "CSV path")->required();

  auto* ver = app.add_subcommand("verify", "randomized checks of the edge-deletion identities");
  ver->add_option("--graphs", graphs);
  ver->add_option("--seed", verify_seed);
  ver->add_flag("--inject-fault", fault, "keep one Type III edge to exercise failure reporting");
  ver->add_option("--json", json_out);

  auto* syn = app.add_subcommand("synth", "planted-partition graph with target homophily");
  syn->add_option("--n", synth.n);
  syn->add_option("--hr-c", synth.target_hr_c);
  syn->add_option("--hr-s", synth.target_hr_s);
  syn->add_option("--degree", synth.mean_degree);
  syn->add_option("--p-label", synth.p_label);
  syn->add_option("--p-sensitive", synth.p_sensitive);
  syn->add_option("--dim", synth.feature_dim);
  syn->add_option("--seed", synth.seed);
  syn->add_option("--out", synth_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*analyze) return cmd_analyze(flags, label_source, checkpoint, json_out);
    if (*edit) return cmd_edit(flags, label_source, checkpoint, budget);
    if (*pre) return cmd_pretrain(flags);
    if (*train) return cmd_train(flags);
    if (*grid) return cmd_grid(flags, grid_path);
    if (*eval) return cmd_evaluate(flags.dataset, run_dir);
    if (*exp) return cmd_export(flags.dataset, run_dir, export_out);
    if (*ver) return cmd_verify(graphs, verify_seed, fault, json_out);
    if (*syn) return cmd_synth(synth, synth_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kFailure;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kFailure;
  } catch (const DegenerateEditError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
