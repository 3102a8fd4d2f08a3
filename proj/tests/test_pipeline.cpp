#include <cmath>

#include "doctest.h"
#include "fairgraph/data.hpp"
#include "fairgraph/errors.hpp"
#include "fairgraph/pipeline.hpp"
#include "json.hpp"

using namespace fairgraph;
using nlohmann::json;

namespace {

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    SynthConfig cfg;
    cfg.n = 160;
    cfg.mean_degree = 8;
    cfg.target_hr_c = 0.6;
    cfg.target_hr_s = 0.8;
    cfg.seed = 1;
    return synth_generate(cfg).dataset;
  }();
  return ds;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.T_pre = 10;
  c.T_train = 12;
  c.hidden = 8;
  c.d_c = 4;
  c.weights.K = 2;
  c.weights.K_prime = 2;
  c.seeds = {0, 1};
  return c;
}

}  // namespace

TEST_CASE("mode names parse and print") {
  for (auto m : {Mode::HSCCAF, Mode::CAF, Mode::CAF_GE, Mode::HSCCAF_NoGE}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK(parse_mode("caf+ge") == Mode::CAF_GE);
  CHECK_THROWS_AS(parse_mode("gcn"), ConfigError);
}

TEST_CASE("mode switches editing and loss terms") {
  TrainConfig c;
  CHECK(c.edits());
  c.mode = Mode::HSCCAF_NoGE;
  CHECK_FALSE(c.edits());
  c.mode = Mode::CAF;
  CHECK_FALSE(c.edits());
  CHECK(c.effective_weights().omega == 0.0);
  CHECK(c.effective_weights().eta == 0.0);
  CHECK(c.effective_weights().alpha == c.weights.alpha);
  c.mode = Mode::CAF_GE;
  CHECK(c.edits());
  c.disable_edit = true;
  CHECK_FALSE(c.edits());
}

TEST_CASE("config JSON round trip and hash") {
  TrainConfig c;
  c.mode = Mode::CAF_GE;
  c.optimizer = Optimizer::Adam;
  c.splits.train_cap = 100;
  c.weights.kappa = 2.5;
  c.seeds = {7, 8};
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  TrainConfig d = c;
  d.lr = 0.02;
  CHECK(config_hash(d) != config_hash(c));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("config parsing is strict") {
  CHECK_THROWS_AS(config_from_json("{\"lrr\": 0.1}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"lr\": \"fast\"}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"weights\": {\"zeta\": 1}}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"T_train\": 0}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"T_train\": 101}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"weights\": {\"alpha\": -1}}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"splits\": {\"train\": 0.9}}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[1]"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  CHECK(config_from_json("{}").T_train == 100);
}

TEST_CASE("splits are disjoint, stratified, capped and seed-determined") {
  const auto& ds = small_dataset();
  const auto n = ds.graph.num_nodes();
  SplitConfig sc;
  const auto a = split_dataset(n, ds.nodes.labels, sc, 3);
  const auto b = split_dataset(n, ds.nodes.labels, sc, 3);
  const auto c = split_dataset(n, ds.nodes.labels, sc, 4);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);
  std::size_t counts[3][2] = {};
  std::size_t per_class[2] = {};
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(a.train[i] + a.val[i] + a.test[i] == 1);
    const int y = ds.nodes.labels.class_label[i];
    ++per_class[y];
    if (a.train[i]) ++counts[0][y];
    if (a.val[i]) ++counts[1][y];
    if (a.test[i]) ++counts[2][y];
  }
  for (int y = 0; y < 2; ++y) {
    CHECK(std::abs(static_cast<double>(counts[0][y]) - 0.5 * per_class[y]) <= 1.0);
    CHECK(std::abs(static_cast<double>(counts[1][y]) - 0.25 * per_class[y]) <= 1.5);
  }
  sc.train_cap = 20;
  const auto capped = split_dataset(n, ds.nodes.labels, sc, 3);
  std::size_t train = 0, cls1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    train += capped.train[i];
    if (capped.train[i]) cls1 += ds.nodes.labels.class_label[i] == 1;
  }
  CHECK(train == 20);
  CHECK(cls1 == 10);
}

TEST_CASE("training view hides labels outside the training split") {
  const auto& ds = small_dataset();
  const auto masks = split_dataset(ds.graph.num_nodes(), ds.nodes.labels, {}, 0);
  const auto view = training_view(ds.nodes.labels, masks);
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (masks.train[i]) CHECK(view.class_label[i] == ds.nodes.labels.class_label[i]);
    else CHECK(view.class_label[i] == kUnknownLabel);
  }
  CHECK(view.sensitive == ds.nodes.labels.sensitive);
}

TEST_CASE("pretraining fills pseudo-labels and keeps truth on train") {
  const auto& ds = small_dataset();
  const auto cfg = quick_config();
  const auto data = prepare(ds, cfg, 0);
  const auto view = training_view(ds.nodes.labels, data.masks);
  const auto pre = pretrain(ds.graph, data.x, view, data.masks.train, cfg, 0);
  CHECK(pre.losses.size() == cfg.T_pre);
  CHECK(pre.losses.back() < pre.losses.front());
  for (std::size_t i = 0; i < pre.labels.size(); ++i) {
    CHECK((pre.labels.pseudo_label[i] == 0 || pre.labels.pseudo_label[i] == 1));
    if (data.masks.train[i]) CHECK(pre.labels.pseudo_label[i] == ds.nodes.labels.class_label[i]);
  }
}

TEST_CASE("runs are deterministic and select the best validation epoch") {
  const auto& ds = small_dataset();
  const auto cfg = quick_config();
  const auto a = run_experiment(ds, cfg, 5, 0);
  const auto b = run_experiment(ds, cfg, 5, 0);
  REQUIRE(a.epochs.size() == cfg.T_train);
  for (std::size_t t = 0; t < a.epochs.size(); ++t) CHECK(a.epochs[t].total == b.epochs[t].total);
  CHECK(a.best_params == b.best_params);
  CHECK(a.test.bacc == b.test.bacc);
  double best = -1e300;
  std::size_t arg = 0;
  for (const auto& e : a.epochs) {
    if (e.val_score && *e.val_score > best) {
      best = *e.val_score;
      arg = e.epoch;
    }
  }
  CHECK(a.best_epoch == arg);
  CHECK(a.val.score == best);
  CHECK(a.phase1.edit.census_after.count(EdgeType::III) == 0);
  CHECK(a.phase1.identity_residual < 1e-12);
}

TEST_CASE("disabling the extra terms reduces to the plain mode bit for bit") {
  const auto& ds = small_dataset();
  auto full = quick_config();
  full.weights.omega = 0.0;
  full.weights.eta = 0.0;
  full.disable_edit = true;
  auto plain = quick_config();
  plain.mode = Mode::CAF;
  const auto a = run_experiment(ds, full, 2, 0);
  const auto b = run_experiment(ds, plain, 2, 0);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t t = 0; t < a.epochs.size(); ++t) {
    CHECK(a.epochs[t].total == b.epochs[t].total);
    CHECK(a.epochs[t].parts.inv == b.epochs[t].parts.inv);
  }
  CHECK(a.best_params == b.best_params);
}

TEST_CASE("run and aggregate reports") {
  const auto& ds = small_dataset();
  const auto cfg = quick_config();
  std::vector<RunResult> runs;
  for (auto s : cfg.seeds) runs.push_back(run_experiment(ds, cfg, s, static_cast<std::int64_t>(s)));
  const auto agg = aggregate(runs);
  CHECK(agg.runs == 2);
  const double m = (runs[0].test.bacc + runs[1].test.bacc) / 2;
  CHECK(agg.bacc.mean == doctest::Approx(m));
  CHECK(agg.bacc.std == doctest::Approx(std::abs(runs[0].test.bacc - m)));
  const auto j = json::parse(run_to_json(runs[0], cfg, "synthetic"));
  CHECK(j.at("config_hash") == config_hash(cfg));
  CHECK(j.at("test").at("bacc").get<double>() == runs[0].test.bacc);
  CHECK(j.at("epochs").size() == cfg.T_train);
  CHECK(j.at("phase1").at("removed_edges").size() == runs[0].phase1.edit.removed_edges.size());
  const auto ja = json::parse(aggregate_to_json(agg, cfg, "synthetic"));
  CHECK(ja.at("runs") == 2);
}

TEST_CASE("grid covers the default search space") {
  GridSpec g;
  const auto cells = g.cells(1.0);
  CHECK(cells.size() == 3u * 3 * 5 * 2 * 3 * 5 * 7);
  LossWeights table{10, 1, 1, 0.3, 0.09, 5, 5, 1};
  CHECK(g.contains(table));
  table.alpha = 3;
  CHECK_FALSE(g.contains(table));
}

TEST_CASE("grid search ranks cells by validation score") {
  const auto& ds = small_dataset();
  auto cfg = quick_config();
  cfg.T_train = 5;
  cfg.T_pre = 5;
  cfg.seeds = {0};
  GridSpec g;
  g.K = {2};
  g.K_prime = {2};
  g.alpha = {0.5, 5};
  g.beta = {1};
  g.gamma = {0.1};
  g.omega = {0.3};
  g.eta = {0.09};
  const auto cells = grid_search(ds, cfg, g);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].mean_val_score >= cells[1].mean_val_score);
  CHECK(cells[0].runs.size() == 1);
}
