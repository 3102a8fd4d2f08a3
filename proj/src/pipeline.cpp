#include "fairgraph/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "json.hpp"

#include "fairgraph/edit_theory.hpp"
#include "fairgraph/errors.hpp"
#include "fairgraph/rng.hpp"
#include "fairgraph/tape.hpp"

namespace fairgraph {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

class Stepper {
 public:
  Stepper(Optimizer kind, double lr) : kind_(kind), lr_(lr) {}

  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
    if (kind_ == Optimizer::GD) {
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].data();
        const auto g = grads[k].data();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr_ * g[i];
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.rows(), p.cols());
        v_.emplace_back(p.rows(), p.cols());
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k].data();
      const auto g = grads[k].data();
      auto m = m_[k].data();
      auto v = v_[k].data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
  }

 private:
  Optimizer kind_;
  double lr_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

void apply_step(ModelParams& params, Stepper& stepper, const std::vector<Matrix>& grads) {
  auto t = params.tensors();
  stepper.step(t, grads);
  params.assign(std::move(t));
}

// Truth on training nodes, the hard prediction elsewhere.
std::vector<std::int8_t> effective_labels(const NodeLabels& view, const std::vector<double>& probs) {
  const auto hard = hard_labels(probs);
  std::vector<std::int8_t> out(view.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = view.class_label[i] != kUnknownLabel ? view.class_label[i] : hard[i];
  }
  return out;
}

std::vector<double> column(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

std::optional<MetricsReport> try_evaluate(const std::vector<double>& probs, const NodeLabels& truth,
                                          const std::vector<std::uint8_t>& mask) {
  try {
    return evaluate(probs, truth.class_label, truth.sensitive, mask);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

json weights_json(const LossWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta},       {"gamma", w.gamma},
          {"omega", w.omega}, {"eta", w.eta},         {"K", w.K},
          {"K_prime", w.K_prime}, {"kappa", w.kappa}};
}

json census_json(const EdgeCensus& c) {
  return {{"m", c.m}, {"N_c", c.same_class}, {"N_s", c.same_sensitive}, {"types", c.by_type}};
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::HSCCAF: return "HSCCAF";
    case Mode::CAF: return "CAF";
    case Mode::CAF_GE: return "CAF+GE";
    case Mode::HSCCAF_NoGE: return "HSCCAF-GE";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  const std::string l = lower(s);
  if (l == "hsccaf") return Mode::HSCCAF;
  if (l == "caf") return Mode::CAF;
  if (l == "caf+ge") return Mode::CAF_GE;
  if (l == "hsccaf-ge") return Mode::HSCCAF_NoGE;
  throw ConfigError("unknown mode: " + s);
}

void TrainConfig::validate() const {
  try {
    weights.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (refresh_period < 1) throw ConfigError("refresh_period must be at least 1");
  if (T_train < 1 || T_train > 100) throw ConfigError("T_train must lie in [1, 100]");
  if (T_pre > 100) throw ConfigError("T_pre must not exceed 100");
  if (hidden == 0 || d_c == 0) throw ConfigError("hidden and d_c must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  const double sum = splits.train + splits.val + splits.test;
  if (!(splits.train > 0.0 && splits.val > 0.0 && splits.test > 0.0) || std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }
  if (splits.train_cap && *splits.train_cap < 2) throw ConfigError("train_cap must be at least 2");
}

bool TrainConfig::edits() const {
  return !disable_edit && (mode == Mode::HSCCAF || mode == Mode::CAF_GE);
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  if (mode == Mode::CAF || mode == Mode::CAF_GE) {
    w.omega = 0.0;
    w.eta = 0.0;
  }
  return w;
}

std::string config_to_json(const TrainConfig& c) {
  json splits = {{"train", c.splits.train},
                 {"val", c.splits.val},
                 {"test", c.splits.test},
                 {"stratified", c.splits.stratified}};
  splits["train_cap"] = c.splits.train_cap ? json(*c.splits.train_cap) : json(nullptr);
  json j = {{"mode", to_string(c.mode)},
            {"weights", weights_json(c.weights)},
            {"dis_metric", c.dis_metric == DisMetric::Cosine ? "cosine" : "l2"},
            {"optimizer", c.optimizer == Optimizer::GD ? "gd" : "adam"},
            {"lr", c.lr},
            {"T_pre", c.T_pre},
            {"T_train", c.T_train},
            {"refresh_period", c.refresh_period},
            {"hidden", c.hidden},
            {"d_c", c.d_c},
            {"reinit", c.reinit},
            {"disable_edit", c.disable_edit},
            {"sc_labels", c.sc_labels == ContrastiveLabels::Labeled ? "labeled" : "pseudo"},
            {"splits", splits},
            {"seeds", c.seeds}};
  return j.dump();
}

TrainConfig config_from_json(const std::string& text) {
  TrainConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") {
        c.mode = parse_mode(v.get<std::string>());
      } else if (key == "weights") {
        for (const auto& [wk, wv] : v.items()) {
          if (wk == "alpha") c.weights.alpha = wv.get<double>();
          else if (wk == "beta") c.weights.beta = wv.get<double>();
          else if (wk == "gamma") c.weights.gamma = wv.get<double>();
          else if (wk == "omega") c.weights.omega = wv.get<double>();
          else if (wk == "eta") c.weights.eta = wv.get<double>();
          else if (wk == "K") c.weights.K = wv.get<std::size_t>();
          else if (wk == "K_prime") c.weights.K_prime = wv.get<std::size_t>();
          else if (wk == "kappa") c.weights.kappa = wv.get<double>();
          else throw ConfigError("unknown weights field: " + wk);
        }
      } else if (key == "dis_metric") {
        const auto s = lower(v.get<std::string>());
        if (s == "cosine") c.dis_metric = DisMetric::Cosine;
        else if (s == "l2") c.dis_metric = DisMetric::L2;
        else throw ConfigError("dis_metric must be cosine or l2");
      } else if (key == "optimizer") {
        const auto s = lower(v.get<std::string>());
        if (s == "gd") c.optimizer = Optimizer::GD;
        else if (s == "adam") c.optimizer = Optimizer::Adam;
        else throw ConfigError("optimizer must be gd or adam");
      } else if (key == "lr") {
        c.lr = v.get<double>();
      } else if (key == "T_pre") {
        c.T_pre = v.get<std::size_t>();
      } else if (key == "T_train") {
        c.T_train = v.get<std::size_t>();
      } else if (key == "refresh_period") {
        c.refresh_period = v.get<std::size_t>();
      } else if (key == "hidden") {
        c.hidden = v.get<std::size_t>();
      } else if (key == "d_c") {
        c.d_c = v.get<std::size_t>();
      } else if (key == "reinit") {
        c.reinit = v.get<bool>();
      } else if (key == "disable_edit") {
        c.disable_edit = v.get<bool>();
      } else if (key == "sc_labels") {
        const auto s = lower(v.get<std::string>());
        if (s == "labeled") c.sc_labels = ContrastiveLabels::Labeled;
        else if (s == "pseudo") c.sc_labels = ContrastiveLabels::Pseudo;
        else throw ConfigError("sc_labels must be labeled or pseudo");
      } else if (key == "splits") {
        for (const auto& [sk, sv] : v.items()) {
          if (sk == "train") c.splits.train = sv.get<double>();
          else if (sk == "val") c.splits.val = sv.get<double>();
          else if (sk == "test") c.splits.test = sv.get<double>();
          else if (sk == "stratified") c.splits.stratified = sv.get<bool>();
          else if (sk == "train_cap") {
            if (sv.is_null()) c.splits.train_cap.reset();
            else c.splits.train_cap = sv.get<std::size_t>();
          } else {
            throw ConfigError("unknown splits field: " + sk);
          }
        }
      } else if (key == "seeds") {
        c.seeds = v.get<std::vector<std::uint64_t>>();
      } else {
        throw ConfigError("unknown config field: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : config_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SplitMasks split_dataset(std::size_t n, const NodeLabels& truth, const SplitConfig& cfg,
                         std::uint64_t seed) {
  if (truth.size() != n) throw ShapeError("label count does not match node count");
  Rng rng(derive_seed(seed, "split"));
  auto shuffle = [&rng](std::vector<NodeId>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
  };
  std::vector<std::vector<NodeId>> pools;
  if (cfg.stratified) {
    pools.resize(2);
    for (NodeId i = 0; i < n; ++i) {
      if (truth.class_label[i] != kUnknownLabel) pools[truth.class_label[i]].push_back(i);
    }
  } else {
    pools.resize(1);
    for (NodeId i = 0; i < n; ++i) {
      if (truth.class_label[i] != kUnknownLabel) pools[0].push_back(i);
    }
  }
  SplitMasks m;
  m.train.assign(n, 0);
  m.val.assign(n, 0);
  m.test.assign(n, 0);
  for (auto& pool : pools) {
    shuffle(pool);
    const auto size = static_cast<double>(pool.size());
    const auto a = static_cast<std::size_t>(cfg.train * size);
    const auto b = static_cast<std::size_t>((cfg.train + cfg.val) * size + 1e-9);
    std::size_t take = a;
    if (cfg.train_cap) take = std::min(take, *cfg.train_cap / pools.size());
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (k < take) m.train[pool[k]] = 1;
      else if (k >= a && k < b) m.val[pool[k]] = 1;
      else if (k >= b) m.test[pool[k]] = 1;
    }
  }
  for (const auto* mask : {&m.train, &m.val, &m.test}) {
    if (std::none_of(mask->begin(), mask->end(), [](auto v) { return v != 0; })) {
      throw EmptyInputError("a split is empty");
    }
  }
  return m;
}

NodeLabels training_view(const NodeLabels& truth, const SplitMasks& masks) {
  NodeLabels view = truth;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!masks.train[i]) view.class_label[i] = kUnknownLabel;
  }
  view.pseudo_label.assign(view.size(), kUnknownLabel);
  return view;
}

PretrainResult pretrain(const Graph& g, const Matrix& x, const NodeLabels& train_view,
                        const std::vector<std::uint8_t>& train_mask, const TrainConfig& cfg,
                        std::uint64_t seed) {
  PretrainResult res;
  res.params = init_params(x.cols(), cfg.hidden, cfg.d_c, derive_seed(seed, "init"));
  Stepper stepper(cfg.optimizer, cfg.lr);
  for (std::size_t t = 0; t < cfg.T_pre; ++t) {
    GradTape tape;
    const auto vars = record_params(tape, res.params);
    const auto fw = record_forward(tape, vars, res.params, g, tape.constant(x));
    const Var loss = pred_loss(tape, fw.probs, train_view.class_label, train_mask);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) {
      throw DivergenceError("pre-training loss is not finite at epoch " + std::to_string(t + 1));
    }
    res.losses.push_back(value);
    const auto all = vars.all();
    apply_step(res.params, stepper, tape.grad(loss, all));
  }
  const auto state = encode(res.params.encoder, g, x);
  const auto probs = predict(res.params.predictor, state.c);
  res.labels = train_view;
  res.labels.pseudo_label = effective_labels(train_view, probs);
  return res;
}

Phase1Result run_phase1(const Graph& g, const NodeLabels& labels, const NodeLabels& truth,
                        const TrainConfig& cfg) {
  Phase1Result res;
  const bool truth_complete = std::none_of(truth.class_label.begin(), truth.class_label.end(),
                                           [](auto y) { return y == kUnknownLabel; });
  if (truth_complete && g.num_edges() > 0) res.report.truth_before = homophily_ratios(g, truth);
  if (!cfg.edits()) {
    res.graph = g;
    auto& e = res.report.edit;
    e.skipped = true;
    e.census_before = e.census_after = edge_census(g, labels);
    if (g.num_edges() > 0) {
      e.hr_c_before = e.hr_c_after = e.census_before.hr_c();
      e.hr_s_before = e.hr_s_after = e.census_before.hr_s();
    }
    res.report.truth_after = res.report.truth_before;
    return res;
  }
  try {
    auto edit = fair_edge_remove(g, labels);
    res.graph = std::move(edit.graph);
    res.report.edit = std::move(edit.report);
  } catch (const DegenerateEditError&) {
    res.graph = g;
    res.report.fallback = true;
    res.report.edit.census_before = res.report.edit.census_after = edge_census(g, labels);
    res.report.truth_after = res.report.truth_before;
    return res;
  }
  const auto& e = res.report.edit;
  const auto k = static_cast<std::int64_t>(e.removed_edges.size());
  const auto predicted = predict_ratio_shift(e.census_before, k);
  res.report.identity_residual =
      std::max(std::abs((e.hr_c_after - e.hr_c_before) - predicted.d_hr_c),
               std::abs((e.hr_s_after - e.hr_s_before) - predicted.d_hr_s));
  if (truth_complete) res.report.truth_after = homophily_ratios(res.graph, truth);
  return res;
}

Objective record_objective(GradTape& tape, const ForwardVars& fw, const TrainConfig& cfg,
                           const ObjectiveData& d) {
  const LossWeights w = cfg.effective_weights();
  Objective obj;
  std::vector<Var> terms;
  std::vector<double> coef;
  auto add = [&](Var v, double weight, double& part) {
    terms.push_back(v);
    coef.push_back(weight);
    part = tape.scalar(v);
  };
  add(pred_loss(tape, fw.probs, d.labels, d.train_mask), 1.0, obj.parts.pred);
  if (w.alpha > 0.0) add(inv_loss(tape, fw.c, fw.e, *d.cf, w.gamma, cfg.dis_metric), w.alpha, obj.parts.inv);
  if (w.beta > 0.0) add(suf_loss(tape, fw.h, d.positives, d.negatives), w.beta, obj.parts.suf);
  if (w.omega > 0.0) {
    const std::vector<std::uint8_t> all_nodes(d.effective.size(), 1);
    add(cfg.sc_labels == ContrastiveLabels::Labeled
            ? sc_loss(tape, fw.c, d.labels, d.train_mask, w.kappa)
            : sc_loss(tape, fw.c, d.effective, all_nodes, w.kappa),
        w.omega, obj.parts.sc);
  }
  if (w.eta > 0.0) add(env_loss(tape, fw.e, d.sensitive, w.K_prime), w.eta, obj.parts.env);
  obj.total = tape.weighted_sum(coef, terms);
  return obj;
}

RunResult train_full(const Graph& g, const Matrix& x, const NodeLabels& labels,
                     const NodeLabels& truth, const SplitMasks& masks, ModelParams params,
                     const TrainConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const LossWeights w = cfg.effective_weights();
  RunResult res;
  res.seed = seed;
  Stepper stepper(cfg.optimizer, cfg.lr);

  std::vector<Edge> negatives;
  if (w.beta > 0.0) {
    negatives = sample_negative_edges(g, g.num_edges(), derive_seed(seed, "negatives"));
  }
  const std::span<const Edge> positives = g.edges();

  std::vector<std::int8_t> effective(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) effective[i] = static_cast<std::int8_t>(labels.effective_label(static_cast<NodeId>(i)));
  CounterfactualIndex cf;
  bool warned_empty = false;
  double best = -std::numeric_limits<double>::infinity();

  for (std::size_t t = 1; t <= cfg.T_train; ++t) {
    GradTape tape;
    const auto vars = record_params(tape, params);
    const auto fw = record_forward(tape, vars, params, g, tape.constant(x));
    const auto probs = column(tape.value(fw.probs));

    if (t == 1 || t % cfg.refresh_period == 0) {
      if (t > 1) effective = effective_labels(labels, probs);
      if (w.alpha > 0.0) {
        cf = select_counterfactuals(tape.value(fw.h), effective, labels.sensitive, w.K);
        if (cf.e_pairs() + cf.c_pairs() == 0 && !warned_empty) {
          res.warnings.push_back("no counterfactual candidates; invariance terms inactive");
          warned_empty = true;
        }
      }
    }

    EpochRecord rec;
    rec.epoch = t;
    const ObjectiveData data{labels.class_label, masks.train, effective, labels.sensitive,
                             positives, negatives, &cf};
    const auto obj = record_objective(tape, fw, cfg, data);
    const Var total = obj.total;
    rec.parts = obj.parts;
    rec.total = tape.scalar(total);
    if (!std::isfinite(rec.total)) {
      throw DivergenceError("loss is not finite at epoch " + std::to_string(t) + " (pred " +
                            std::to_string(rec.parts.pred) + ", inv " +
                            std::to_string(rec.parts.inv) + ", suf " +
                            std::to_string(rec.parts.suf) + ", sc " + std::to_string(rec.parts.sc) +
                            ", env " + std::to_string(rec.parts.env) + ")");
    }

    rec.val = try_evaluate(probs, truth, masks.val);
    if (rec.val) rec.val_score = rec.val->score;
    if (rec.val_score && *rec.val_score > best) {
      const auto test = try_evaluate(probs, truth, masks.test);
      if (test) {
        best = *rec.val_score;
        res.best_epoch = t;
        res.val = *rec.val;
        res.test = *test;
        res.best_params = params;
      }
    }
    res.epochs.push_back(std::move(rec));

    const auto all = vars.all();
    apply_step(params, stepper, tape.grad(total, all));
  }
  if (res.best_epoch == 0) throw UndefinedMetricError("no epoch had defined validation and test metrics");
  res.test.seed = res.val.seed = seed;
  res.pseudo_labels = effective;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

PreparedData prepare(const Dataset& ds, const TrainConfig& cfg, std::uint64_t seed) {
  PreparedData p;
  p.masks = split_dataset(ds.graph.num_nodes(), ds.nodes.labels, cfg.splits, seed);
  p.x = standardize(ds.nodes.features, p.masks.train);
  return p;
}

RunResult run_experiment(const Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                         std::int64_t split_id) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto data = prepare(ds, cfg, seed);
  const NodeLabels view = training_view(ds.nodes.labels, data.masks);
  auto pre = pretrain(ds.graph, data.x, view, data.masks.train, cfg, seed);
  auto phase1 = run_phase1(ds.graph, pre.labels, ds.nodes.labels, cfg);
  ModelParams start_params = cfg.reinit
                                 ? init_params(data.x.cols(), cfg.hidden, cfg.d_c, derive_seed(seed, "reinit"))
                                 : pre.params;
  auto res = train_full(phase1.graph, data.x, pre.labels, ds.nodes.labels, data.masks,
                        std::move(start_params), cfg, seed);
  res.split_id = split_id;
  res.test.split_id = res.val.split_id = split_id;
  res.phase1 = std::move(phase1.report);
  if (res.phase1.fallback) res.warnings.push_back("edit removed every edge; original graph kept");
  res.pretrain_losses = std::move(pre.losses);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

Aggregate aggregate(const std::vector<RunResult>& runs) {
  Aggregate a;
  a.runs = runs.size();
  if (runs.empty()) return a;
  auto summarize = [&](auto field) {
    Summary s;
    for (const auto& r : runs) s.mean += field(r.test);
    s.mean /= static_cast<double>(runs.size());
    for (const auto& r : runs) s.std += (field(r.test) - s.mean) * (field(r.test) - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(runs.size()));
    return s;
  };
  a.bacc = summarize([](const MetricsReport& m) { return m.bacc; });
  a.auc = summarize([](const MetricsReport& m) { return m.auc; });
  a.f1 = summarize([](const MetricsReport& m) { return m.f1; });
  a.delta_sp = summarize([](const MetricsReport& m) { return m.delta_sp; });
  a.delta_eo = summarize([](const MetricsReport& m) { return m.delta_eo; });
  a.score = summarize([](const MetricsReport& m) { return m.score; });
  return a;
}

std::string run_to_json(const RunResult& r, const TrainConfig& cfg, const std::string& dataset) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    json je = {{"epoch", e.epoch},
               {"total", e.total},
               {"pred", e.parts.pred},
               {"inv", e.parts.inv},
               {"suf", e.parts.suf},
               {"sc", e.parts.sc},
               {"env", e.parts.env}};
    je["val_score"] = e.val_score ? json(*e.val_score) : json(nullptr);
    if (e.val) {
      je["val_bacc"] = e.val->bacc;
      je["val_delta_sp"] = e.val->delta_sp;
      je["val_delta_eo"] = e.val->delta_eo;
    }
    epochs.push_back(je);
  }
  const auto& p1 = r.phase1;
  json removed = json::array();
  for (const auto& ed : p1.edit.removed_edges) removed.push_back({ed.u, ed.v});
  json phase1 = {{"skipped", p1.edit.skipped},
                 {"fallback", p1.fallback},
                 {"removed", p1.edit.removed_edges.size()},
                 {"removed_edges", removed},
                 {"census_before", census_json(p1.edit.census_before)},
                 {"census_after", census_json(p1.edit.census_after)},
                 {"hr_c_before", p1.edit.hr_c_before},
                 {"hr_c_after", p1.edit.hr_c_after},
                 {"hr_s_before", p1.edit.hr_s_before},
                 {"hr_s_after", p1.edit.hr_s_after},
                 {"identity_residual", p1.identity_residual}};
  if (p1.truth_before) {
    phase1["truth_hr_c_before"] = p1.truth_before->hr_c;
    phase1["truth_hr_s_before"] = p1.truth_before->hr_s;
  }
  if (p1.truth_after) {
    phase1["truth_hr_c_after"] = p1.truth_after->hr_c;
    phase1["truth_hr_s_after"] = p1.truth_after->hr_s;
  }
  json j = {{"version", kVersion},
            {"dataset", dataset},
            {"mode", to_string(cfg.mode)},
            {"optimizer", cfg.optimizer == Optimizer::GD ? "gd" : "adam"},
            {"config_hash", config_hash(cfg)},
            {"config", json::parse(config_to_json(cfg))},
            {"seed", r.seed},
            {"split_id", r.split_id},
            {"best_epoch", r.best_epoch},
            {"test", json::parse(to_json(r.test))},
            {"val", json::parse(to_json(r.val))},
            {"phase1", phase1},
            {"epochs", epochs},
            {"pretrain_losses", r.pretrain_losses},
            {"warnings", r.warnings},
            {"seconds", r.seconds}};
  return j.dump(2);
}

std::string aggregate_to_json(const Aggregate& a, const TrainConfig& cfg,
                              const std::string& dataset) {
  json j = {{"version", kVersion},
            {"dataset", dataset},
            {"mode", to_string(cfg.mode)},
            {"optimizer", cfg.optimizer == Optimizer::GD ? "gd" : "adam"},
            {"config_hash", config_hash(cfg)},
            {"seeds", cfg.seeds},
            {"runs", a.runs},
            {"bacc", summary_json(a.bacc)},
            {"auc", summary_json(a.auc)},
            {"f1", summary_json(a.f1)},
            {"delta_sp", summary_json(a.delta_sp)},
            {"delta_eo", summary_json(a.delta_eo)},
            {"score", summary_json(a.score)}};
  return j.dump(2);
}

std::vector<LossWeights> GridSpec::cells(double kappa) const {
  std::vector<LossWeights> out;
  for (auto k : K)
    for (auto kp : K_prime)
      for (auto a : alpha)
        for (auto b : beta)
          for (auto g : gamma)
            for (auto o : omega)
              for (auto e : eta) out.push_back({a, b, g, o, e, k, kp, kappa});
  return out;
}

bool GridSpec::contains(const LossWeights& w) const {
  auto in = [](const auto& list, auto v) { return std::find(list.begin(), list.end(), v) != list.end(); };
  return in(K, w.K) && in(K_prime, w.K_prime) && in(alpha, w.alpha) && in(beta, w.beta) &&
         in(gamma, w.gamma) && in(omega, w.omega) && in(eta, w.eta);
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("FAIRGRAPH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<GridCell> grid_search(const Dataset& ds, const TrainConfig& cfg, const GridSpec& grid) {
  cfg.validate();
  const auto cells = grid.cells(cfg.weights.kappa);
  const std::size_t per_cell = cfg.seeds.size();
  const std::size_t jobs = cells.size() * per_cell;
  std::vector<RunResult> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      try {
        TrainConfig c = cfg;
        c.weights = cells[j / per_cell];
        const std::size_t s = j % per_cell;
        results[j] = run_experiment(ds, c, c.seeds[s], static_cast<std::int64_t>(s));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min(worker_threads(), std::max<std::size_t>(jobs, 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<GridCell> out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out[c].weights = cells[c];
    for (std::size_t s = 0; s < per_cell; ++s) {
      out[c].runs.push_back(std::move(results[c * per_cell + s]));
      out[c].mean_val_score += out[c].runs.back().val.score;
    }
    out[c].mean_val_score /= static_cast<double>(per_cell);
  }
  std::stable_sort(out.begin(), out.end(), [](const GridCell& a, const GridCell& b) {
    return a.mean_val_score > b.mean_val_score;
  });
  return out;
}

}  // namespace fairgraph
