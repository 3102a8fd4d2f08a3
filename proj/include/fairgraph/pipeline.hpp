#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairgraph/data.hpp"
#include "fairgraph/graph.hpp"
#include "fairgraph/losses.hpp"
#include "fairgraph/metrics.hpp"
#include "fairgraph/model.hpp"

namespace fairgraph {

inline constexpr const char* kVersion = "0.1.0";

/// HSCCAF = CAF + graph edit + contrastive + environmental losses.
enum class Mode { HSCCAF, CAF, CAF_GE, HSCCAF_NoGE };
const char* to_string(Mode m);
/// Accepts "HSCCAF", "CAF", "CAF+GE", "HSCCAF-GE" (case-insensitive).
Mode parse_mode(const std::string& s);

enum class Optimizer { GD, Adam };
/// Which labels define the contrastive positives: ground truth on the
/// training nodes, or effective labels (pseudo-labels included) on all
/// nodes.
enum class ContrastiveLabels { Labeled, Pseudo };

/// Per-class fractions of the labeled nodes. Train takes the first
/// `train` fraction of each shuffled class (at most train_cap / 2 per class
/// when a cap is set), validation and test take the next slices.
struct SplitConfig {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;
  std::optional<std::size_t> train_cap;
  bool stratified = true;
};

struct TrainConfig {
  Mode mode = Mode::HSCCAF;
  LossWeights weights{10.0, 1.0, 1.0, 0.3, 0.09, 5, 5, 1.0};
  DisMetric dis_metric = DisMetric::Cosine;
  Optimizer optimizer = Optimizer::GD;
  double lr = 0.01;
  std::size_t T_pre = 100;
  std::size_t T_train = 100;
  std::size_t refresh_period = 5;
  std::size_t hidden = 16;
  std::size_t d_c = 16;
  bool reinit = false;        // fresh parameters for phase 2
  bool disable_edit = false;  // skip phase 1 regardless of mode
  ContrastiveLabels sc_labels = ContrastiveLabels::Labeled;
  SplitConfig splits;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  /// Throws ConfigError.
  void validate() const;
  bool edits() const;
  /// Weights with the terms the mode switches off set to zero.
  LossWeights effective_weights() const;
};

std::string config_to_json(const TrainConfig& c);
/// Strict: unknown fields and wrong types raise ConfigError. Missing fields
/// keep their defaults.
TrainConfig config_from_json(const std::string& text);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& c);

/// Throws EmptyInputError when a split would be empty.
SplitMasks split_dataset(std::size_t n, const NodeLabels& truth, const SplitConfig& cfg,
                         std::uint64_t seed);

/// Labels visible to training: ground truth on training nodes only.
NodeLabels training_view(const NodeLabels& truth, const SplitMasks& masks);

struct EpochRecord {
  std::size_t epoch = 0;
  LossParts parts;
  double total = 0.0;
  std::optional<double> val_score;  // empty when a validation metric is undefined
  std::optional<MetricsReport> val;
};

struct PretrainResult {
  ModelParams params;
  NodeLabels labels;  // training view with pseudo-labels filled in for every node
  std::vector<double> losses;
};

/// T_pre full-batch steps on the prediction loss over the training nodes.
PretrainResult pretrain(const Graph& g, const Matrix& x, const NodeLabels& train_view,
                        const std::vector<std::uint8_t>& train_mask, const TrainConfig& cfg,
                        std::uint64_t seed);

struct Phase1Report {
  EditReport edit;
  bool fallback = false;  // edit removed every edge; original graph kept
  double identity_residual = 0.0;
  // Ratios of the original and edited graphs under ground-truth labels,
  // available when every node has a label.
  std::optional<HomophilyRatios> truth_before;
  std::optional<HomophilyRatios> truth_after;
};

struct Phase1Result {
  Graph graph;
  Phase1Report report;
};

/// Fair edge removal under the effective labels; a skipped report when
/// the config does not edit.
Phase1Result run_phase1(const Graph& g, const NodeLabels& labels, const NodeLabels& truth,
                        const TrainConfig& cfg);

struct RunResult {
  std::uint64_t seed = 0;
  std::int64_t split_id = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch qualified
  MetricsReport test;
  MetricsReport val;
  Phase1Report phase1;
  ModelParams best_params;
  std::vector<std::int8_t> pseudo_labels;
  std::vector<double> pretrain_losses;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

/// Everything the training objective reads besides the forward pass.
/// `labels` is unknown outside the training mask; `effective` is 0/1 for
/// every node. Counterfactuals are held fixed within a step.
struct ObjectiveData {
  std::span<const std::int8_t> labels;
  std::span<const std::uint8_t> train_mask;
  std::span<const std::int8_t> effective;
  std::span<const std::uint8_t> sensitive;
  std::span<const Edge> positives;
  std::span<const Edge> negatives;
  const CounterfactualIndex* cf = nullptr;
};

struct Objective {
  Var total;
  LossParts parts;
};

/// pred + alpha inv + beta suf + omega sc + eta env on the tape; terms whose
/// effective weight is zero are not recorded.
Objective record_objective(GradTape& tape, const ForwardVars& fw, const TrainConfig& cfg,
                           const ObjectiveData& data);

/// Phase 2 from the given parameters on the edited graph.
RunResult train_full(const Graph& g, const Matrix& x, const NodeLabels& labels,
                     const NodeLabels& truth, const SplitMasks& masks, ModelParams params,
                     const TrainConfig& cfg, std::uint64_t seed);

/// Split, standardize, pretrain, edit, train for one seed.
RunResult run_experiment(const Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                         std::int64_t split_id);

/// Same split and standardized features run_experiment builds for `seed`.
struct PreparedData {
  SplitMasks masks;
  Matrix x;
};
PreparedData prepare(const Dataset& ds, const TrainConfig& cfg, std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct Aggregate {
  Summary bacc, auc, f1, delta_sp, delta_eo, score;
  std::size_t runs = 0;
};
Aggregate aggregate(const std::vector<RunResult>& runs);

std::string run_to_json(const RunResult& r, const TrainConfig& cfg, const std::string& dataset);
std::string aggregate_to_json(const Aggregate& a, const TrainConfig& cfg,
                              const std::string& dataset);

/// Value lists per hyper-parameter; the cartesian product is the grid.
struct GridSpec {
  std::vector<std::size_t> K{2, 5, 10};
  std::vector<std::size_t> K_prime{2, 5, 10};
  std::vector<double> alpha{0.2, 0.5, 0.9, 5, 10};
  std::vector<double> beta{0.5, 1};
  std::vector<double> gamma{0.02, 0.1, 1};
  std::vector<double> omega{0.03, 0.09, 0.3, 0.7, 1};
  std::vector<double> eta{0.06, 0.07, 0.08, 0.09, 0.1, 0.3, 0.8};

  std::vector<LossWeights> cells(double kappa) const;
  bool contains(const LossWeights& w) const;
};

struct GridCell {
  LossWeights weights;
  double mean_val_score = 0.0;
  std::vector<RunResult> runs;
};

/// Runs every cell over cfg.seeds and ranks cells by mean best validation
/// score (ties keep grid order). Worker count: FAIRGRAPH_THREADS, else the
/// hardware concurrency.
std::vector<GridCell> grid_search(const Dataset& ds, const TrainConfig& cfg, const GridSpec& grid);

std::size_t worker_threads();

}  // namespace fairgraph
