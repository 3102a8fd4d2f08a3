#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairgraph {

// All rates are reported as percentages. Every function throws
// UndefinedMetricError when its denominator would be empty, and
// InvalidArgument on length mismatch or values outside {0, 1}.

/// |P(yhat=1 | s=0) - P(yhat=1 | s=1)| * 100.
double stat_parity(std::span<const std::int8_t> pred, std::span<const std::uint8_t> sensitive);
/// |P(yhat=1 | y=1, s=0) - P(yhat=1 | y=1, s=1)| * 100.
double equal_opportunity(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels,
                         std::span<const std::uint8_t> sensitive);
/// (TPR + TNR) / 2 * 100.
double balanced_accuracy(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels);
/// Mann-Whitney statistic with average ranks for ties, * 100.
double roc_auc(std::span<const double> probs, std::span<const std::int8_t> labels);
/// F1 of class 1, * 100. Zero when there are no true positives but some
/// positive labels or predictions; undefined when both are absent.
double f1_score(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels);

/// bacc + ((100 - delta_eo) + (100 - delta_sp)) / 2.
double selection_score(double bacc, double delta_sp, double delta_eo);

struct MetricsReport {
  double bacc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double delta_sp = 0.0;
  double delta_eo = 0.0;
  double score = 0.0;
  // cells[s][y][yhat]
  std::array<std::array<std::array<std::int64_t, 2>, 2>, 2> cells{};
  std::uint64_t seed = 0;
  std::int64_t split_id = 0;
};

/// Evaluates every metric on the nodes selected by `mask`; hard predictions
/// threshold the probabilities at 0.5 with ties going to class 1.
MetricsReport evaluate(std::span<const double> probs, std::span<const std::int8_t> labels,
                       std::span<const std::uint8_t> sensitive,
                       std::span<const std::uint8_t> mask);

std::string to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace fairgraph
