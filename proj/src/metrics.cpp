#include "fairgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "fairgraph/errors.hpp"
#include "fairgraph/model.hpp"

namespace fairgraph {

using nlohmann::json;

namespace {

void check_binary(std::span<const std::int8_t> v, const char* what) {
  for (auto x : v) {
    if (x != 0 && x != 1) throw InvalidArgument(std::string(what) + " must be 0 or 1");
  }
}

void check_binary(std::span<const std::uint8_t> v, const char* what) {
  for (auto x : v) {
    if (x > 1) throw InvalidArgument(std::string(what) + " must be 0 or 1");
  }
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidArgument("metric inputs differ in length");
}

double rate(std::int64_t hits, std::int64_t total, const char* what) {
  if (total == 0) throw UndefinedMetricError(what);
  return static_cast<double>(hits) / static_cast<double>(total);
}

template <class T>
std::vector<T> masked(std::span<const T> v, std::span<const std::uint8_t> mask) {
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask[i]) out.push_back(v[i]);
  }
  return out;
}

}  // namespace

double stat_parity(std::span<const std::int8_t> pred, std::span<const std::uint8_t> sensitive) {
  check_sizes(pred.size(), sensitive.size());
  check_binary(pred, "prediction");
  check_binary(sensitive, "sensitive attribute");
  std::int64_t pos[2] = {0, 0}, tot[2] = {0, 0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++tot[sensitive[i]];
    pos[sensitive[i]] += pred[i];
  }
  const double r0 = rate(pos[0], tot[0], "statistical parity: empty sensitive group");
  const double r1 = rate(pos[1], tot[1], "statistical parity: empty sensitive group");
  return std::abs(r0 - r1) * 100.0;
}

double equal_opportunity(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels,
                         std::span<const std::uint8_t> sensitive) {
  check_sizes(pred.size(), labels.size());
  check_sizes(pred.size(), sensitive.size());
  check_binary(pred, "prediction");
  check_binary(labels, "label");
  check_binary(sensitive, "sensitive attribute");
  std::int64_t tp[2] = {0, 0}, p[2] = {0, 0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (labels[i] != 1) continue;
    ++p[sensitive[i]];
    tp[sensitive[i]] += pred[i];
  }
  const double r0 = rate(tp[0], p[0], "equal opportunity: a group has no positives");
  const double r1 = rate(tp[1], p[1], "equal opportunity: a group has no positives");
  return std::abs(r0 - r1) * 100.0;
}

double balanced_accuracy(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels) {
  check_sizes(pred.size(), labels.size());
  check_binary(pred, "prediction");
  check_binary(labels, "label");
  std::int64_t hit[2] = {0, 0}, tot[2] = {0, 0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++tot[labels[i]];
    hit[labels[i]] += pred[i] == labels[i];
  }
  const double tnr = rate(hit[0], tot[0], "balanced accuracy: no negatives");
  const double tpr = rate(hit[1], tot[1], "balanced accuracy: no positives");
  return (tpr + tnr) / 2.0 * 100.0;
}

double roc_auc(std::span<const double> probs, std::span<const std::int8_t> labels) {
  check_sizes(probs.size(), labels.size());
  check_binary(labels, "label");
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs[a] < probs[b];
  });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && probs[order[j + 1]] == probs[order[i]]) ++j;
    // Ranks i+1 .. j+1 share their average.
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos_rank = 0.0;
  std::int64_t np = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      pos_rank += rank[i];
      ++np;
    }
  }
  const std::int64_t nn = static_cast<std::int64_t>(n) - np;
  if (np == 0 || nn == 0) throw UndefinedMetricError("AUC needs both classes");
  const double u = pos_rank - static_cast<double>(np) * static_cast<double>(np + 1) / 2.0;
  return u / (static_cast<double>(np) * static_cast<double>(nn)) * 100.0;
}

double f1_score(std::span<const std::int8_t> pred, std::span<const std::int8_t> labels) {
  check_sizes(pred.size(), labels.size());
  check_binary(pred, "prediction");
  check_binary(labels, "label");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] == 1 && labels[i] == 1;
    fp += pred[i] == 1 && labels[i] == 0;
    fn += pred[i] == 0 && labels[i] == 1;
  }
  if (tp + fp + fn == 0) throw UndefinedMetricError("F1: no positive labels or predictions");
  return 200.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double selection_score(double bacc, double delta_sp, double delta_eo) {
  return bacc + ((100.0 - delta_eo) + (100.0 - delta_sp)) / 2.0;
}

MetricsReport evaluate(std::span<const double> probs, std::span<const std::int8_t> labels,
                       std::span<const std::uint8_t> sensitive,
                       std::span<const std::uint8_t> mask) {
  check_sizes(probs.size(), labels.size());
  check_sizes(probs.size(), sensitive.size());
  check_sizes(probs.size(), mask.size());
  const auto p = masked(probs, mask);
  const auto y = masked(labels, mask);
  const auto s = masked(sensitive, mask);
  const auto yhat = hard_labels(p);
  MetricsReport r;
  r.bacc = balanced_accuracy(yhat, y);
  r.auc = roc_auc(p, y);
  r.f1 = f1_score(yhat, y);
  r.delta_sp = stat_parity(yhat, s);
  r.delta_eo = equal_opportunity(yhat, y, s);
  r.score = selection_score(r.bacc, r.delta_sp, r.delta_eo);
  for (std::size_t i = 0; i < y.size(); ++i) ++r.cells[s[i]][y[i]][yhat[i]];
  return r;
}

std::string to_json(const MetricsReport& r) {
  json j = {{"bacc", r.bacc},         {"auc", r.auc},   {"f1", r.f1},
            {"delta_sp", r.delta_sp}, {"delta_eo", r.delta_eo},
            {"score", r.score},       {"seed", r.seed}, {"split_id", r.split_id},
            {"cells", r.cells}};
  return j.dump();
}

MetricsReport metrics_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    MetricsReport r;
    r.bacc = j.at("bacc").get<double>();
    r.auc = j.at("auc").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.delta_sp = j.at("delta_sp").get<double>();
    r.delta_eo = j.at("delta_eo").get<double>();
    r.score = j.at("score").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.split_id = j.at("split_id").get<std::int64_t>();
    if (j.contains("cells")) j.at("cells").get_to(r.cells);
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
}

}  // namespace fairgraph
