#include "fairgraph/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "fairgraph/edit_theory.hpp"
#include "fairgraph/errors.hpp"

namespace fairgraph::verify {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

json graph_json(const LabeledGraph& lg) {
  json edges = json::array();
  for (const auto& e : lg.graph.edges()) edges.push_back({e.u, e.v});
  return {{"n", lg.graph.num_nodes()},
          {"edges", edges},
          {"y", lg.labels.class_label},
          {"s", lg.labels.sensitive}};
}

json census_json(const EdgeCensus& c) {
  return {{"m", c.m}, {"N_c", c.same_class}, {"N_s", c.same_sensitive}, {"types", c.by_type}};
}

void record_failure(SuiteReport& r, json detail) {
  ++r.failures;
  if (!r.counterexample) r.counterexample = detail.dump();
}

int exact_sign_of_difference(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  // sign(a/b - c/d) for positive b, d
  const std::int64_t x = a * d - c * b;
  return (x > 0) - (x < 0);
}

std::vector<std::size_t> type3_positions(const LabeledGraph& lg) {
  std::vector<std::size_t> pos;
  auto edges = lg.graph.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (classify_edge(lg.labels.effective_label(e.u), lg.labels.effective_label(e.v),
                      lg.labels.sensitive[e.u], lg.labels.sensitive[e.v]) == EdgeType::III) {
      pos.push_back(i);
    }
  }
  return pos;
}

}  // namespace

LabeledGraph random_labeled_graph(std::mt19937_64& rng, std::size_t max_nodes,
                                  std::size_t max_edges) {
  const std::size_t n = uniform_index(rng, 2, std::max<std::size_t>(2, max_nodes));
  std::vector<Edge> pairs;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) pairs.push_back({u, v});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const std::size_t m = uniform_index(rng, 1, std::min(max_edges, pairs.size()));
  pairs.resize(m);
  std::vector<std::int8_t> y(n);
  std::vector<std::uint8_t> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::int8_t>(rng() & 1u);
    s[i] = static_cast<std::uint8_t>(rng() & 1u);
  }
  return {Graph(n, std::move(pairs)), NodeLabels(std::move(y), std::move(s))};
}

SuiteReport identity_suite(const SuiteOptions& opt, std::size_t max_nodes, std::size_t max_edges) {
  Stopwatch clock;
  SuiteReport r;
  r.name = "removal-identities";
  std::mt19937_64 rng(opt.seed);
  for (std::size_t gi = 0; gi < opt.graphs; ++gi) {
    auto lg = random_labeled_graph(rng, max_nodes, max_edges);
    const auto census = edge_census(lg.graph, lg.labels);
    auto t3 = type3_positions(lg);
    ++r.cases;

    // Random subset of Type III edges.
    if (census.m >= 2) {
      std::shuffle(t3.begin(), t3.end(), rng);
      const std::size_t kmax = std::min<std::size_t>(t3.size(), census.m - 1);
      const std::size_t k = uniform_index(rng, 0, kmax);
      std::vector<std::size_t> subset(t3.begin(), t3.begin() + static_cast<std::ptrdiff_t>(k));
      const auto before = homophily_ratios(lg.graph, lg.labels);
      const auto after = homophily_ratios(lg.graph.without_edges(subset), lg.labels);
      const auto predicted = predict_ratio_shift(census, static_cast<std::int64_t>(k));
      const double rc = std::abs((after.hr_c - before.hr_c) - predicted.d_hr_c);
      const double rs = std::abs((after.hr_s - before.hr_s) - predicted.d_hr_s);
      r.max_residual = std::max({r.max_residual, rc, rs});
      if (rc > 1e-12 || rs > 1e-12) {
        record_failure(r, {{"check", "subset shift identity"}, {"graph", graph_json(lg)},
                           {"removed_positions", subset}, {"residual_c", rc}, {"residual_s", rs}});
        continue;
      }
    }

    // Full edit (or the faulty variant that keeps one Type III edge).
    const auto m3 = static_cast<std::size_t>(census.count(EdgeType::III));
    std::optional<std::size_t> budget;
    if (opt.inject_fault && m3 > 0) budget = m3 - 1;
    EditResult edit;
    try {
      edit = fair_edge_remove(lg.graph, lg.labels, budget);
    } catch (const DegenerateEditError&) {
      if (census.count(EdgeType::III) != census.m) {
        record_failure(r, {{"check", "unexpected degenerate edit"}, {"graph", graph_json(lg)}});
      }
      continue;
    }
    const auto recount = edge_census(edit.graph, lg.labels);
    const auto k = static_cast<std::int64_t>(edit.report.removed_edges.size());
    json detail = {{"graph", graph_json(lg)},
                   {"census_before", census_json(census)},
                   {"census_after", census_json(recount)},
                   {"removed", k}};
    if (recount.count(EdgeType::III) != 0 || k != census.count(EdgeType::III)) {
      detail["check"] = "edit leaves no Type III edge";
      record_failure(r, detail);
      continue;
    }
    if (!(recount == edit.report.census_after)) {
      detail["check"] = "reported census matches recount";
      record_failure(r, detail);
      continue;
    }
    const auto predicted = predict_ratio_shift(census, k);
    const double rc = std::abs((recount.hr_c() - census.hr_c()) - predicted.d_hr_c);
    const double rs = std::abs((recount.hr_s() - census.hr_s()) - predicted.d_hr_s);
    r.max_residual = std::max({r.max_residual, rc, rs});
    if (rc > 1e-12 || rs > 1e-12 || recount.hr_c() < census.hr_c() ||
        recount.hr_s() > census.hr_s()) {
      detail["check"] = "full edit identity and monotonicity";
      detail["residual_c"] = rc;
      detail["residual_s"] = rs;
      record_failure(r, detail);
    }
  }
  r.seconds = clock.seconds();
  return r;
}

SuiteReport single_edge_suite(const SuiteOptions& opt, std::size_t max_nodes,
                              std::size_t max_edges) {
  Stopwatch clock;
  SuiteReport r;
  r.name = "single-edge-signs";
  std::mt19937_64 rng(opt.seed ^ 0x5157'0002ull);
  for (std::size_t gi = 0; gi < opt.graphs; ++gi) {
    LabeledGraph lg;
    do {
      lg = random_labeled_graph(rng, max_nodes, max_edges);
    } while (lg.graph.num_edges() < 2);
    ++r.cases;
    const auto census = edge_census(lg.graph, lg.labels);
    auto edges = lg.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      const EdgeType t = classify_edge(lg.labels.effective_label(e.u),
                                       lg.labels.effective_label(e.v),
                                       lg.labels.sensitive[e.u], lg.labels.sensitive[e.v]);
      const std::size_t pos[] = {i};
      const auto after = edge_census(lg.graph.without_edges(pos), lg.labels);
      const int dc = exact_sign_of_difference(after.same_class, after.m, census.same_class, census.m);
      const int ds = exact_sign_of_difference(after.same_sensitive, after.m,
                                              census.same_sensitive, census.m);
      const auto predicted = single_edge_effect(census, t);
      json detail = {{"graph", graph_json(lg)}, {"edge", {e.u, e.v}},
                     {"type", to_string(t)}, {"observed", {dc, ds}},
                     {"predicted", {predicted.hr_c, predicted.hr_s}}};
      if (dc != predicted.hr_c || ds != predicted.hr_s) {
        detail["check"] = "sign table";
        record_failure(r, detail);
        break;
      }
      const bool both = dc > 0 && ds < 0;
      if (t != EdgeType::III && both) {
        detail["check"] = "only Type III raises hr_c while lowering hr_s";
        record_failure(r, detail);
        break;
      }
      if (t == EdgeType::III && census.same_class > 0 && census.same_sensitive < census.m && !both) {
        detail["check"] = "Type III raises hr_c and lowers hr_s";
        record_failure(r, detail);
        break;
      }
    }
  }
  r.seconds = clock.seconds();
  return r;
}

SuiteReport minimal_deletion_suite(const SuiteOptions& opt, std::size_t max_nodes,
                                   std::size_t max_edges) {
  Stopwatch clock;
  SuiteReport r;
  r.name = "minimal-deletions";
  std::mt19937_64 rng(opt.seed ^ 0x5157'0003ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t attempts = 0;
  while (r.cases < opt.graphs && attempts < 200 * std::max<std::size_t>(opt.graphs, 1)) {
    ++attempts;
    auto lg = random_labeled_graph(rng, max_nodes, max_edges);
    const auto census = edge_census(lg.graph, lg.labels);
    if (census.same_class == census.m || census.same_sensitive == 0) continue;
    const double hr_c = census.hr_c();
    const double hr_s = census.hr_s();
    double tau_c = hr_c + (1.0 - hr_c) * unit(rng);
    const double tau_s = hr_s * unit(rng);
    if (tau_c <= hr_c) tau_c = 1.0;
    const auto md = minimal_deletions(census, tau_c, tau_s);
    const auto brute = oracle::minimal_deletions_bruteforce(lg.graph, lg.labels, tau_c, tau_s,
                                                            lg.graph.num_edges());
    json detail = {{"graph", graph_json(lg)}, {"tau_c", tau_c}, {"tau_s", tau_s},
                   {"feasible", md.feasible}, {"k_star", md.k_star},
                   {"bruteforce", brute ? json(*brute) : json(nullptr)}};
    if (!md.feasible) {
      // Infeasible for Type III deletions: brute force must need more than
      // M_III deletions (or none reach the targets).
      if (brute && static_cast<std::int64_t>(*brute) <= census.count(EdgeType::III)) {
        detail["check"] = "infeasible but brute force succeeds within M_III";
        record_failure(r, detail);
      }
      continue;
    }
    ++r.cases;
    if (!brute || static_cast<std::int64_t>(*brute) != md.k_star) {
      detail["check"] = "k_star equals exhaustive minimum";
      record_failure(r, detail);
    }
  }
  if (r.cases < opt.graphs) {
    ++r.failures;
    if (!r.counterexample) r.counterexample = json{{"check", "too few feasible instances"}}.dump();
  }
  r.seconds = clock.seconds();
  return r;
}

SuiteReport enumeration_suite(const SuiteOptions& opt, std::size_t max_nodes,
                              std::size_t max_edges) {
  Stopwatch clock;
  SuiteReport r;
  r.name = "deletion-set-enumeration";
  std::mt19937_64 rng(opt.seed ^ 0x5157'0004ull);
  for (std::size_t gi = 0; gi < opt.graphs; ++gi) {
    LabeledGraph lg;
    do {
      lg = random_labeled_graph(rng, max_nodes, max_edges);
    } while (lg.graph.num_edges() < 2);
    ++r.cases;
    const auto census = edge_census(lg.graph, lg.labels);
    const auto kmax = std::min<std::int64_t>(census.count(EdgeType::III), census.m - 1);
    for (std::int64_t k = 0; k <= kmax; ++k) {
      const auto s = oracle::best_deletion_sets(lg.graph, lg.labels, static_cast<std::size_t>(k));
      r.max_residual = std::max(r.max_residual, s.max_type3_residual);
      const bool unchanged = k != 0 || (s.max_hr_c == census.hr_c() && s.min_hr_s == census.hr_s());
      if (!s.joint_optimum_uses_only_type3 || !s.matches_prediction ||
          !s.all_type3_subsets_match || !unchanged) {
        record_failure(r, {{"check", "enumeration optimum"}, {"graph", graph_json(lg)}, {"k", k}});
        break;
      }
    }
  }
  r.seconds = clock.seconds();
  return r;
}

std::string to_json(const SuiteReport& r) {
  json j = {{"suite", r.name},
            {"cases", r.cases},
            {"failures", r.failures},
            {"passed", r.passed()},
            {"max_residual", r.max_residual},
            {"seconds", r.seconds}};
  j["counterexample"] = r.counterexample ? json::parse(*r.counterexample) : json(nullptr);
  return j.dump();
}

}  // namespace fairgraph::verify
