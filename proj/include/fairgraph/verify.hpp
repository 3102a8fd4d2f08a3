#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "fairgraph/graph.hpp"

// Randomized property suites for the edge-deletion identities. Shared by
// the `verify` command and the acceptance tests.
namespace fairgraph::verify {

struct LabeledGraph {
  Graph graph;
  NodeLabels labels;
};

/// Random simple graph with n in [2, max_nodes] and at most max_edges
/// edges, with uniformly random binary labels and sensitive attributes.
LabeledGraph random_labeled_graph(std::mt19937_64& rng, std::size_t max_nodes,
                                  std::size_t max_edges);

struct SuiteReport {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_residual = 0.0;
  double seconds = 0.0;
  std::optional<std::string> counterexample;  // JSON of the first failure

  bool passed() const { return failures == 0; }
};

struct SuiteOptions {
  std::size_t graphs = 100;
  std::uint64_t seed = 0;
  // Fault injection for self-testing: the edit keeps one Type III edge.
  bool inject_fault = false;
};

/// Random Type III subsets and the full edit: recounted ratio shifts equal
/// the closed forms within 1e-12, no Type III edge survives the full edit,
/// and the edit never lowers hr_c nor raises hr_s.
SuiteReport identity_suite(const SuiteOptions& opt, std::size_t max_nodes = 30,
                           std::size_t max_edges = 60);

/// Every single-edge deletion reproduces the sign table; only Type III
/// ever achieves (d_hr_c > 0, d_hr_s < 0).
SuiteReport single_edge_suite(const SuiteOptions& opt, std::size_t max_nodes = 10,
                              std::size_t max_edges = 16);

/// minimal_deletions agrees with exhaustive subset search on feasible
/// random instances.
SuiteReport minimal_deletion_suite(const SuiteOptions& opt, std::size_t max_nodes = 10,
                                   std::size_t max_edges = 12);

/// k-subset enumeration: the joint optimum only uses Type III edges when
/// enough exist, and every all-Type-III subset matches the prediction.
SuiteReport enumeration_suite(const SuiteOptions& opt, std::size_t max_nodes = 10,
                              std::size_t max_edges = 12);

std::string to_json(const SuiteReport& r);

}  // namespace fairgraph::verify
