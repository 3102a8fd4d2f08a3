#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fairgraph/graph.hpp"
#include "fairgraph/matrix.hpp"
#include "fairgraph/rng.hpp"

namespace testing {

using namespace fairgraph;

inline Graph graph_of(std::size_t n, std::vector<std::pair<NodeId, NodeId>> pairs) {
  return Graph::from_pairs(n, pairs);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double scale = 1.0) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * standard_normal(rng);
  return m;
}

// Small connected-ish graph with both labels and both groups present.
struct Toy {
  Graph graph;
  NodeLabels labels;
};

inline Toy random_toy(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId u = 0; u < n; ++u) {
    pairs.emplace_back(u, static_cast<NodeId>((u + 1) % n));
    for (NodeId v = u + 2; v < n; ++v) {
      if (uniform01(rng) < p) pairs.emplace_back(u, v);
    }
  }
  std::vector<std::int8_t> y(n);
  std::vector<std::uint8_t> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::int8_t>(i % 2);
    s[i] = static_cast<std::uint8_t>((i / 2) % 2);
  }
  return {Graph::from_pairs(n, pairs), NodeLabels(y, s)};
}

}  // namespace testing
