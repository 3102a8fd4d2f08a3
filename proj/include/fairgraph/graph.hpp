#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fairgraph {

using NodeId = std::uint32_t;

// Unordered pair stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph: an edge list plus a CSR adjacency index.
///
/// The constructor rejects self-loops, duplicate pairs (in either
/// orientation) and out-of-range endpoints. Neighbor lists are sorted.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t num_nodes, std::vector<Edge> edges);

  /// Builds a graph from raw pairs, silently dropping self-loops and
  /// repeated pairs. `dropped`, when given, receives how many were dropped.
  static Graph from_pairs(std::size_t num_nodes,
                          std::span<const std::pair<NodeId, NodeId>> pairs,
                          std::size_t* dropped = nullptr);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const { return neighbors(v).size(); }
  bool has_edge(NodeId a, NodeId b) const;

  /// Copy of this graph without the edges at the given positions of edges().
  Graph without_edges(std::span<const std::size_t> positions) const;

  /// Relabels nodes: node v becomes perm[v].
  Graph permuted(std::span<const NodeId> perm) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

inline constexpr std::int8_t kUnknownLabel = -1;

/// Per-node class, sensitive and pseudo labels.
struct NodeLabels {
  std::vector<std::int8_t> class_label;   // 0, 1 or kUnknownLabel
  std::vector<std::uint8_t> sensitive;    // 0 or 1, always defined
  std::vector<std::int8_t> pseudo_label;  // 0, 1 or kUnknownLabel

  NodeLabels() = default;
  /// Ground-truth labels only; pseudo labels all unknown.
  NodeLabels(std::vector<std::int8_t> labels, std::vector<std::uint8_t> sens);

  std::size_t size() const { return sensitive.size(); }
  /// class_label where known, else pseudo_label. Throws if both unknown.
  int effective_label(NodeId v) const;
  /// Throws InvalidArgument on length mismatch or out-of-domain values.
  void validate() const;
};

enum class EdgeType : std::uint8_t { I = 0, II = 1, III = 2, IV = 3 };

const char* to_string(EdgeType t);

/// I: same label, same sensitive. II: same label, different sensitive.
/// III: different label, same sensitive. IV: both differ.
EdgeType classify_edge(int y_u, int y_v, int s_u, int s_v);

/// Exact integer census of a labeled edge set.
struct EdgeCensus {
  std::int64_t m = 0;
  std::int64_t same_class = 0;      // N_c
  std::int64_t same_sensitive = 0;  // N_s
  std::array<std::int64_t, 4> by_type{};

  std::int64_t count(EdgeType t) const { return by_type[static_cast<int>(t)]; }
  double hr_c() const;
  double hr_s() const;

  /// Builds a census from per-type counts.
  static EdgeCensus from_types(std::int64_t t1, std::int64_t t2, std::int64_t t3,
                               std::int64_t t4);

  friend bool operator==(const EdgeCensus&, const EdgeCensus&) = default;
};

EdgeCensus edge_census(const Graph& g, const NodeLabels& labels);

struct HomophilyRatios {
  double hr_c = 0.0;
  double hr_s = 0.0;
};

/// Edge-homophily ratios over undirected edges. Throws UndefinedRatioError
/// when the graph has no edges.
HomophilyRatios homophily_ratios(const Graph& g, const NodeLabels& labels);

struct EditReport {
  bool skipped = false;
  std::vector<Edge> removed_edges;
  EdgeCensus census_before;
  EdgeCensus census_after;
  double hr_c_before = 0.0;
  double hr_c_after = 0.0;
  double hr_s_before = 0.0;
  double hr_s_after = 0.0;
};

struct EditResult {
  Graph graph;
  EditReport report;
};

/// Removes every Type III edge under the effective labels, in one pass.
/// With `budget`, removes only the first `budget` Type III edges in edge
/// order. Throws DegenerateEditError when no edge survives.
EditResult fair_edge_remove(const Graph& g, const NodeLabels& labels,
                            std::optional<std::size_t> budget = std::nullopt);

/// Reads "u v" or "u,v" per line (zero-based ids); '#' starts a comment.
/// Duplicate, reversed and self-loop pairs are dropped and counted.
struct EdgeListLoad {
  Graph graph;
  std::size_t dropped = 0;
};
EdgeListLoad read_edge_list(std::istream& in, std::size_t num_nodes);
EdgeListLoad read_edge_list_file(const std::string& path, std::size_t num_nodes);
void write_edge_list(std::ostream& out, const Graph& g);
void write_edge_list_file(const std::string& path, const Graph& g);

}  // namespace fairgraph
