#include "fairgraph/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "fairgraph/errors.hpp"

namespace fairgraph {

namespace {

Edge normalized(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

}  // namespace

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  std::vector<std::size_t> deg(num_nodes_, 0);
  for (auto& e : edges_) {
    if (e.u == e.v) {
      throw InvalidArgument("self-loop at node " + std::to_string(e.u));
    }
    if (e.u >= num_nodes_ || e.v >= num_nodes_) {
      throw InvalidArgument("edge endpoint out of range: " + std::to_string(e.u) +
                            "-" + std::to_string(e.v));
    }
    e = normalized(e.u, e.v);
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(num_nodes_ + 1, 0);
  for (std::size_t v = 0; v < num_nodes_; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    adjacency_[cursor[e.v]++] = e.u;
  }
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    auto first = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]);
    auto last = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]);
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last) {
      throw InvalidArgument("duplicate edge at node " + std::to_string(v));
    }
  }
}

Graph Graph::from_pairs(std::size_t num_nodes,
                        std::span<const std::pair<NodeId, NodeId>> pairs,
                        std::size_t* dropped) {
  std::set<Edge> seen;
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  std::size_t skipped = 0;
  for (const auto& [a, b] : pairs) {
    if (a == b) {
      ++skipped;
      continue;
    }
    Edge e = normalized(a, b);
    if (!seen.insert(e).second) {
      ++skipped;
      continue;
    }
    edges.push_back(e);
  }
  if (dropped) *dropped = skipped;
  return Graph(num_nodes, std::move(edges));
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  if (v >= num_nodes_) throw InvalidArgument("node id out of range");
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  if (a >= num_nodes_ || b >= num_nodes_) return false;
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

Graph Graph::without_edges(std::span<const std::size_t> positions) const {
  std::vector<char> drop(edges_.size(), 0);
  for (std::size_t p : positions) {
    if (p >= edges_.size()) throw InvalidArgument("edge position out of range");
    drop[p] = 1;
  }
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!drop[i]) kept.push_back(edges_[i]);
  }
  return Graph(num_nodes_, std::move(kept));
}

Graph Graph::permuted(std::span<const NodeId> perm) const {
  if (perm.size() != num_nodes_) throw InvalidArgument("permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const auto& e : edges_) edges.push_back(normalized(perm[e.u], perm[e.v]));
  return Graph(num_nodes_, std::move(edges));
}

NodeLabels::NodeLabels(std::vector<std::int8_t> labels, std::vector<std::uint8_t> sens)
    : class_label(std::move(labels)),
      sensitive(std::move(sens)),
      pseudo_label(class_label.size(), kUnknownLabel) {
  validate();
}

int NodeLabels::effective_label(NodeId v) const {
  if (class_label[v] != kUnknownLabel) return class_label[v];
  if (pseudo_label[v] != kUnknownLabel) return pseudo_label[v];
  throw InvalidArgument("node " + std::to_string(v) + " has neither a label nor a pseudo-label");
}

void NodeLabels::validate() const {
  if (class_label.size() != sensitive.size() || pseudo_label.size() != sensitive.size()) {
    throw InvalidArgument("label vectors differ in length");
  }
  for (std::size_t i = 0; i < sensitive.size(); ++i) {
    if (sensitive[i] > 1) throw InvalidArgument("sensitive attribute must be binary");
    if (class_label[i] < -1 || class_label[i] > 1 || pseudo_label[i] < -1 ||
        pseudo_label[i] > 1) {
      throw InvalidArgument("class labels must be 0, 1 or unknown");
    }
  }
}

const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::I: return "I";
    case EdgeType::II: return "II";
    case EdgeType::III: return "III";
    case EdgeType::IV: return "IV";
  }
  return "?";
}

EdgeType classify_edge(int y_u, int y_v, int s_u, int s_v) {
  const bool same_y = y_u == y_v;
  const bool same_s = s_u == s_v;
  if (same_y) return same_s ? EdgeType::I : EdgeType::II;
  return same_s ? EdgeType::III : EdgeType::IV;
}

double EdgeCensus::hr_c() const {
  if (m == 0) throw UndefinedRatioError("homophily ratio undefined on an edgeless graph");
  return static_cast<double>(same_class) / static_cast<double>(m);
}

double EdgeCensus::hr_s() const {
  if (m == 0) throw UndefinedRatioError("homophily ratio undefined on an edgeless graph");
  return static_cast<double>(same_sensitive) / static_cast<double>(m);
}

EdgeCensus EdgeCensus::from_types(std::int64_t t1, std::int64_t t2, std::int64_t t3,
                                  std::int64_t t4) {
  EdgeCensus c;
  c.by_type = {t1, t2, t3, t4};
  c.m = t1 + t2 + t3 + t4;
  c.same_class = t1 + t2;
  c.same_sensitive = t1 + t3;
  return c;
}

EdgeCensus edge_census(const Graph& g, const NodeLabels& labels) {
  if (labels.size() != g.num_nodes()) throw InvalidArgument("labels do not match graph size");
  std::array<std::int64_t, 4> counts{};
  for (const auto& e : g.edges()) {
    auto t = classify_edge(labels.effective_label(e.u), labels.effective_label(e.v),
                           labels.sensitive[e.u], labels.sensitive[e.v]);
    ++counts[static_cast<int>(t)];
  }
  return EdgeCensus::from_types(counts[0], counts[1], counts[2], counts[3]);
}

HomophilyRatios homophily_ratios(const Graph& g, const NodeLabels& labels) {
  if (g.num_edges() == 0) {
    throw UndefinedRatioError("homophily ratio undefined on an edgeless graph");
  }
  auto c = edge_census(g, labels);
  return {c.hr_c(), c.hr_s()};
}

EditResult fair_edge_remove(const Graph& g, const NodeLabels& labels,
                            std::optional<std::size_t> budget) {
  if (labels.size() != g.num_nodes()) throw InvalidArgument("labels do not match graph size");
  EditReport report;
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  std::array<std::int64_t, 4> before{};
  std::size_t limit = budget.value_or(g.num_edges());
  for (const auto& e : g.edges()) {
    auto t = classify_edge(labels.effective_label(e.u), labels.effective_label(e.v),
                           labels.sensitive[e.u], labels.sensitive[e.v]);
    ++before[static_cast<int>(t)];
    if (t == EdgeType::III && report.removed_edges.size() < limit) {
      report.removed_edges.push_back(e);
    } else {
      kept.push_back(e);
    }
  }
  report.census_before = EdgeCensus::from_types(before[0], before[1], before[2], before[3]);
  if (report.census_before.m == 0) {
    throw UndefinedRatioError("cannot edit an edgeless graph");
  }
  if (kept.empty()) {
    throw DegenerateEditError("editing removed every edge (" +
                              std::to_string(report.removed_edges.size()) + " Type III edges)");
  }
  auto after = before;
  after[static_cast<int>(EdgeType::III)] -= static_cast<std::int64_t>(report.removed_edges.size());
  report.census_after = EdgeCensus::from_types(after[0], after[1], after[2], after[3]);
  report.hr_c_before = report.census_before.hr_c();
  report.hr_s_before = report.census_before.hr_s();
  report.hr_c_after = report.census_after.hr_c();
  report.hr_s_after = report.census_after.hr_s();
  return {Graph(g.num_nodes(), std::move(kept)), std::move(report)};
}

namespace {

bool parse_id(std::string_view tok, NodeId& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace

EdgeListLoad read_edge_list(std::istream& in, std::size_t num_nodes) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a)) continue;
    NodeId u = 0, v = 0;
    if (!(ls >> b) || (ls >> extra) || !parse_id(a, u) || !parse_id(b, v)) {
      throw ParseError("edge list line " + std::to_string(lineno) +
                       ": expected two non-negative integers");
    }
    if (u >= num_nodes || v >= num_nodes) {
      throw ParseError("edge list line " + std::to_string(lineno) + ": node id out of range");
    }
    pairs.emplace_back(u, v);
  }
  EdgeListLoad out;
  out.graph = Graph::from_pairs(num_nodes, pairs, &out.dropped);
  return out;
}

EdgeListLoad read_edge_list_file(const std::string& path, std::size_t num_nodes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list " + path);
  return read_edge_list(in, num_nodes);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

void write_edge_list_file(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write edge list " + path);
  write_edge_list(out, g);
}

}  // namespace fairgraph
