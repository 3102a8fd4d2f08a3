#include "fairgraph/edit_theory.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "fairgraph/errors.hpp"

namespace fairgraph {

namespace {

int sign(std::int64_t x) { return (x > 0) - (x < 0); }

}  // namespace

RatioShift predict_ratio_shift(const EdgeCensus& census, std::int64_t k) {
  if (k < 0) throw InvalidArgument("negative deletion count");
  if (k >= census.m) {
    throw DivisionByZeroError("deleting k >= m edges leaves the ratios undefined");
  }
  if (k > census.count(EdgeType::III)) {
    throw InfeasibleError("only " + std::to_string(census.count(EdgeType::III)) +
                          " Type III edges available");
  }
  const double m = static_cast<double>(census.m);
  const double denom = m * static_cast<double>(census.m - k);
  return {static_cast<double>(census.same_class * k) / denom,
          static_cast<double>(k * (census.same_sensitive - census.m)) / denom};
}

EffectSigns single_edge_effect(const EdgeCensus& census, EdgeType t) {
  if (census.m < 2) throw InvalidArgument("single-edge effect needs m >= 2");
  if (census.count(t) < 1) {
    throw InvalidArgument(std::string("census has no Type ") + to_string(t) + " edge");
  }
  const std::int64_t nc = census.same_class;
  const std::int64_t ns = census.same_sensitive;
  const std::int64_t m = census.m;
  switch (t) {
    case EdgeType::I: return {sign(nc - m), sign(ns - m)};
    case EdgeType::II: return {sign(nc - m), sign(ns)};
    case EdgeType::III: return {sign(nc), sign(ns - m)};
    case EdgeType::IV: return {sign(nc), sign(ns)};
  }
  return {};
}

MinimalDeletions minimal_deletions(const EdgeCensus& census, double tau_c, double tau_s) {
  const double hr_c = census.hr_c();
  const double hr_s = census.hr_s();
  if (!(tau_c > hr_c && tau_c <= 1.0)) {
    throw InvalidTargetError("tau_c must lie in (hr_c, 1]");
  }
  if (!(tau_s >= 0.0 && tau_s < hr_s)) {
    throw InvalidTargetError("tau_s must lie in [0, hr_s)");
  }
  MinimalDeletions out;
  const std::int64_t m3 = census.count(EdgeType::III);
  // k = m would empty the graph; the ratios are undefined there.
  const std::int64_t last = std::min(m3, census.m - 1);
  for (std::int64_t k = 0; k <= last; ++k) {
    const double rest = static_cast<double>(census.m - k);
    if (!out.k_c && static_cast<double>(census.same_class) / rest >= tau_c) out.k_c = k;
    if (!out.k_s && static_cast<double>(census.same_sensitive - k) / rest <= tau_s) out.k_s = k;
    if (out.k_c && out.k_s) break;
  }
  if (out.k_c && out.k_s) {
    out.feasible = true;
    out.k_star = std::max(*out.k_c, *out.k_s);
  }
  return out;
}

namespace oracle {

namespace {

struct EdgeMasks {
  std::uint32_t same_class = 0;
  std::uint32_t same_sensitive = 0;
  std::uint32_t type3 = 0;
  std::size_t m = 0;
};

EdgeMasks masks_of(const Graph& g, const NodeLabels& labels) {
  if (g.num_edges() > kMaxEnumerationEdges) {
    throw ResourceLimitError("exhaustive enumeration limited to " +
                             std::to_string(kMaxEnumerationEdges) + " edges");
  }
  EdgeMasks mk;
  mk.m = g.num_edges();
  auto edges = g.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const int yu = labels.effective_label(edges[i].u);
    const int yv = labels.effective_label(edges[i].v);
    const int su = labels.sensitive[edges[i].u];
    const int sv = labels.sensitive[edges[i].v];
    if (yu == yv) mk.same_class |= 1u << i;
    if (su == sv) mk.same_sensitive |= 1u << i;
    if (yu != yv && su == sv) mk.type3 |= 1u << i;
  }
  return mk;
}

// Ratios of the graph left after deleting the edges in `removed`.
std::pair<double, double> ratios_after(const EdgeMasks& mk, std::uint32_t removed) {
  const std::uint32_t all = mk.m == 32 ? ~0u : ((1u << mk.m) - 1u);
  const std::uint32_t kept = all & ~removed;
  const double rest = static_cast<double>(std::popcount(kept));
  return {std::popcount(mk.same_class & kept) / rest,
          std::popcount(mk.same_sensitive & kept) / rest};
}

template <typename Fn>
void for_each_subset_of_size(std::size_t m, std::size_t k, Fn&& fn) {
  if (k > m) return;
  if (k == 0) {
    fn(0u);
    return;
  }
  // Gosper's hack over m-bit words.
  std::uint32_t s = (1u << k) - 1u;
  const std::uint64_t limit = 1ull << m;
  while (s < limit) {
    fn(s);
    const std::uint32_t c = s & -s;
    const std::uint32_t r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
}

}  // namespace

DeletionSetSummary best_deletion_sets(const Graph& g, const NodeLabels& labels, std::size_t k) {
  const EdgeMasks mk = masks_of(g, labels);
  if (k >= mk.m) throw InvalidArgument("k must be smaller than the edge count");
  DeletionSetSummary out;
  out.k = k;
  out.max_hr_c = -std::numeric_limits<double>::infinity();
  out.min_hr_s = std::numeric_limits<double>::infinity();
  std::vector<std::tuple<std::uint32_t, double, double>> all;
  for_each_subset_of_size(mk.m, k, [&](std::uint32_t s) {
    auto [hc, hs] = ratios_after(mk, s);
    all.emplace_back(s, hc, hs);
    out.max_hr_c = std::max(out.max_hr_c, hc);
    out.min_hr_s = std::min(out.min_hr_s, hs);
  });
  out.subsets = all.size();

  const std::int64_t m3 = std::popcount(mk.type3);
  std::optional<std::pair<double, double>> predicted;
  if (static_cast<std::int64_t>(k) <= m3) {
    EdgeCensus c;
    c.m = static_cast<std::int64_t>(mk.m);
    c.same_class = std::popcount(mk.same_class);
    c.same_sensitive = std::popcount(mk.same_sensitive);
    c.by_type[static_cast<int>(EdgeType::III)] = m3;
    auto shift = predict_ratio_shift(c, static_cast<std::int64_t>(k));
    predicted = {static_cast<double>(c.same_class) / c.m + shift.d_hr_c,
                 static_cast<double>(c.same_sensitive) / c.m + shift.d_hr_s};
  }

  out.joint_optimum_uses_only_type3 = true;
  for (const auto& [s, hc, hs] : all) {
    const bool only3 = (s & ~mk.type3) == 0;
    if (hc == out.max_hr_c && hs == out.min_hr_s) {
      out.joint_optimum_exists = true;
      if (!only3) out.joint_optimum_uses_only_type3 = false;
    }
    if (predicted) {
      const double rc = std::abs(hc - predicted->first);
      const double rs = std::abs(hs - predicted->second);
      if (rc <= 1e-12 && rs <= 1e-12) out.matches_prediction = true;
      if (only3) {
        out.max_type3_residual = std::max({out.max_type3_residual, rc, rs});
        if (rc > 1e-12 || rs > 1e-12) out.all_type3_subsets_match = false;
      }
    }
  }
  if (!out.joint_optimum_exists) out.joint_optimum_uses_only_type3 = false;
  return out;
}

std::optional<std::size_t> minimal_deletions_bruteforce(const Graph& g, const NodeLabels& labels,
                                                        double tau_c, double tau_s,
                                                        std::size_t max_k) {
  const EdgeMasks mk = masks_of(g, labels);
  const std::size_t last = std::min(max_k, mk.m == 0 ? 0 : mk.m - 1);
  for (std::size_t k = 0; k <= last; ++k) {
    bool hit = false;
    for_each_subset_of_size(mk.m, k, [&](std::uint32_t s) {
      if (hit) return;
      auto [hc, hs] = ratios_after(mk, s);
      if (hc >= tau_c && hs <= tau_s) hit = true;
    });
    if (hit) return k;
  }
  return std::nullopt;
}

}  // namespace oracle

}  // namespace fairgraph
