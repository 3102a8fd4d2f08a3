#pragma once

#include <cstdint>
#include <optional>

#include "fairgraph/graph.hpp"

// Closed-form consequences of deleting edges from a labeled graph, plus the
// exhaustive-enumeration oracle the closed forms are tested against.
namespace fairgraph {

struct RatioShift {
  double d_hr_c = 0.0;
  double d_hr_s = 0.0;
};

/// Exact change of (hr_c, hr_s) after deleting k Type III edges:
///   d_hr_c = N_c k / (m (m - k)),  d_hr_s = k (N_s - m) / (m (m - k)).
/// Throws DivisionByZeroError if k >= m, InfeasibleError if k exceeds the
/// number of Type III edges.
RatioShift predict_ratio_shift(const EdgeCensus& census, std::int64_t k);

struct EffectSigns {
  int hr_c = 0;  // -1, 0, +1
  int hr_s = 0;
};

/// Sign of the change of each ratio when one edge of type `t` is deleted.
/// Derived from the integer numerators over the common denominator m(m-1):
///   type I:  (N_c - m, N_s - m)    type II: (N_c - m, N_s)
///   type III:(N_c,     N_s - m)    type IV: (N_c,     N_s)
EffectSigns single_edge_effect(const EdgeCensus& census, EdgeType t);

struct MinimalDeletions {
  bool feasible = false;
  std::optional<std::int64_t> k_c;  // smallest k reaching tau_c, if any <= M_III
  std::optional<std::int64_t> k_s;  // smallest k reaching tau_s, if any <= M_III
  std::int64_t k_star = 0;          // max(k_c, k_s) when feasible
};

/// Fewest Type III deletions with N_c/(m-k) >= tau_c and
/// (N_s-k)/(m-k) <= tau_s. Requires tau_c in (hr_c, 1] and tau_s in
/// [0, hr_s); otherwise throws InvalidTargetError.
MinimalDeletions minimal_deletions(const EdgeCensus& census, double tau_c, double tau_s);

namespace oracle {

inline constexpr std::size_t kMaxEnumerationEdges = 16;

struct DeletionSetSummary {
  std::size_t k = 0;
  std::uint64_t subsets = 0;
  double max_hr_c = 0.0;
  double min_hr_s = 0.0;
  // Some subset reaches both the max hr_c and the min hr_s at once.
  bool joint_optimum_exists = false;
  // Every subset reaching the joint optimum consists of Type III edges only.
  bool joint_optimum_uses_only_type3 = false;
  // Some subset reproduces the ratios predicted for k Type III deletions.
  bool matches_prediction = false;
  // Every all-Type-III subset reproduces the prediction to within 1e-12.
  bool all_type3_subsets_match = true;
  double max_type3_residual = 0.0;
};

/// Enumerates every k-subset of edges (m <= 16, else ResourceLimitError).
/// Ratios are recounted from scratch for each subset, independent of the
/// closed forms above.
DeletionSetSummary best_deletion_sets(const Graph& g, const NodeLabels& labels, std::size_t k);

/// Smallest k such that some k-subset of edges (any types) reaches both
/// targets, searched over k = 0..m-1. nullopt if none does.
std::optional<std::size_t> minimal_deletions_bruteforce(const Graph& g, const NodeLabels& labels,
                                                        double tau_c, double tau_s,
                                                        std::size_t max_k);

}  // namespace oracle

}  // namespace fairgraph
