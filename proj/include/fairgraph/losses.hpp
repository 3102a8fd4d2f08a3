#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fairgraph/graph.hpp"
#include "fairgraph/matrix.hpp"
#include "fairgraph/tape.hpp"

namespace fairgraph {

struct LossWeights {
  double alpha = 0.0;  // invariance
  double beta = 0.0;   // sufficiency
  double gamma = 0.0;  // orthogonality inside the invariance loss
  double omega = 0.0;  // supervised contrastive
  double eta = 0.0;    // environmental
  std::size_t K = 1;        // counterfactuals per node
  std::size_t K_prime = 1;  // opposite-group neighbours for the environmental loss
  double kappa = 1.0;       // t-vMF concentration

  /// Throws InvalidArgument on negative weights, kappa < 0 or zero counts.
  void validate() const;
};

/// Per node, the K nearest nodes in H (squared L2, ties by node id) that
///   e_cf: share the label and differ in the sensitive attribute,
///   c_cf: differ in the label and share the sensitive attribute.
/// A node is never its own counterfactual. Lists are shorter than K only
/// when the candidate pool runs out.
struct CounterfactualIndex {
  std::vector<std::vector<NodeId>> e_cf;
  std::vector<std::vector<NodeId>> c_cf;
  std::vector<std::vector<double>> e_dist;  // L2 distances, parallel to e_cf
  std::vector<std::vector<double>> c_dist;
  std::size_t empty_e = 0;  // nodes with no e-type candidate
  std::size_t empty_c = 0;

  std::size_t size() const { return e_cf.size(); }
  std::size_t e_pairs() const;
  std::size_t c_pairs() const;
};

/// `labels` must be 0/1 for every node (pass effective labels).
CounterfactualIndex select_counterfactuals(const Matrix& h, std::span<const std::int8_t> labels,
                                           std::span<const std::uint8_t> sensitive,
                                           std::size_t K);

enum class DisMetric { Cosine, L2 };

struct InvStats {
  std::size_t zero_vectors = 0;  // cosine terms evaluated with a zero row
};

// Each loss comes in two forms: a plain evaluation on matrices, and a
// recorder that adds the loss as a 1x1 node on a tape so gradients reach
// whatever produced its inputs.

/// Mean BCE over masked nodes; probabilities clamped to [1e-12, 1 - 1e-12].
/// `probs` is n x 1. Throws EmptyInputError when the mask selects nothing.
double pred_loss(const Matrix& probs, std::span<const std::int8_t> labels,
                 std::span<const std::uint8_t> mask);
Var pred_loss(GradTape& tape, Var probs, std::span<const std::int8_t> labels,
              std::span<const std::uint8_t> mask);

/// sum dis(c_i, c_e) / #e-pairs + sum dis(e_i, e_c) / #c-pairs
///   + (gamma / n) sum_i |cos(c_i, e_i)|.
/// A family with no realized pair contributes nothing.
double inv_loss(const Matrix& c, const Matrix& e, const CounterfactualIndex& cf, double gamma,
                DisMetric metric, InvStats* stats = nullptr);
Var inv_loss(GradTape& tape, Var c, Var e, const CounterfactualIndex& cf, double gamma,
             DisMetric metric, InvStats* stats = nullptr);

/// Uniform sample without replacement of unordered non-adjacent pairs.
/// Throws CapacityError when fewer than `count` non-edges exist.
std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed);

/// BCE of sigmoid(h_i . h_j) against 1 on `pos` and 0 on `neg`, averaged
/// over all pairs. Throws EmptyInputError when either set is empty.
double suf_loss(const Matrix& h, std::span<const Edge> pos, std::span<const Edge> neg);
Var suf_loss(GradTape& tape, Var h, std::span<const Edge> pos, std::span<const Edge> neg);

/// t-vMF similarity (1 + cos) / (1 + kappa (1 - cos)) - 1.
double tvmf_from_cos(double cos, double kappa);
double tvmf(std::span<const double> a, std::span<const double> b, double kappa);

/// Supervised contrastive loss with t-vMF similarity. Anchors and the
/// candidate set are the masked nodes with a known label; P(i) are the
/// other anchors sharing i's label. Summed over anchors with nonempty P(i).
/// Throws EmptyInputError with fewer than two anchors or when every P(i)
/// is empty.
double sc_loss(const Matrix& c, std::span<const std::int8_t> labels,
               std::span<const std::uint8_t> mask, double kappa);
Var sc_loss(GradTape& tape, Var c, std::span<const std::int8_t> labels,
            std::span<const std::uint8_t> mask, double kappa);

/// -(1/n) sum_i mean_{j in NN_i} ||e_i - e_j||, NN_i the K' nearest rows of
/// the opposite sensitive group. Throws EmptyInputError if a group is empty.
double env_loss(const Matrix& e, std::span<const std::uint8_t> sensitive, std::size_t K_prime);
Var env_loss(GradTape& tape, Var e, std::span<const std::uint8_t> sensitive,
             std::size_t K_prime);

struct LossParts {
  double pred = 0.0;
  double inv = 0.0;
  double suf = 0.0;
  double sc = 0.0;
  double env = 0.0;
};

/// pred + alpha inv + beta suf + omega sc + eta env. Throws NumericError on
/// a non-finite part.
double total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace fairgraph
