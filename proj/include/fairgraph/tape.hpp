#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fairgraph/matrix.hpp"

namespace fairgraph {

class GradTape;

/// Handle to a value recorded on a GradTape.
struct Var {
  const GradTape* tape = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode tape over Matrix-valued primitives.
///
/// Every operation stores its forward value and a closure computing the
/// vector-Jacobian product for each input. grad() walks the tape once in
/// reverse recording order, so accumulation order is fixed and the result
/// is deterministic.
class GradTape {
 public:
  // Receives the upstream gradient (same shape as the node value) and one
  // output slot per input, pre-sized and zeroed, to accumulate into.
  using Backward = std::function<void(const Matrix& upstream, std::span<Matrix> input_grads)>;

  GradTape() = default;
  // Recorded closures refer back to the tape.
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var variable(Matrix value);  // differentiable leaf
  Var constant(Matrix value);  // leaf without gradient

  /// Records a custom node. `backward` may be empty for nodes that stop
  /// gradients.
  Var record(std::vector<Var> inputs, Matrix value, Backward backward);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row_bias(Var a, Var bias);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var neighbor_mean(const Graph& g, Var x);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var scale(Var a, double factor);
  Var sum(Var a);          // 1x1
  Var sum_squares(Var a);  // 1x1
  /// sum_k weights[k] * terms[k] for 1x1 terms.
  Var weighted_sum(std::span<const double> weights, std::span<const Var> terms);

  /// Gradient of the 1x1 node `output` with respect to each of `wrt`.
  /// Throws TapeError if `output` is not a scalar or a handle belongs to
  /// another tape.
  std::vector<Matrix> grad(Var output, std::span<const Var> wrt) const;

 private:
  struct Node {
    Matrix value;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool requires_grad = false;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace fairgraph
