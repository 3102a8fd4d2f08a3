#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fairgraph/matrix.hpp"

namespace fairgraph {

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates probed per parameter matrix; all of them when the matrix is
  // smaller than this.
  std::size_t max_coords_per_param = 64;
  std::uint64_t seed = 0;
  // A coordinate is treated as sitting on a kink (ReLU, |.|, a change of
  // nearest neighbour, a clamp) and skipped when the forward and backward
  // one-sided slopes disagree by more than this, relative to their size.
  double kink_tolerance = 1e-3;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

using LossFn = std::function<double(std::span<const Matrix> params)>;
using LossGradFn = std::function<std::vector<Matrix>(std::span<const Matrix> params)>;

/// Compares the analytic gradient with central differences:
///   max |g - fd| / max(1, |g|, |fd|) over the sampled coordinates.
/// eps must lie in [1e-7, 1e-4]. Throws NumericError if a probe evaluates
/// to a non-finite loss.
GradCheckResult grad_check(const LossFn& loss, const LossGradFn& gradient,
                           std::span<const Matrix> params, const GradCheckOptions& opt = {});

}  // namespace fairgraph
