#include "fairgraph/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fairgraph/errors.hpp"

namespace fairgraph {

GradCheckResult grad_check(const LossFn& loss, const LossGradFn& gradient,
                           std::span<const Matrix> params, const GradCheckOptions& opt) {
  if (opt.eps < 1e-7 || opt.eps > 1e-4) throw InvalidArgument("grad_check eps must be in [1e-7, 1e-4]");
  std::vector<Matrix> work(params.begin(), params.end());
  const auto analytic = gradient(work);
  if (analytic.size() != work.size()) throw ShapeError("gradient count does not match params");

  auto eval = [&]() {
    const double v = loss(work);
    if (!std::isfinite(v)) throw NumericError("non-finite loss during gradient check");
    return v;
  };
  const double base = eval();

  GradCheckResult res;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t p = 0; p < work.size(); ++p) {
    if (!analytic[p].same_shape(work[p])) throw ShapeError("gradient shape mismatch");
    std::vector<std::size_t> coords(work[p].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      double& x = work[p].data()[c];
      const double saved = x;
      x = saved + opt.eps;
      const double up = eval();
      x = saved - opt.eps;
      const double down = eval();
      x = saved;

      const double forward = (up - base) / opt.eps;
      const double backward = (base - down) / opt.eps;
      const double scale = std::max({1.0, std::abs(forward), std::abs(backward)});
      if (std::abs(forward - backward) > opt.kink_tolerance * scale) {
        ++res.skipped_kinks;
        continue;
      }
      const double fd = (up - down) / (2.0 * opt.eps);
      const double g = analytic[p].data()[c];
      const double err = std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
      res.max_relative_error = std::max(res.max_relative_error, err);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace fairgraph
