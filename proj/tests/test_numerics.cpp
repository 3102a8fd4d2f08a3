#include <cmath>
#include <set>

#include "doctest.h"
#include "fairgraph/errors.hpp"
#include "fairgraph/gradcheck.hpp"
#include "fairgraph/matrix.hpp"
#include "fairgraph/rng.hpp"
#include "fairgraph/tape.hpp"
#include "helpers.hpp"

using namespace fairgraph;
using testing::random_matrix;

TEST_CASE("matmul and transposed variants agree") {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  const Matrix b{{1, 0, 2}, {0, 1, 1}};
  const auto ab = matmul(a, b);
  CHECK(ab == Matrix{{1, 2, 4}, {3, 4, 10}, {5, 6, 16}});
  CHECK(matmul_transpose_a(transpose(a), b) == ab);
  CHECK(matmul_transpose_b(a, transpose(b)) == ab);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("kernels reject non-finite input") {
  Matrix a{{1, NAN}};
  CHECK_THROWS_AS(relu(a), NumericError);
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("neighbour mean and normalization") {
  const auto g = testing::graph_of(3, {{0, 1}, {0, 2}});
  const Matrix x{{1, 1}, {2, 4}, {4, 8}};
  const auto m = row_mean_neighbors(g, x);
  CHECK(m == Matrix{{3, 6}, {1, 1}, {1, 1}});
  const Graph lonely(2, {});
  CHECK(row_mean_neighbors(lonely, Matrix{{1}, {2}}) == Matrix{{0}, {0}});
  const auto n = row_l2_normalize(Matrix{{3, 4}, {0, 0}});
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(1, 1) == 0.0);
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 0}) == 0.0);
}

TEST_CASE("stable exp and sigmoid at extremes") {
  const auto e = exp_stable(Matrix{{1000, 999}});
  CHECK(e(0, 0) == 1.0);
  CHECK(e(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
}

TEST_CASE("derived seeds are stable and independent per label") {
  CHECK(derive_seed(7, "split") == derive_seed(7, "split"));
  std::set<std::uint64_t> seen{derive_seed(7, "split"), derive_seed(7, "init"),
                               derive_seed(7, "split", 1), derive_seed(8, "split")};
  CHECK(seen.size() == 4);
  Rng a(derive_seed(1, "x")), b(derive_seed(1, "x"));
  for (int i = 0; i < 10; ++i) CHECK(uniform01(a) == uniform01(b));
  Rng r(3);
  for (int i = 0; i < 1000; ++i) CHECK(uniform_below(r, 7) < 7);
}

namespace {

// Gradient check of a scalar tape expression built from the parameters.
template <class Build>
GradCheckResult check_tape(Build build, std::vector<Matrix> params) {
  auto loss = [&](std::span<const Matrix> p) {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& m : p) vars.push_back(tape.variable(m));
    return tape.scalar(build(tape, vars));
  };
  auto grad = [&](std::span<const Matrix> p) {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& m : p) vars.push_back(tape.variable(m));
    return tape.grad(build(tape, vars), vars);
  };
  return grad_check(loss, grad, params);
}

}  // namespace

TEST_CASE("tape primitives pass the gradient check") {
  const auto g = testing::graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}});
  const auto x = random_matrix(4, 3, 1);
  const auto w = random_matrix(6, 5, 2);
  const auto b = random_matrix(1, 5, 3);
  auto build = [&](GradTape& t, const std::vector<Var>& v) {
    const Var agg = t.neighbor_mean(g, v[0]);
    const Var in = t.concat_cols(v[0], agg);
    const Var h = t.relu(t.add_row_bias(t.matmul(in, v[1]), v[2]));
    const Var s = t.sigmoid(t.slice_cols(h, 1, 3));
    const Var q = t.add(t.scale(s, 2.0), t.slice_cols(h, 0, 3));
    const Var terms[] = {t.sum(q), t.sum_squares(h)};
    const double coef[] = {1.0, 0.5};
    return t.weighted_sum(coef, terms);
  };
  const auto r = check_tape(build, {x, w, b});
  CHECK(r.checked > 0);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("gradient of a constant leaf is not requested") {
  GradTape tape;
  const Var c = tape.constant(Matrix{{1, 2}});
  const Var v = tape.variable(Matrix{{3, 4}});
  const Var s = tape.sum(tape.add(c, v));
  const Var wrt[] = {v};
  const auto g = tape.grad(s, wrt);
  CHECK(g[0] == Matrix{{1, 1}});
  CHECK_THROWS_AS(tape.grad(tape.add(c, v), wrt), TapeError);
  GradTape other;
  const Var foreign[] = {other.variable(Matrix{{1}})};
  CHECK_THROWS_AS(tape.grad(s, foreign), TapeError);
}

TEST_CASE("gradient check detects a wrong gradient") {
  auto loss = [](std::span<const Matrix> p) { return p[0](0, 0) * p[0](0, 0); };
  auto bad = [](std::span<const Matrix> p) {
    return std::vector<Matrix>{Matrix{{3.0 * p[0](0, 0)}}};
  };
  const std::vector<Matrix> params{Matrix{{1.5}}};
  CHECK(grad_check(loss, bad, params).max_relative_error > 0.1);
}

TEST_CASE("gradient check skips kinks") {
  auto loss = [](std::span<const Matrix> p) { return std::abs(p[0](0, 0)); };
  auto grad = [](std::span<const Matrix> p) {
    return std::vector<Matrix>{Matrix{{p[0](0, 0) >= 0 ? 1.0 : -1.0}}};
  };
  const std::vector<Matrix> params{Matrix{{0.0}}};
  const auto r = grad_check(loss, grad, params);
  CHECK(r.skipped_kinks == 1);
  CHECK(r.max_relative_error == 0.0);
}

TEST_CASE("gradient check validates its step") {
  auto loss = [](std::span<const Matrix>) { return 0.0; };
  auto grad = [](std::span<const Matrix> p) { return std::vector<Matrix>{Matrix(p[0].rows(), 1)}; };
  const std::vector<Matrix> params{Matrix{{0.0}}};
  GradCheckOptions opt;
  opt.eps = 1e-2;
  CHECK_THROWS(grad_check(loss, grad, params, opt));
  auto nan_loss = [](std::span<const Matrix>) { return NAN; };
  CHECK_THROWS_AS(grad_check(nan_loss, grad, params), NumericError);
}
