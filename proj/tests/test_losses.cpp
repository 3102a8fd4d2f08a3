#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fairgraph/errors.hpp"
#include "fairgraph/gradcheck.hpp"
#include "fairgraph/losses.hpp"
#include "fairgraph/model.hpp"
#include "fairgraph/pipeline.hpp"
#include "helpers.hpp"

using namespace fairgraph;
using testing::random_matrix;

namespace {

std::vector<std::int8_t> alternating_labels(std::size_t n) {
  std::vector<std::int8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::int8_t>(i % 2);
  return y;
}

std::vector<std::uint8_t> paired_groups(std::size_t n) {
  std::vector<std::uint8_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<std::uint8_t>((i / 2) % 2);
  return s;
}

// Gradient check of a loss recorded on a tape from matrix inputs.
template <class Build>
GradCheckResult check_loss(Build build, std::vector<Matrix> inputs, std::uint64_t seed) {
  auto run = [&](std::span<const Matrix> p, bool want_grad) {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& m : p) vars.push_back(tape.variable(m));
    const Var out = build(tape, vars);
    return std::make_pair(tape.scalar(out), want_grad ? tape.grad(out, vars) : std::vector<Matrix>{});
  };
  GradCheckOptions opt;
  opt.seed = seed;
  return grad_check([&](std::span<const Matrix> p) { return run(p, false).first; },
                    [&](std::span<const Matrix> p) { return run(p, true).second; }, inputs, opt);
}

double brute_sc(const Matrix& c, const std::vector<std::int8_t>& y, double kappa) {
  const std::size_t n = c.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0, pos = 0.0;
    std::size_t np = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const double phi = tvmf(c.row(i), c.row(a), kappa);
      denom += std::exp(phi);
      if (y[a] == y[i]) {
        pos += phi;
        ++np;
      }
    }
    if (np > 0) total += std::log(denom) - pos / static_cast<double>(np);
  }
  return total;
}

}  // namespace

TEST_CASE("t-vMF similarity properties on a dense grid") {
  const int N = 10000;
  double prev = -2.0;
  for (double kappa : {0.0, 0.5, 1.0, 4.0, 16.0}) {
    prev = -2.0;
    for (int k = 0; k <= N; ++k) {
      const double cs = -1.0 + 2.0 * k / N;
      const double phi = tvmf_from_cos(cs, kappa);
      CHECK(phi >= -1.0 - 1e-12);
      CHECK(phi <= 1.0 + 1e-12);
      CHECK(phi >= prev);
      prev = phi;
      if (kappa == 0.0) CHECK(std::abs(phi - cs) <= 1e-12);
    }
  }
  CHECK(tvmf_from_cos(1.0, 3.0) == doctest::Approx(1.0));
  CHECK(tvmf_from_cos(-1.0, 3.0) == doctest::Approx(-1.0));
}

TEST_CASE("prediction loss is mean BCE over the mask") {
  const Matrix p{{0.9}, {0.2}, {0.5}};
  const std::vector<std::int8_t> y{1, 0, kUnknownLabel};
  const std::vector<std::uint8_t> mask{1, 1, 0};
  CHECK(pred_loss(p, y, mask) == doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2));
  const std::vector<std::uint8_t> none{0, 0, 0};
  CHECK_THROWS_AS(pred_loss(p, y, none), EmptyInputError);
  const Matrix sure{{0.0}};
  const std::vector<std::int8_t> one{1};
  const std::vector<std::uint8_t> m1{1};
  CHECK(pred_loss(sure, one, m1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("counterfactual selection equals an exhaustive scan") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10 + seed * 2;
    const auto h = random_matrix(n, 4, seed);
    Rng rng(seed + 100);
    std::vector<std::int8_t> y(n);
    std::vector<std::uint8_t> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::int8_t>(uniform_below(rng, 2));
      s[i] = static_cast<std::uint8_t>(uniform_below(rng, 2));
    }
    const std::size_t K = 1 + seed % 4;
    const auto cf = select_counterfactuals(h, y, s, K);
    for (std::size_t i = 0; i < n; ++i) {
      for (int family = 0; family < 2; ++family) {
        std::vector<std::pair<double, NodeId>> cand;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const bool ok = family == 0 ? (y[j] == y[i] && s[j] != s[i]) : (y[j] != y[i] && s[j] == s[i]);
          if (ok) cand.emplace_back(squared_distance(h.row(i), h.row(j)), static_cast<NodeId>(j));
        }
        std::sort(cand.begin(), cand.end());
        cand.resize(std::min(cand.size(), K));
        std::vector<NodeId> expect;
        for (const auto& c : cand) expect.push_back(c.second);
        CHECK((family == 0 ? cf.e_cf[i] : cf.c_cf[i]) == expect);
      }
    }
  }
}

TEST_CASE("counterfactual ties break by node id") {
  const Matrix h{{0, 0}, {1, 0}, {-1, 0}, {0, 1}};
  const std::vector<std::int8_t> y{0, 0, 0, 0};
  const std::vector<std::uint8_t> s{0, 1, 1, 1};
  const auto cf = select_counterfactuals(h, y, s, 2);
  CHECK(cf.e_cf[0] == std::vector<NodeId>{1, 2});
  CHECK(cf.c_cf[0].empty());
  CHECK(cf.empty_c == 4);
}

TEST_CASE("invariance loss against a direct sum") {
  const std::size_t n = 8;
  const auto c = random_matrix(n, 3, 5);
  const auto e = random_matrix(n, 3, 6);
  const auto y = alternating_labels(n);
  const auto s = paired_groups(n);
  const auto h = concat_cols(c, e);
  const auto cf = select_counterfactuals(h, y, s, 2);
  double se = 0.0, sc = 0.0, so = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : cf.e_cf[i]) se += 1.0 - cosine(c.row(i), c.row(j));
    for (auto j : cf.c_cf[i]) sc += 1.0 - cosine(e.row(i), e.row(j));
    so += std::abs(cosine(c.row(i), e.row(i)));
  }
  const double gamma = 0.3;
  const double expect = se / cf.e_pairs() + sc / cf.c_pairs() + gamma * so / n;
  CHECK(inv_loss(c, e, cf, gamma, DisMetric::Cosine) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("invariance loss counts zero rows") {
  Matrix c(4, 2, 0.0);
  const auto e = random_matrix(4, 2, 1);
  const std::vector<std::int8_t> y{0, 0, 1, 1};
  const std::vector<std::uint8_t> s{0, 1, 0, 1};
  const auto cf = select_counterfactuals(concat_cols(c, e), y, s, 1);
  InvStats st;
  const double v = inv_loss(c, e, cf, 1.0, DisMetric::Cosine, &st);
  CHECK(std::isfinite(v));
  CHECK(st.zero_vectors > 0);
}

TEST_CASE("negative sampling avoids edges and repeats") {
  const auto toy = testing::random_toy(30, 0.2, 4);
  const auto neg = sample_negative_edges(toy.graph, toy.graph.num_edges(), 9);
  CHECK(neg.size() == toy.graph.num_edges());
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& e : neg) {
    CHECK(e.u != e.v);
    CHECK_FALSE(toy.graph.has_edge(e.u, e.v));
    seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v));
  }
  CHECK(seen.size() == neg.size());
  CHECK(sample_negative_edges(toy.graph, 10, 9) == sample_negative_edges(toy.graph, 10, 9));
  const auto dense = testing::random_toy(6, 1.0, 1);
  CHECK_THROWS_AS(sample_negative_edges(dense.graph, 1, 0), CapacityError);
}

TEST_CASE("sufficiency loss value") {
  const Matrix h{{1, 0}, {1, 0}, {0, 1}};
  const std::vector<Edge> pos{{0, 1}};
  const std::vector<Edge> neg{{0, 2}};
  const double expect = (-std::log(sigmoid(1.0)) - std::log(1.0 - sigmoid(0.0))) / 2;
  CHECK(suf_loss(h, pos, neg) == doctest::Approx(expect));
  CHECK_THROWS_AS(suf_loss(h, pos, {}), EmptyInputError);
}

TEST_CASE("contrastive loss matches a direct evaluation") {
  const auto c = random_matrix(7, 3, 8);
  const std::vector<std::int8_t> y{0, 1, 0, 1, 1, 0, kUnknownLabel};
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 1, 0};
  Matrix sub(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t k = 0; k < 3; ++k) sub(i, k) = c(i, k);
  }
  for (double kappa : {0.0, 1.0, 8.0}) {
    CHECK(sc_loss(c, y, mask, kappa) ==
          doctest::Approx(brute_sc(sub, {y.begin(), y.begin() + 6}, kappa)).epsilon(1e-12));
  }
  const std::vector<std::uint8_t> one{1, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(sc_loss(c, y, one, 1.0), EmptyInputError);
}

TEST_CASE("environmental loss against a direct evaluation") {
  const auto e = random_matrix(6, 2, 2);
  const std::vector<std::uint8_t> s{0, 0, 0, 1, 1, 1};
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < 6; ++j) {
      if (s[j] != s[i]) d.push_back(std::sqrt(squared_distance(e.row(i), e.row(j))));
    }
    std::sort(d.begin(), d.end());
    total += (d[0] + d[1]) / 2;
  }
  CHECK(env_loss(e, s, 2) == doctest::Approx(-total / 6).epsilon(1e-12));
  const std::vector<std::uint8_t> one_group(6, 0);
  CHECK_THROWS_AS(env_loss(e, one_group, 2), EmptyInputError);
}

TEST_CASE("tape and plain evaluations agree") {
  const std::size_t n = 10;
  const auto c = random_matrix(n, 3, 1);
  const auto e = random_matrix(n, 3, 2);
  const auto y = alternating_labels(n);
  const auto s = paired_groups(n);
  const std::vector<std::uint8_t> mask(n, 1);
  const auto cf = select_counterfactuals(concat_cols(c, e), y, s, 2);
  GradTape t;
  const Var vc = t.variable(c), ve = t.variable(e);
  CHECK(t.scalar(inv_loss(t, vc, ve, cf, 0.5, DisMetric::L2)) ==
        inv_loss(c, e, cf, 0.5, DisMetric::L2));
  CHECK(t.scalar(sc_loss(t, vc, y, mask, 1.0)) == sc_loss(c, y, mask, 1.0));
  CHECK(t.scalar(env_loss(t, ve, s, 3)) == env_loss(e, s, 3));
}

TEST_CASE("total loss weights and rejects non-finite parts") {
  const LossParts p{1.0, 2.0, 3.0, 4.0, 5.0};
  const LossWeights w{10, 1, 0, 0.5, 0.1, 1, 1, 1};
  CHECK(total_loss(p, w) == doctest::Approx(1 + 20 + 3 + 2 + 0.5));
  LossParts bad = p;
  bad.sc = NAN;
  CHECK_THROWS_AS(total_loss(bad, w), NumericError);
  LossWeights neg = w;
  neg.alpha = -1;
  CHECK_THROWS(neg.validate());
}

TEST_CASE("every loss passes the gradient check at five seeds") {
  const std::size_t n = 12;
  const auto y = alternating_labels(n);
  const auto s = paired_groups(n);
  std::vector<std::uint8_t> mask(n, 1);
  mask[3] = 0;
  const auto toy = testing::random_toy(n, 0.3, 2);
  const auto pos = toy.graph.edges();
  const auto neg = sample_negative_edges(toy.graph, 8, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    const auto c = random_matrix(n, 4, 10 * seed + 1);
    const auto e = random_matrix(n, 4, 10 * seed + 2);
    const auto cf = select_counterfactuals(concat_cols(c, e), y, s, 3);
    Matrix logits = random_matrix(n, 1, 10 * seed + 3);

    auto pred = [&](GradTape& t, const std::vector<Var>& v) {
      return pred_loss(t, t.sigmoid(v[0]), y, mask);
    };
    CHECK(check_loss(pred, {logits}, seed).max_relative_error < 1e-4);
    for (auto metric : {DisMetric::Cosine, DisMetric::L2}) {
      auto inv = [&](GradTape& t, const std::vector<Var>& v) {
        return inv_loss(t, v[0], v[1], cf, 0.7, metric);
      };
      CHECK(check_loss(inv, {c, e}, seed).max_relative_error < 1e-4);
    }
    auto suf = [&](GradTape& t, const std::vector<Var>& v) { return suf_loss(t, v[0], pos, neg); };
    CHECK(check_loss(suf, {concat_cols(c, e)}, seed).max_relative_error < 1e-4);
    for (double kappa : {0.0, 1.0, 5.0}) {
      auto sc = [&](GradTape& t, const std::vector<Var>& v) { return sc_loss(t, v[0], y, mask, kappa); };
      CHECK(check_loss(sc, {c}, seed).max_relative_error < 1e-4);
    }
    auto env = [&](GradTape& t, const std::vector<Var>& v) { return env_loss(t, v[0], s, 2); };
    CHECK(check_loss(env, {e}, seed).max_relative_error < 1e-4);
  }
}

TEST_CASE("composite objective through the model passes the gradient check") {
  const std::size_t n = 14;
  const auto toy = testing::random_toy(n, 0.3, 5);
  const auto x = random_matrix(n, 3, 77);
  const auto y = alternating_labels(n);
  const auto s = paired_groups(n);
  std::vector<std::int8_t> train_y = y;
  std::vector<std::uint8_t> mask(n, 1);
  for (std::size_t i = 10; i < n; ++i) {
    mask[i] = 0;
    train_y[i] = kUnknownLabel;
  }
  const auto neg = sample_negative_edges(toy.graph, 12, 3);
  TrainConfig cfg;
  cfg.hidden = 5;
  cfg.d_c = 3;
  cfg.weights.K = 2;
  cfg.weights.K_prime = 2;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    const auto params = init_params(3, cfg.hidden, cfg.d_c, seed);
    const auto state = encode(params.encoder, toy.graph, x);
    const auto cf = select_counterfactuals(state.h, y, s, cfg.weights.K);
    const ObjectiveData data{train_y, mask, y, s, toy.graph.edges(), neg, &cf};
    auto run = [&](std::span<const Matrix> p, bool want_grad) {
      ModelParams mp = params;
      mp.assign({p.begin(), p.end()});
      GradTape tape;
      const auto vars = record_params(tape, mp);
      const auto fw = record_forward(tape, vars, mp, toy.graph, tape.constant(x));
      const auto obj = record_objective(tape, fw, cfg, data);
      const auto all = vars.all();
      return std::make_pair(tape.scalar(obj.total),
                            want_grad ? tape.grad(obj.total, all) : std::vector<Matrix>{});
    };
    GradCheckOptions opt;
    opt.seed = seed;
    const auto tensors = params.tensors();
    const auto r = grad_check([&](std::span<const Matrix> p) { return run(p, false).first; },
                              [&](std::span<const Matrix> p) { return run(p, true).second; },
                              tensors, opt);
    CHECK(r.checked > 0);
    CHECK(r.max_relative_error < 1e-4);
  }
}
