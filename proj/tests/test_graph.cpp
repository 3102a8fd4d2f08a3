#include <sstream>

#include "doctest.h"
#include "fairgraph/edit_theory.hpp"
#include "fairgraph/errors.hpp"
#include "fairgraph/graph.hpp"
#include "fairgraph/verify.hpp"
#include "helpers.hpp"

using namespace fairgraph;
using testing::graph_of;

TEST_CASE("graph construction drops self-loops and repeated pairs") {
  std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}, {1, 0}, {2, 2}, {1, 2}, {0, 1}};
  std::size_t dropped = 0;
  const auto g = Graph::from_pairs(3, pairs, &dropped);
  CHECK(g.num_edges() == 2);
  CHECK(dropped == 3);
  CHECK(g.has_edge(1, 0));
  CHECK(g.has_edge(2, 1));
  CHECK_FALSE(g.has_edge(0, 2));
  CHECK(g.degree(1) == 2);
  CHECK(g.degree(0) == 1);
}

TEST_CASE("edge list round trip keeps the graph") {
  const auto g = graph_of(5, {{0, 1}, {1, 2}, {3, 4}, {0, 4}});
  std::stringstream ss;
  write_edge_list(ss, g);
  const auto back = read_edge_list(ss, 5);
  CHECK(back.dropped == 0);
  CHECK(back.graph == g);
}

TEST_CASE("edge list parser accepts commas and comments") {
  std::stringstream ss("# header\n0,1\n1 2\n\n2 1\n");
  const auto r = read_edge_list(ss, 3);
  CHECK(r.graph.num_edges() == 2);
  CHECK(r.dropped == 1);
}

TEST_CASE("edge list parser rejects out-of-range ids") {
  std::stringstream ss("0 7\n");
  CHECK_THROWS(read_edge_list(ss, 3));
}

TEST_CASE("edge types follow label and sensitive agreement") {
  CHECK(classify_edge(1, 1, 0, 0) == EdgeType::I);
  CHECK(classify_edge(1, 1, 0, 1) == EdgeType::II);
  CHECK(classify_edge(0, 1, 1, 1) == EdgeType::III);
  CHECK(classify_edge(0, 1, 0, 1) == EdgeType::IV);
}

TEST_CASE("census and ratios on a hand-built graph") {
  // y = 0 0 1 1, s = 0 1 0 1
  const auto g = graph_of(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  const NodeLabels lab({0, 0, 1, 1}, {0, 1, 0, 1});
  const auto c = edge_census(g, lab);
  CHECK(c.m == 5);
  CHECK(c.count(EdgeType::I) == 0);
  CHECK(c.count(EdgeType::II) == 2);
  CHECK(c.count(EdgeType::III) == 2);
  CHECK(c.count(EdgeType::IV) == 1);
  CHECK(c.same_class == 2);
  CHECK(c.same_sensitive == 2);
  const auto r = homophily_ratios(g, lab);
  CHECK(r.hr_c == doctest::Approx(0.4));
  CHECK(r.hr_s == doctest::Approx(0.4));
}

TEST_CASE("ratios on an empty graph are undefined") {
  const Graph g(3, {});
  CHECK_THROWS_AS(homophily_ratios(g, NodeLabels({0, 1, 0}, {0, 0, 1})), UndefinedRatioError);
}

TEST_CASE("pseudo-labels fill unknown class labels") {
  NodeLabels lab({0, kUnknownLabel}, {0, 1});
  CHECK_THROWS(lab.effective_label(1));
  lab.pseudo_label = {kUnknownLabel, 1};
  CHECK(lab.effective_label(1) == 1);
  CHECK(lab.effective_label(0) == 0);
}

TEST_CASE("fair edge removal deletes exactly the Type III edges") {
  const auto g = graph_of(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  const NodeLabels lab({0, 0, 1, 1}, {0, 1, 0, 1});
  const auto r = fair_edge_remove(g, lab);
  CHECK(r.graph.num_edges() == 3);
  CHECK(r.report.removed_edges.size() == 2);
  CHECK(r.report.census_after.count(EdgeType::III) == 0);
  CHECK(r.report.hr_c_after == doctest::Approx(2.0 / 3.0));
  CHECK(r.report.hr_s_after == doctest::Approx(0.0));
  CHECK(r.report.hr_c_after > r.report.hr_c_before);
  CHECK(r.report.hr_s_after < r.report.hr_s_before);
}

TEST_CASE("fair edge removal honours a budget") {
  const auto g = graph_of(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  const NodeLabels lab({0, 0, 1, 1}, {0, 1, 0, 1});
  const auto r = fair_edge_remove(g, lab, 1);
  CHECK(r.report.removed_edges.size() == 1);
  CHECK(r.graph.num_edges() == 4);
}

TEST_CASE("removing every edge is degenerate") {
  const auto g = graph_of(2, {{0, 1}});
  CHECK_THROWS_AS(fair_edge_remove(g, NodeLabels({0, 1}, {0, 0})), DegenerateEditError);
}

TEST_CASE("predicted shift for k Type III deletions") {
  // m = 10, N_c = 6, N_s = 8; type counts I..IV = 4, 2, 4, 0.
  const auto c = EdgeCensus::from_types(4, 2, 4, 0);
  REQUIRE(c.m == 10);
  REQUIRE(c.same_class == 6);
  REQUIRE(c.same_sensitive == 8);
  const auto s = predict_ratio_shift(c, 2);
  CHECK(s.d_hr_c == doctest::Approx(6.0 * 2 / (10.0 * 8)));
  CHECK(s.d_hr_s == doctest::Approx(2.0 * (8 - 10) / (10.0 * 8)));
  CHECK(predict_ratio_shift(c, 0).d_hr_c == 0.0);
  CHECK_THROWS_AS(predict_ratio_shift(c, 5), InfeasibleError);
  const auto all3 = EdgeCensus::from_types(0, 0, 3, 0);
  CHECK_THROWS_AS(predict_ratio_shift(all3, 3), DivisionByZeroError);
}

TEST_CASE("single-edge effect signs") {
  const auto c = EdgeCensus::from_types(4, 2, 4, 1);  // m 11, N_c 6, N_s 8
  auto eq = [](EffectSigns e, int a, int b) { return e.hr_c == a && e.hr_s == b; };
  CHECK(eq(single_edge_effect(c, EdgeType::I), -1, -1));
  CHECK(eq(single_edge_effect(c, EdgeType::II), -1, 1));
  CHECK(eq(single_edge_effect(c, EdgeType::III), 1, -1));
  CHECK(eq(single_edge_effect(c, EdgeType::IV), 1, 1));
}

TEST_CASE("single-edge effect agrees with recounting on a small graph") {
  const auto toy = testing::random_toy(8, 0.4, 3);
  const auto c = edge_census(toy.graph, toy.labels);
  const auto before = homophily_ratios(toy.graph, toy.labels);
  const auto edges = toy.graph.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::size_t pos[] = {i};
    const auto after = homophily_ratios(toy.graph.without_edges(pos), toy.labels);
    const auto& e = edges[i];
    const auto t = classify_edge(toy.labels.class_label[e.u], toy.labels.class_label[e.v],
                                 toy.labels.sensitive[e.u], toy.labels.sensitive[e.v]);
    const auto sg = single_edge_effect(c, t);
    auto sign = [](double d) { return (d > 1e-15) - (d < -1e-15); };
    CHECK(sign(after.hr_c - before.hr_c) == sg.hr_c);
    CHECK(sign(after.hr_s - before.hr_s) == sg.hr_s);
  }
}

TEST_CASE("minimal deletions worked example") {
  // m = 10, N_c = 6, N_s = 8, four Type III edges, targets 0.75 and 0.7.
  const auto c = EdgeCensus::from_types(4, 2, 4, 0);
  const auto r = minimal_deletions(c, 0.75, 0.7);
  CHECK(r.feasible);
  REQUIRE(r.k_c);
  REQUIRE(r.k_s);
  CHECK(*r.k_c == 2);
  CHECK(*r.k_s == 4);
  CHECK(r.k_star == 4);
}

TEST_CASE("minimal deletions: infeasible and invalid targets") {
  // m = 11, N_c = 6: even after all four deletions hr_c is 6/7.
  const auto wide = EdgeCensus::from_types(4, 2, 4, 1);
  const auto r = minimal_deletions(wide, 0.9, 0.7);
  CHECK_FALSE(r.feasible);
  CHECK_FALSE(r.k_c);
  CHECK(r.k_s == 1);
  const auto c = EdgeCensus::from_types(4, 2, 4, 0);
  CHECK_THROWS_AS(minimal_deletions(c, 0.5, 0.7), InvalidTargetError);
  CHECK_THROWS_AS(minimal_deletions(c, 0.75, 0.9), InvalidTargetError);
}

TEST_CASE("enumeration oracle finds the Type III optimum") {
  const auto g = graph_of(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  const NodeLabels lab({0, 0, 1, 1}, {0, 1, 0, 1});
  const auto s = oracle::best_deletion_sets(g, lab, 2);
  CHECK(s.subsets == 10);
  CHECK(s.joint_optimum_exists);
  CHECK(s.joint_optimum_uses_only_type3);
  CHECK(s.matches_prediction);
  CHECK(s.max_hr_c == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("enumeration oracle refuses large graphs") {
  const auto toy = testing::random_toy(12, 0.5, 1);
  REQUIRE(toy.graph.num_edges() > oracle::kMaxEnumerationEdges);
  CHECK_THROWS_AS(oracle::best_deletion_sets(toy.graph, toy.labels, 1), ResourceLimitError);
}

TEST_CASE("verification suites pass and report injected faults") {
  verify::SuiteOptions opt{60, 11, false};
  CHECK(verify::identity_suite(opt).passed());
  CHECK(verify::single_edge_suite(opt).passed());
  CHECK(verify::minimal_deletion_suite(opt).passed());
  CHECK(verify::enumeration_suite(opt).passed());
  opt.inject_fault = true;
  const auto bad = verify::identity_suite(opt);
  CHECK_FALSE(bad.passed());
  CHECK(bad.counterexample.has_value());
}
