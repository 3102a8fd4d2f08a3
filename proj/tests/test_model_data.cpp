#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fairgraph/data.hpp"
#include "fairgraph/errors.hpp"
#include "fairgraph/model.hpp"
#include "fairgraph/tape.hpp"
#include "helpers.hpp"

using namespace fairgraph;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fairgraph_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("parameter init is deterministic and shaped") {
  const auto a = init_params(5, 7, 3, 42);
  const auto b = init_params(5, 7, 3, 42);
  CHECK(a == b);
  CHECK_FALSE(a == init_params(5, 7, 3, 43));
  CHECK(a.encoder.w1.rows() == 10);
  CHECK(a.encoder.w1.cols() == 7);
  CHECK(a.encoder.w2.rows() == 14);
  CHECK(a.encoder.w2.cols() == 6);
  CHECK(a.predictor.w.rows() == 3);
  CHECK(a.encoder.d_e == 3);
}

TEST_CASE("encoder splits H into content and environment blocks") {
  const auto toy = testing::random_toy(9, 0.3, 1);
  const auto x = testing::random_matrix(9, 4, 2);
  const auto p = init_params(4, 6, 2, 0);
  const auto st = encode(p.encoder, toy.graph, x);
  CHECK(st.h.cols() == 4);
  CHECK(st.c == slice_cols(st.h, 0, 2));
  CHECK(st.e == slice_cols(st.h, 2, 2));
}

TEST_CASE("plain and tape forward passes are bit-identical") {
  const auto toy = testing::random_toy(9, 0.3, 1);
  const auto x = testing::random_matrix(9, 4, 2);
  const auto p = init_params(4, 6, 2, 0);
  const auto st = encode(p.encoder, toy.graph, x);
  const auto probs = predict(p.predictor, st.c);
  GradTape tape;
  const auto vars = record_params(tape, p);
  const auto fw = record_forward(tape, vars, p, toy.graph, tape.constant(x));
  CHECK(tape.value(fw.h) == st.h);
  const auto& tp = tape.value(fw.probs);
  for (std::size_t i = 0; i < probs.size(); ++i) CHECK(tp(i, 0) == probs[i]);
  CHECK(hard_labels({0.5, 0.49, 0.8}) == std::vector<std::int8_t>{1, 0, 1});
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto p = init_params(3, 4, 2, 9);
  p.predictor.b(0, 0) = 0.1 + 0.2;
  const auto back = params_from_json(params_to_json(p));
  CHECK(back == p);
  CHECK_THROWS(params_from_json("{\"nope\": 1}"));
  auto t = p.tensors();
  t.pop_back();
  CHECK_THROWS_AS(p.assign(t), InvalidArgument);
}

TEST_CASE("dataset load with unlabeled rows, duplicate edges and excluded columns") {
  const auto dir = scratch_dir("load");
  write_text(dir / "features.csv",
             "a,g,b,label\n1,M,2,yes\n2,F,3,no\n3,F,5,NA\n4,M,1,yes\n");
  write_text(dir / "edges.txt", "0 1\n1 0\n2 3\n0 0\n");
  write_text(dir / "meta.json",
             R"({"label_col":"label","sensitive_col":"g","positive_value":"yes",)"
             R"("sensitive_positive_value":"M","exclude_columns":["b"]})");
  const auto ds = load_dataset(DatasetSpec::in_directory(dir.string()));
  CHECK(ds.graph.num_nodes() == 4);
  CHECK(ds.graph.num_edges() == 2);
  CHECK(ds.dropped_edges == 2);
  CHECK(ds.nodes.labels.class_label == std::vector<std::int8_t>{1, 0, kUnknownLabel, 1});
  CHECK(ds.nodes.labels.sensitive == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(ds.nodes.feature_names == std::vector<std::string>{"a", "g"});
  CHECK(ds.nodes.features(3, 1) == 1.0);
}

TEST_CASE("dataset errors are typed") {
  const auto dir = scratch_dir("errors");
  write_text(dir / "features.csv", "a,g,label\n1,M,1\n2,X,0\n3,F,1\n");
  write_text(dir / "edges.txt", "0 1\n");
  write_text(dir / "meta.json",
             R"({"label_col":"label","sensitive_col":"g","positive_value":"1",)"
             R"("sensitive_positive_value":"M"})");
  CHECK_THROWS_AS(load_dataset(DatasetSpec::in_directory(dir.string())), NonBinarySensitiveError);
  write_text(dir / "meta.json",
             R"({"label_col":"label","sensitive_col":"zz","positive_value":"1",)"
             R"("sensitive_positive_value":"M"})");
  CHECK_THROWS_AS(load_dataset(DatasetSpec::in_directory(dir.string())), MissingColumnError);
  write_text(dir / "features.csv", "a,g,label\n1,M\n");
  write_text(dir / "meta.json",
             R"({"label_col":"label","sensitive_col":"g","positive_value":"1",)"
             R"("sensitive_positive_value":"M"})");
  CHECK_THROWS_AS(load_dataset(DatasetSpec::in_directory(dir.string())), ParseError);
  CHECK_THROWS_AS(load_dataset(DatasetSpec::in_directory((dir / "absent").string())), IoError);
}

TEST_CASE("dataset write and reload round trip") {
  SynthConfig cfg;
  cfg.n = 200;
  cfg.seed = 5;
  const auto ds = synth_generate(cfg).dataset;
  const auto dir = scratch_dir("roundtrip");
  write_dataset(dir.string(), ds);
  const auto back = load_dataset(DatasetSpec::in_directory(dir.string()));
  CHECK(back.graph == ds.graph);
  CHECK(back.nodes.labels.class_label == ds.nodes.labels.class_label);
  CHECK(back.nodes.labels.sensitive == ds.nodes.labels.sensitive);
  CHECK(back.nodes.features == ds.nodes.features);
}

TEST_CASE("standardize uses statistics of the selected rows") {
  const Matrix x{{1, 5}, {3, 5}, {100, 7}};
  const auto z = standardize(x, {1, 1, 0});
  CHECK(z(0, 0) == doctest::Approx(-1.0));
  CHECK(z(1, 0) == doctest::Approx(1.0));
  CHECK(z(2, 0) == doctest::Approx(98.0));
  CHECK(z(0, 1) == 0.0);
  CHECK(z(2, 1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(standardize(x, {0, 0, 0}), EmptyInputError);
}

TEST_CASE("synthetic generator hits expected census within sampling noise") {
  SynthConfig cfg;
  cfg.n = 1500;
  cfg.target_hr_c = 0.7;
  cfg.target_hr_s = 0.75;
  cfg.mean_degree = 12;
  cfg.seed = 2;
  const auto res = synth_generate(cfg);
  const auto census = edge_census(res.dataset.graph, res.dataset.nodes.labels);
  for (int t = 0; t < 4; ++t) {
    CAPTURE(t);
    const double sd = std::sqrt(res.expected.variance[t]);
    CHECK(std::abs(static_cast<double>(census.by_type[t]) - res.expected.mean[t]) < 5 * sd + 1);
  }
  CHECK(census.hr_c() == doctest::Approx(0.7).epsilon(0.03));
  CHECK(census.hr_s() == doctest::Approx(0.75).epsilon(0.03));
  const auto again = synth_generate(cfg);
  CHECK(again.dataset.graph == res.dataset.graph);
}

TEST_CASE("synthetic generator rejects impossible targets") {
  SynthConfig cfg;
  cfg.n = 20;
  cfg.mean_degree = 30;
  CHECK_THROWS_AS(synth_generate(cfg), InfeasibleError);
  cfg.mean_degree = 4;
  cfg.target_hr_c = 1.5;
  CHECK_THROWS_AS(synth_generate(cfg), InfeasibleError);
}

TEST_CASE("embedding export round trip") {
  const auto toy = testing::random_toy(6, 0.4, 1);
  const auto x = testing::random_matrix(6, 3, 2);
  const auto p = init_params(3, 4, 2, 0);
  const auto st = encode(p.encoder, toy.graph, x);
  SplitMasks masks{{1, 1, 0, 0, 0, 0}, {0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 1, 1}};
  CHECK(std::string(masks.name_of(3)) == "val");
  const auto dir = scratch_dir("export");
  const auto path = (dir / "emb.csv").string();
  export_embeddings(path, st, toy.labels, masks);
  const auto back = read_embeddings(path);
  REQUIRE(back.same_shape(st.h));
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.data()[i] == st.h.data()[i]);
}
