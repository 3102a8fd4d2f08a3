#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fairgraph/graph.hpp"
#include "fairgraph/matrix.hpp"
#include "fairgraph/model.hpp"

namespace fairgraph {

/// Paths of a dataset's three files. A dataset directory holds
/// features.csv, edges.txt and meta.json.
struct DatasetSpec {
  std::string features_path;
  std::string edges_path;
  std::string meta_path;

  static DatasetSpec in_directory(const std::string& dir);
};

/// Maps a dataset name or directory to a directory: an existing directory
/// is used as is, otherwise the name is looked up under the data root
/// (FAIRGRAPH_DATA_DIR or the compiled-in default).
std::string resolve_dataset_dir(const std::string& name_or_path);

/// meta.json contents.
struct DatasetMeta {
  std::string label_col;
  std::string sensitive_col;
  std::string positive_value;
  std::string sensitive_positive_value;
  // Label cells treated as missing; missing labels become unlabeled nodes.
  std::vector<std::string> unlabeled_values{"", "NA", "nan"};
  // Columns left out of the feature matrix besides the label column.
  std::vector<std::string> exclude_columns;
};

struct NodeTable {
  Matrix features;  // raw values, one row per node
  std::vector<std::string> feature_names;
  NodeLabels labels;
};

struct Dataset {
  std::string name;
  Graph graph;
  NodeTable nodes;
  DatasetMeta meta;
  std::size_t dropped_edges = 0;
};

/// Parses the three files. Features are returned unscaled; standardize()
/// applies the training-split z-score once splits exist.
/// Errors: IoError, ParseError, MissingColumnError, NonBinarySensitiveError.
Dataset load_dataset(const DatasetSpec& spec);

/// Writes features.csv, edges.txt and meta.json into `dir` (created).
void write_dataset(const std::string& dir, const Dataset& ds);

/// Per-column z-score with mean and standard deviation taken over the rows
/// selected by `rows`. Constant columns are centred only.
Matrix standardize(const Matrix& x, const std::vector<std::uint8_t>& rows);

struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;

  /// "train", "val", "test" or "none".
  const char* name_of(std::size_t node) const;
};

struct SynthConfig {
  std::size_t n = 2000;
  double p_label = 0.5;      // P(y = 1)
  double p_sensitive = 0.5;  // P(s = 1), independent of y
  double target_hr_c = 0.6;
  double target_hr_s = 0.8;
  double mean_degree = 10.0;
  std::size_t feature_dim = 8;
  double label_signal = 1.0;      // class mean offset on the first half of the features
  double sensitive_signal = 1.0;  // group mean offset on the second half
  double noise = 1.0;
  std::uint64_t seed = 0;
};

/// Expected edge census of a planted partition, per edge type.
struct ExpectedCensus {
  std::array<double, 4> mean{};
  std::array<double, 4> variance{};
  std::array<double, 4> probability{};  // per-pair connection probability
  std::array<double, 4> pairs{};        // candidate pairs per type
};

/// Type shares follow the independence product
///   I: hr_c hr_s, II: hr_c (1 - hr_s), III: (1 - hr_c) hr_s, IV: (1 - hr_c)(1 - hr_s)
/// and each unordered pair of type t is linked with probability
/// share_t * n * degree / 2 / pairs_t. Throws InfeasibleError when a
/// probability would exceed 1 or a type with positive share has no pairs.
ExpectedCensus expected_census(const SynthConfig& cfg, const NodeLabels& labels);

struct SynthResult {
  Dataset dataset;
  ExpectedCensus expected;
};

SynthResult synth_generate(const SynthConfig& cfg);

/// CSV with columns node, split, y, s, c0.., e0.. (y = -1 when unknown).
void export_embeddings(const std::string& path, const LatentState& state, const NodeLabels& labels,
                       const SplitMasks& splits);
/// Reads the H = [C | E] block back from an export.
Matrix read_embeddings(const std::string& path);

}  // namespace fairgraph
