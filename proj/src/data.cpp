#include "fairgraph/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fairgraph/errors.hpp"
#include "fairgraph/rng.hpp"

#ifndef FAIRGRAPH_DATA_DIR
#define FAIRGRAPH_DATA_DIR "data"
#endif

namespace fairgraph {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DatasetMeta read_meta(const std::string& path) {
  auto in = open_input(path);
  try {
    const json j = json::parse(in);
    DatasetMeta m;
    m.label_col = j.at("label_col").get<std::string>();
    m.sensitive_col = j.at("sensitive_col").get<std::string>();
    m.positive_value = j.at("positive_value").get<std::string>();
    m.sensitive_positive_value = j.at("sensitive_positive_value").get<std::string>();
    if (j.contains("unlabeled_values")) {
      m.unlabeled_values = j["unlabeled_values"].get<std::vector<std::string>>();
    }
    if (j.contains("exclude_columns")) {
      m.exclude_columns = j["exclude_columns"].get<std::vector<std::string>>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

DatasetSpec DatasetSpec::in_directory(const std::string& dir) {
  const fs::path d(dir);
  return {(d / "features.csv").string(), (d / "edges.txt").string(), (d / "meta.json").string()};
}

std::string resolve_dataset_dir(const std::string& name_or_path) {
  if (fs::is_directory(name_or_path)) return name_or_path;
  const char* env = std::getenv("FAIRGRAPH_DATA_DIR");
  const fs::path root = env && *env ? env : FAIRGRAPH_DATA_DIR;
  const fs::path candidate = root / name_or_path;
  if (fs::is_directory(candidate)) return candidate.string();
  throw IoError("dataset not found: " + name_or_path + " (looked in " + root.string() + ")");
}

Dataset load_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.meta = read_meta(spec.meta_path);
  ds.name = fs::path(spec.features_path).parent_path().filename().string();

  auto in = open_input(spec.features_path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(spec.features_path + ": missing header");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumnError("column not found: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column(ds.meta.label_col);
  const std::size_t sens_col = column(ds.meta.sensitive_col);
  std::set<std::size_t> excluded{label_col};
  for (const auto& name : ds.meta.exclude_columns) excluded.insert(column(name));
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!excluded.count(c)) {
      feature_cols.push_back(c);
      ds.nodes.feature_names.push_back(header[c]);
    }
  }

  std::vector<double> values;
  std::vector<std::int8_t> labels;
  std::vector<std::string> sens_raw;
  // A non-numeric sensitive column kept as a feature becomes its 0/1 indicator.
  bool sens_as_indicator = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(spec.features_path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        if (c == sens_col) {
          sens_as_indicator = true;
          values.push_back(0.0);
          continue;
        }
        throw ParseError(spec.features_path + ":" + std::to_string(line_no) + ": column " +
                         header[c] + " is not numeric: '" + cells[c] + "'");
      }
      values.push_back(v);
    }
    const std::string& y = cells[label_col];
    const auto& unl = ds.meta.unlabeled_values;
    if (std::find(unl.begin(), unl.end(), y) != unl.end()) {
      labels.push_back(kUnknownLabel);
    } else {
      labels.push_back(y == ds.meta.positive_value ? 1 : 0);
    }
    sens_raw.push_back(cells[sens_col]);
  }
  const std::size_t n = labels.size();
  if (n == 0) throw ParseError(spec.features_path + ": no rows");

  std::set<std::string> other;
  std::vector<std::uint8_t> sensitive(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (sens_raw[i] == ds.meta.sensitive_positive_value) {
      sensitive[i] = 1;
    } else {
      other.insert(sens_raw[i]);
    }
  }
  if (other.size() > 1) {
    throw NonBinarySensitiveError("sensitive column " + ds.meta.sensitive_col + " has " +
                                  std::to_string(other.size() + 1) + " distinct values");
  }

  ds.nodes.features = Matrix(n, feature_cols.size(), std::move(values));
  if (sens_as_indicator) {
    const auto pos = static_cast<std::size_t>(
        std::find(feature_cols.begin(), feature_cols.end(), sens_col) - feature_cols.begin());
    for (std::size_t i = 0; i < n; ++i) ds.nodes.features(i, pos) = sensitive[i];
  }
  ds.nodes.labels = NodeLabels(std::move(labels), std::move(sensitive));
  auto edges = read_edge_list_file(spec.edges_path, n);
  ds.graph = std::move(edges.graph);
  ds.dropped_edges = edges.dropped;
  return ds;
}

void write_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  const auto spec = DatasetSpec::in_directory(dir);
  std::ofstream out(spec.features_path);
  if (!out) throw IoError("cannot write " + spec.features_path);
  const auto& names = ds.nodes.feature_names;
  const bool sens_in_features =
      std::find(names.begin(), names.end(), ds.meta.sensitive_col) != names.end();
  for (const auto& name : names) out << name << ',';
  if (!sens_in_features) out << ds.meta.sensitive_col << ',';
  out << ds.meta.label_col << '\n';
  const auto& lab = ds.nodes.labels;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    for (std::size_t c = 0; c < names.size(); ++c) out << format_double(ds.nodes.features(i, c)) << ',';
    if (!sens_in_features) out << (lab.sensitive[i] ? "1" : "0") << ',';
    if (lab.class_label[i] == kUnknownLabel) {
      out << "NA";
    } else {
      out << (lab.class_label[i] == 1 ? "1" : "0");
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + spec.features_path);

  write_edge_list_file(spec.edges_path, ds.graph);

  json meta = {{"label_col", ds.meta.label_col},
               {"sensitive_col", ds.meta.sensitive_col},
               {"positive_value", "1"},
               {"sensitive_positive_value",
                sens_in_features ? ds.meta.sensitive_positive_value : std::string("1")},
               {"unlabeled_values", {"NA"}}};
  if (!sens_in_features) meta["exclude_columns"] = {ds.meta.sensitive_col};
  std::ofstream mo(spec.meta_path);
  if (!mo) throw IoError("cannot write " + spec.meta_path);
  mo << meta.dump(2) << '\n';
}

Matrix standardize(const Matrix& x, const std::vector<std::uint8_t>& rows) {
  if (rows.size() != x.rows()) throw ShapeError("row mask length does not match features");
  std::size_t count = 0;
  for (auto r : rows) count += r != 0;
  if (count == 0) throw EmptyInputError("no rows to take statistics from");
  Matrix out = x;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (rows[i]) mean += x(i, c);
    }
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (rows[i]) var += (x(i, c) - mean) * (x(i, c) - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(count));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out(i, c) = sd > 0.0 ? (x(i, c) - mean) / sd : x(i, c) - mean;
    }
  }
  return out;
}

const char* SplitMasks::name_of(std::size_t node) const {
  if (node < train.size() && train[node]) return "train";
  if (node < val.size() && val[node]) return "val";
  if (node < test.size() && test[node]) return "test";
  return "none";
}

ExpectedCensus expected_census(const SynthConfig& cfg, const NodeLabels& labels) {
  for (double t : {cfg.target_hr_c, cfg.target_hr_s}) {
    if (!(t >= 0.0 && t <= 1.0)) throw InfeasibleError("homophily targets must lie in [0, 1]");
  }
  if (!(cfg.mean_degree > 0.0)) throw InvalidArgument("mean degree must be positive");
  double block[2][2] = {{0, 0}, {0, 0}};  // [y][s]
  for (std::size_t i = 0; i < labels.size(); ++i) {
    block[labels.class_label[i]][labels.sensitive[i]] += 1.0;
  }
  auto within = [](double a) { return a * (a - 1.0) / 2.0; };
  ExpectedCensus ec;
  // Pairs per type, summed over the block pairs that produce it.
  ec.pairs[0] = within(block[0][0]) + within(block[0][1]) + within(block[1][0]) + within(block[1][1]);
  ec.pairs[1] = block[0][0] * block[0][1] + block[1][0] * block[1][1];
  ec.pairs[2] = block[0][0] * block[1][0] + block[0][1] * block[1][1];
  ec.pairs[3] = block[0][0] * block[1][1] + block[0][1] * block[1][0];
  const double hc = cfg.target_hr_c, hs = cfg.target_hr_s;
  const double share[4] = {hc * hs, hc * (1 - hs), (1 - hc) * hs, (1 - hc) * (1 - hs)};
  const double edges = static_cast<double>(labels.size()) * cfg.mean_degree / 2.0;
  for (int t = 0; t < 4; ++t) {
    const double want = share[t] * edges;
    if (want == 0.0) continue;
    if (ec.pairs[t] == 0.0) {
      throw InfeasibleError("edge type " + std::string(to_string(static_cast<EdgeType>(t))) +
                            " has a positive share but no candidate pairs");
    }
    const double p = want / ec.pairs[t];
    if (p > 1.0) {
      throw InfeasibleError("edge type " + std::string(to_string(static_cast<EdgeType>(t))) +
                            " needs connection probability " + format_double(p) + " > 1");
    }
    ec.probability[t] = p;
    ec.mean[t] = want;
    ec.variance[t] = ec.pairs[t] * p * (1.0 - p);
  }
  return ec;
}

SynthResult synth_generate(const SynthConfig& cfg) {
  if (cfg.n < 4) throw InvalidArgument("synthetic graph needs at least 4 nodes");
  if (cfg.feature_dim == 0) throw InvalidArgument("feature dimension must be positive");
  Rng rng(derive_seed(cfg.seed, "synth-nodes"));
  std::vector<std::int8_t> y(cfg.n);
  std::vector<std::uint8_t> s(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    y[i] = uniform01(rng) < cfg.p_label ? 1 : 0;
    s[i] = uniform01(rng) < cfg.p_sensitive ? 1 : 0;
  }
  NodeLabels labels(std::move(y), std::move(s));
  SynthResult res;
  res.expected = expected_census(cfg, labels);

  Rng erng(derive_seed(cfg.seed, "synth-edges"));
  std::vector<Edge> edges;
  for (NodeId u = 0; u < cfg.n; ++u) {
    for (NodeId v = u + 1; v < cfg.n; ++v) {
      const auto t = classify_edge(labels.class_label[u], labels.class_label[v],
                                   labels.sensitive[u], labels.sensitive[v]);
      const double p = res.expected.probability[static_cast<int>(t)];
      // Always draw so the stream position does not depend on p.
      const double r = uniform01(erng);
      if (r < p) edges.push_back({u, v});
    }
  }

  Rng frng(derive_seed(cfg.seed, "synth-features"));
  Matrix x(cfg.n, cfg.feature_dim);
  const std::size_t half = (cfg.feature_dim + 1) / 2;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t k = 0; k < cfg.feature_dim; ++k) {
      const double mean = k < half ? cfg.label_signal * (2.0 * labels.class_label[i] - 1.0)
                                   : cfg.sensitive_signal * (2.0 * labels.sensitive[i] - 1.0);
      x(i, k) = mean + cfg.noise * standard_normal(frng);
    }
  }

  Dataset& ds = res.dataset;
  ds.name = "synthetic";
  ds.graph = Graph(cfg.n, std::move(edges));
  ds.nodes.features = std::move(x);
  for (std::size_t k = 0; k < cfg.feature_dim; ++k) ds.nodes.feature_names.push_back("x" + std::to_string(k));
  ds.nodes.labels = std::move(labels);
  ds.meta.label_col = "y";
  ds.meta.sensitive_col = "s";
  ds.meta.positive_value = "1";
  ds.meta.sensitive_positive_value = "1";
  ds.meta.exclude_columns = {"s"};
  return res;
}

void export_embeddings(const std::string& path, const LatentState& state, const NodeLabels& labels,
                       const SplitMasks& splits) {
  if (state.h.rows() != labels.size()) throw ShapeError("embedding rows do not match labels");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "node,split,y,s";
  for (std::size_t k = 0; k < state.c.cols(); ++k) out << ",c" << k;
  for (std::size_t k = 0; k < state.e.cols(); ++k) out << ",e" << k;
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << ',' << splits.name_of(i) << ',' << static_cast<int>(labels.class_label[i]) << ','
        << static_cast<int>(labels.sensitive[i]);
    for (double v : state.c.row(i)) out << ',' << format_double(v);
    for (double v : state.e.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_embeddings(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  const std::size_t cols = split_csv_line(line).size();
  if (cols < 4) throw ParseError(path + ": not an embedding export");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols) throw ParseError(path + ": ragged row");
    for (std::size_t c = 4; c < cols; ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) throw ParseError(path + ": bad number '" + cells[c] + "'");
      values.push_back(v);
    }
    ++rows;
  }
  return Matrix(rows, cols - 4, std::move(values));
}

}  // namespace fairgraph
