#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairgraph/graph.hpp"
#include "fairgraph/matrix.hpp"
#include "fairgraph/tape.hpp"

namespace fairgraph {

/// Two-layer mean-aggregation encoder. Each layer maps the concatenation
/// [x_v | mean of neighbours] through a dense map; layer 1 applies ReLU,
/// layer 2 is linear and emits d_c + d_e columns.
struct EncoderParams {
  Matrix w1;  // 2*d_in x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // 2*hidden x (d_c + d_e)
  Matrix b2;  // 1 x (d_c + d_e)
  std::size_t d_c = 0;
  std::size_t d_e = 0;

  std::size_t input_dim() const { return w1.rows() / 2; }
  std::size_t hidden_dim() const { return w1.cols(); }
};

/// Logistic classifier on the content block.
struct PredictorParams {
  Matrix w;  // d_c x 1
  Matrix b;  // 1 x 1
};

struct ModelParams {
  EncoderParams encoder;
  PredictorParams predictor;

  /// Flat list in a fixed order: w1, b1, w2, b2, w, b.
  std::vector<Matrix> tensors() const;
  void assign(std::vector<Matrix> tensors);
  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.tensors() == b.tensors() && a.encoder.d_c == b.encoder.d_c &&
           a.encoder.d_e == b.encoder.d_e;
  }
};

/// Glorot-uniform weights, zero biases, d_e = d_c. Deterministic in seed.
ModelParams init_params(std::size_t d_in, std::size_t hidden, std::size_t d_c, std::uint64_t seed);

/// H = [C | E]. C and E are copies of the column blocks of H.
struct LatentState {
  Matrix h;
  Matrix c;
  Matrix e;
};

LatentState encode(const EncoderParams& params, const Graph& g, const Matrix& x);

/// sigmoid(c_i . w + b) per node.
std::vector<double> predict(const PredictorParams& phi, const Matrix& c);
/// 1 iff probability >= 0.5.
std::vector<std::int8_t> hard_labels(const std::vector<double>& probs);

/// Parameter handles and encoder outputs recorded on a tape.
struct ModelVars {
  Var w1, b1, w2, b2, w, b;
  std::vector<Var> all() const { return {w1, b1, w2, b2, w, b}; }
};

struct ForwardVars {
  Var h, c, e;
  Var logits;  // n x 1
  Var probs;   // n x 1
};

ModelVars record_params(GradTape& tape, const ModelParams& params);
ForwardVars record_forward(GradTape& tape, const ModelVars& vars, const ModelParams& shape,
                           const Graph& g, Var x);

/// Checkpoint encoding: JSON with shapes and row-major values. Doubles are
/// written in shortest round-trip form so a reload is bit-exact.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

}  // namespace fairgraph
