#include "fairgraph/model.hpp"

#include <cmath>

#include "json.hpp"

#include "fairgraph/errors.hpp"
#include "fairgraph/rng.hpp"

namespace fairgraph {

using nlohmann::json;

std::vector<Matrix> ModelParams::tensors() const {
  return {encoder.w1, encoder.b1, encoder.w2, encoder.b2, predictor.w, predictor.b};
}

void ModelParams::assign(std::vector<Matrix> t) {
  if (t.size() != 6) throw InvalidArgument("expected six parameter tensors");
  for (std::size_t i = 0; i < 6; ++i) {
    const auto cur = tensors();
    if (!t[i].same_shape(cur[i])) throw ShapeError("parameter tensor shape changed");
  }
  encoder.w1 = std::move(t[0]);
  encoder.b1 = std::move(t[1]);
  encoder.w2 = std::move(t[2]);
  encoder.b2 = std::move(t[3]);
  predictor.w = std::move(t[4]);
  predictor.b = std::move(t[5]);
}

namespace {

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& v : m.data()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

}  // namespace

ModelParams init_params(std::size_t d_in, std::size_t hidden, std::size_t d_c, std::uint64_t seed) {
  if (d_in == 0 || hidden == 0 || d_c == 0) throw InvalidArgument("model dimensions must be positive");
  Rng rng(seed);
  ModelParams p;
  p.encoder.d_c = d_c;
  p.encoder.d_e = d_c;
  p.encoder.w1 = glorot(2 * d_in, hidden, rng);
  p.encoder.b1 = Matrix(1, hidden);
  p.encoder.w2 = glorot(2 * hidden, 2 * d_c, rng);
  p.encoder.b2 = Matrix(1, 2 * d_c);
  p.predictor.w = glorot(d_c, 1, rng);
  p.predictor.b = Matrix(1, 1);
  return p;
}

ModelVars record_params(GradTape& tape, const ModelParams& p) {
  return {tape.variable(p.encoder.w1), tape.variable(p.encoder.b1),
          tape.variable(p.encoder.w2), tape.variable(p.encoder.b2),
          tape.variable(p.predictor.w), tape.variable(p.predictor.b)};
}

ForwardVars record_forward(GradTape& tape, const ModelVars& vars, const ModelParams& shape,
                           const Graph& g, Var x) {
  const auto& enc = shape.encoder;
  if (tape.value(x).cols() != enc.input_dim()) {
    throw ShapeError("feature width does not match encoder input");
  }
  if (tape.value(x).rows() != g.num_nodes()) throw ShapeError("feature rows do not match graph");
  Var agg1 = tape.concat_cols(x, tape.neighbor_mean(g, x));
  Var hid = tape.relu(tape.add_row_bias(tape.matmul(agg1, vars.w1), vars.b1));
  Var agg2 = tape.concat_cols(hid, tape.neighbor_mean(g, hid));
  Var h = tape.add_row_bias(tape.matmul(agg2, vars.w2), vars.b2);
  ForwardVars out;
  out.h = h;
  out.c = tape.slice_cols(h, 0, enc.d_c);
  out.e = tape.slice_cols(h, enc.d_c, enc.d_e);
  out.logits = tape.add_row_bias(tape.matmul(out.c, vars.w), vars.b);
  out.probs = tape.sigmoid(out.logits);
  return out;
}

LatentState encode(const EncoderParams& params, const Graph& g, const Matrix& x) {
  if (x.cols() != params.input_dim()) throw ShapeError("feature width does not match encoder input");
  if (x.rows() != g.num_nodes()) throw ShapeError("feature rows do not match graph");
  Matrix hid = relu(add_row_bias(matmul(concat_cols(x, row_mean_neighbors(g, x)), params.w1),
                                 params.b1));
  Matrix h = add_row_bias(matmul(concat_cols(hid, row_mean_neighbors(g, hid)), params.w2),
                          params.b2);
  LatentState s;
  s.c = slice_cols(h, 0, params.d_c);
  s.e = slice_cols(h, params.d_c, params.d_e);
  s.h = std::move(h);
  return s;
}

std::vector<double> predict(const PredictorParams& phi, const Matrix& c) {
  if (c.cols() != phi.w.rows()) throw ShapeError("content width does not match predictor");
  const Matrix p = sigmoid(add_row_bias(matmul(c, phi.w), phi.b));
  return {p.data().begin(), p.data().end()};
}

std::vector<std::int8_t> hard_labels(const std::vector<double>& probs) {
  std::vector<std::int8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= 0.5 ? 1 : 0;
  return out;
}

namespace {

const char* const kTensorNames[] = {"w1", "b1", "w2", "b2", "w", "b"};

json tensor_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix tensor_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

std::string params_to_json(const ModelParams& params) {
  json j;
  j["format"] = "fairgraph-params";
  j["version"] = 1;
  j["d_c"] = params.encoder.d_c;
  j["d_e"] = params.encoder.d_e;
  const auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) j["tensors"][kTensorNames[i]] = tensor_json(t[i]);
  return j.dump();
}

ModelParams params_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "fairgraph-params" || j.at("version") != 1) {
      throw ParseError("unsupported checkpoint format");
    }
    ModelParams p;
    p.encoder.d_c = j.at("d_c").get<std::size_t>();
    p.encoder.d_e = j.at("d_e").get<std::size_t>();
    const auto& t = j.at("tensors");
    p.encoder.w1 = tensor_from_json(t.at("w1"));
    p.encoder.b1 = tensor_from_json(t.at("b1"));
    p.encoder.w2 = tensor_from_json(t.at("w2"));
    p.encoder.b2 = tensor_from_json(t.at("b2"));
    p.predictor.w = tensor_from_json(t.at("w"));
    p.predictor.b = tensor_from_json(t.at("b"));
    if (p.encoder.w2.cols() != p.encoder.d_c + p.encoder.d_e || p.predictor.w.rows() != p.encoder.d_c) {
      throw ParseError("checkpoint tensor shapes are inconsistent");
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace fairgraph
