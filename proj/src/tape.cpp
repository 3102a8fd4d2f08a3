#include "fairgraph/tape.hpp"

#include "fairgraph/errors.hpp"

namespace fairgraph {

void GradTape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw TapeError("variable is not recorded on this tape");
  }
}

Var GradTape::variable(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, true});
  return {this, nodes_.size() - 1};
}

Var GradTape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var GradTape::record(std::vector<Var> inputs, Matrix value, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    check(in);
    node.inputs.push_back(in.id);
    node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  }
  if (!backward) node.requires_grad = false;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Matrix& GradTape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

double GradTape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw TapeError("value is not a scalar");
  return m(0, 0);
}

Var GradTape::matmul(Var a, Var b) {
  Matrix out = fairgraph::matmul(value(a), value(b));
  const GradTape* self = this;
  return record({a, b}, std::move(out),
                [self, a, b](const Matrix& up, std::span<Matrix> g) {
                  g[0] = matmul_transpose_b(up, self->value(b));
                  g[1] = matmul_transpose_a(self->value(a), up);
                });
}

Var GradTape::add(Var a, Var b) {
  return record({a, b}, fairgraph::add(value(a), value(b)),
                [](const Matrix& up, std::span<Matrix> g) {
                  g[0] = up;
                  g[1] = up;
                });
}

Var GradTape::add_row_bias(Var a, Var bias) {
  return record({a, bias}, fairgraph::add_row_bias(value(a), value(bias)),
                [](const Matrix& up, std::span<Matrix> g) {
                  g[0] = up;
                  for (std::size_t i = 0; i < up.rows(); ++i) {
                    for (std::size_t j = 0; j < up.cols(); ++j) g[1](0, j) += up(i, j);
                  }
                });
}

Var GradTape::relu(Var a) {
  const GradTape* self = this;
  return record({a}, fairgraph::relu(value(a)), [self, a](const Matrix& up, std::span<Matrix> g) {
    const auto x = self->value(a).data();
    auto out = g[0].data();
    const auto u = up.data();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? u[i] : 0.0;
  });
}

Var GradTape::sigmoid(Var a) {
  Matrix y = fairgraph::sigmoid(value(a));
  const GradTape* self = this;
  const std::size_t id = nodes_.size();
  return record({a}, std::move(y), [self, id](const Matrix& up, std::span<Matrix> g) {
    const auto s = self->nodes_[id].value.data();
    auto out = g[0].data();
    const auto u = up.data();
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = u[i] * s[i] * (1.0 - s[i]);
  });
}

Var GradTape::neighbor_mean(const Graph& g, Var x) {
  const Graph* graph = &g;
  return record({x}, row_mean_neighbors(g, value(x)),
                [graph](const Matrix& up, std::span<Matrix> grads) {
                  Matrix& gx = grads[0];
                  for (NodeId v = 0; v < graph->num_nodes(); ++v) {
                    auto nb = graph->neighbors(v);
                    if (nb.empty()) continue;
                    const double inv = 1.0 / static_cast<double>(nb.size());
                    auto uv = up.row(v);
                    for (NodeId u : nb) {
                      auto gu = gx.row(u);
                      for (std::size_t j = 0; j < gu.size(); ++j) gu[j] += inv * uv[j];
                    }
                  }
                });
}

Var GradTape::concat_cols(Var a, Var b) {
  const std::size_t ca = value(a).cols();
  const std::size_t cb = value(b).cols();
  return record({a, b}, fairgraph::concat_cols(value(a), value(b)),
                [ca, cb](const Matrix& up, std::span<Matrix> g) {
                  g[0] = fairgraph::slice_cols(up, 0, ca);
                  g[1] = fairgraph::slice_cols(up, ca, cb);
                });
}

Var GradTape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  return record({a}, fairgraph::slice_cols(value(a), begin, count),
                [begin](const Matrix& up, std::span<Matrix> g) {
                  for (std::size_t i = 0; i < up.rows(); ++i) {
                    for (std::size_t j = 0; j < up.cols(); ++j) g[0](i, begin + j) += up(i, j);
                  }
                });
}

Var GradTape::scale(Var a, double factor) {
  Matrix out = value(a);
  for (double& v : out.data()) v *= factor;
  return record({a}, std::move(out), [factor](const Matrix& up, std::span<Matrix> g) {
    auto o = g[0].data();
    const auto u = up.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * u[i];
  });
}

Var GradTape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return record({a}, Matrix(1, 1, s), [](const Matrix& up, std::span<Matrix> g) {
    for (double& v : g[0].data()) v = up(0, 0);
  });
}

Var GradTape::sum_squares(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v * v;
  const GradTape* self = this;
  return record({a}, Matrix(1, 1, s), [self, a](const Matrix& up, std::span<Matrix> g) {
    const auto x = self->value(a).data();
    auto o = g[0].data();
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = 2.0 * x[i] * up(0, 0);
  });
}

Var GradTape::weighted_sum(std::span<const double> weights, std::span<const Var> terms) {
  if (weights.size() != terms.size()) throw InvalidArgument("weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) s += weights[k] * scalar(terms[k]);
  std::vector<double> w(weights.begin(), weights.end());
  return record(std::vector<Var>(terms.begin(), terms.end()), Matrix(1, 1, s),
                [w](const Matrix& up, std::span<Matrix> g) {
                  for (std::size_t k = 0; k < w.size(); ++k) g[k](0, 0) = w[k] * up(0, 0);
                });
}

std::vector<Matrix> GradTape::grad(Var output, std::span<const Var> wrt) const {
  check(output);
  for (const auto& v : wrt) check(v);
  const Matrix& out = nodes_[output.id].value;
  if (out.rows() != 1 || out.cols() != 1) throw TapeError("grad requires a scalar output");

  std::vector<Matrix> adj(output.id + 1);
  adj[output.id] = Matrix(1, 1, 1.0);
  std::vector<Matrix> slots;
  for (std::size_t id = output.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (adj[id].empty() || !node.requires_grad || !node.backward) continue;
    slots.clear();
    for (std::size_t in : node.inputs) {
      const Matrix& iv = nodes_[in].value;
      slots.emplace_back(iv.rows(), iv.cols());
    }
    node.backward(adj[id], slots);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (!slots[k].same_shape(nodes_[in].value)) {
        throw TapeError("backward produced a gradient of the wrong shape");
      }
      if (adj[in].empty()) {
        adj[in] = std::move(slots[k]);
      } else {
        auto a = adj[in].data();
        const auto s = slots[k].data();
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += s[i];
      }
    }
  }

  std::vector<Matrix> result;
  result.reserve(wrt.size());
  for (const auto& v : wrt) {
    const Matrix& val = nodes_[v.id].value;
    if (v.id <= output.id && !adj[v.id].empty()) {
      result.push_back(adj[v.id]);
    } else {
      result.emplace_back(val.rows(), val.cols());
    }
  }
  return result;
}

}  // namespace fairgraph
