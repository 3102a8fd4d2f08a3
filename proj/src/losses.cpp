#include "fairgraph/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <unordered_set>

#include "fairgraph/errors.hpp"
#include "fairgraph/rng.hpp"

namespace fairgraph {

namespace {

constexpr double kProbFloor = 1e-12;

// Loss value with its gradient for each matrix input.
struct Eval {
  double value = 0.0;
  std::vector<Matrix> grads;
};

Var record_eval(GradTape& tape, std::vector<Var> inputs, Eval ev) {
  auto grads = std::make_shared<std::vector<Matrix>>(std::move(ev.grads));
  return tape.record(std::move(inputs), Matrix(1, 1, ev.value),
                     [grads](const Matrix& up, std::span<Matrix> g) {
                       const double s = up(0, 0);
                       for (std::size_t k = 0; k < g.size(); ++k) {
                         auto dst = g[k].data();
                         const auto src = (*grads)[k].data();
                         for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = s * src[i];
                       }
                     });
}

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw ShapeError(std::string(what) + " length does not match node count");
}

// Cosine of two rows and, when the output spans are non-empty, the partial
// derivatives accumulated with factor `w`. Zero rows give cos = 0 and no
// gradient.
double cosine_grad(std::span<const double> x, std::span<const double> y, double w,
                   std::span<double> gx, std::span<double> gy, bool* zero = nullptr) {
  const double nx = l2_norm(x);
  const double ny = l2_norm(y);
  if (nx == 0.0 || ny == 0.0) {
    if (zero) *zero = true;
    return 0.0;
  }
  const double c = dot(x, y) / (nx * ny);
  if (w != 0.0) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!gx.empty()) gx[k] += w * (y[k] / (nx * ny) - c * x[k] / (nx * nx));
      if (!gy.empty()) gy[k] += w * (x[k] / (nx * ny) - c * y[k] / (ny * ny));
    }
  }
  return c;
}

// ||x - y|| with gradient accumulation; zero distance contributes none.
double distance_grad(std::span<const double> x, std::span<const double> y, double w,
                     std::span<double> gx, std::span<double> gy) {
  const double d = std::sqrt(squared_distance(x, y));
  if (d > 0.0 && w != 0.0) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double t = w * (x[k] - y[k]) / d;
      gx[k] += t;
      gy[k] -= t;
    }
  }
  return d;
}

Eval pred_eval(const Matrix& probs, std::span<const std::int8_t> labels,
               std::span<const std::uint8_t> mask) {
  if (probs.cols() != 1) throw ShapeError("probabilities must be a column");
  check_length(labels.size(), probs.rows(), "labels");
  check_length(mask.size(), probs.rows(), "mask");
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("masked node has no label");
    ++count;
  }
  if (count == 0) throw EmptyInputError("prediction loss over an empty mask");
  Eval ev;
  ev.grads.emplace_back(probs.rows(), 1);
  Matrix& g = ev.grads[0];
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double p = probs(i, 0);
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    const bool inside = p > kProbFloor && p < 1.0 - kProbFloor;
    if (labels[i] == 1) {
      ev.value -= std::log(pc);
      if (inside) g(i, 0) = -inv / pc;
    } else {
      ev.value -= std::log(1.0 - pc);
      if (inside) g(i, 0) = inv / (1.0 - pc);
    }
  }
  ev.value *= inv;
  return ev;
}

Eval inv_eval(const Matrix& c, const Matrix& e, const CounterfactualIndex& cf, double gamma,
              DisMetric metric, InvStats* stats) {
  if (c.rows() != e.rows()) throw ShapeError("content and environment row counts differ");
  check_length(cf.size(), c.rows(), "counterfactual index");
  const std::size_t n = c.rows();
  Eval ev;
  ev.grads.emplace_back(c.rows(), c.cols());
  ev.grads.emplace_back(e.rows(), e.cols());
  Matrix& gc = ev.grads[0];
  Matrix& ge = ev.grads[1];
  InvStats local;
  const std::size_t ne = cf.e_pairs();
  const std::size_t nc = cf.c_pairs();

  auto dis = [&](const Matrix& m, Matrix& g, std::size_t i, std::size_t j, double w) {
    if (metric == DisMetric::L2) return distance_grad(m.row(i), m.row(j), w, g.row(i), g.row(j));
    bool zero = false;
    const double cs = cosine_grad(m.row(i), m.row(j), -w, g.row(i), g.row(j), &zero);
    if (zero) ++local.zero_vectors;
    return 1.0 - cs;
  };

  if (ne > 0) {
    const double w = 1.0 / static_cast<double>(ne);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (NodeId j : cf.e_cf[i]) sum += dis(c, gc, i, j, w);
    }
    ev.value += sum * w;
  }
  if (nc > 0) {
    const double w = 1.0 / static_cast<double>(nc);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (NodeId j : cf.c_cf[i]) sum += dis(e, ge, i, j, w);
    }
    ev.value += sum * w;
  }
  if (gamma != 0.0 && n > 0) {
    const double w = gamma / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bool zero = false;
      const double cs = cosine_grad(c.row(i), e.row(i), 0.0, {}, {}, &zero);
      if (zero) {
        ++local.zero_vectors;
        continue;
      }
      const double sign = (cs > 0.0) - (cs < 0.0);
      cosine_grad(c.row(i), e.row(i), w * sign, gc.row(i), ge.row(i));
      sum += std::abs(cs);
    }
    ev.value += sum * w;
  }
  if (stats) *stats = local;
  return ev;
}

Eval suf_eval(const Matrix& h, std::span<const Edge> pos, std::span<const Edge> neg) {
  if (pos.empty() || neg.empty()) throw EmptyInputError("sufficiency loss needs both edge sets");
  Eval ev;
  ev.grads.emplace_back(h.rows(), h.cols());
  Matrix& g = ev.grads[0];
  const double inv = 1.0 / static_cast<double>(pos.size() + neg.size());
  auto term = [&](const Edge& ed, int a) {
    if (ed.u >= h.rows() || ed.v >= h.rows()) throw InvalidArgument("edge endpoint out of range");
    const auto hu = h.row(ed.u);
    const auto hv = h.row(ed.v);
    const double p = sigmoid(dot(hu, hv));
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    const bool inside = p > kProbFloor && p < 1.0 - kProbFloor;
    ev.value -= a ? std::log(pc) : std::log(1.0 - pc);
    if (inside) {
      const double dz = (p - a) * inv;
      auto gu = g.row(ed.u);
      auto gv = g.row(ed.v);
      for (std::size_t k = 0; k < hu.size(); ++k) {
        gu[k] += dz * hv[k];
        gv[k] += dz * hu[k];
      }
    }
  };
  for (const auto& ed : pos) term(ed, 1);
  for (const auto& ed : neg) term(ed, 0);
  ev.value *= inv;
  return ev;
}

Eval sc_eval(const Matrix& c, std::span<const std::int8_t> labels,
             std::span<const std::uint8_t> mask, double kappa) {
  check_length(labels.size(), c.rows(), "labels");
  check_length(mask.size(), c.rows(), "mask");
  if (kappa < 0.0) throw InvalidArgument("kappa must be nonnegative");
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && (labels[i] == 0 || labels[i] == 1)) anchors.push_back(i);
  }
  if (anchors.size() < 2) throw EmptyInputError("contrastive loss needs two labeled nodes");
  const std::size_t l = anchors.size();
  const std::size_t d = c.cols();

  // Unit rows and norms; zero rows keep a zero unit vector (cos = 0).
  Matrix u(l, d);
  std::vector<double> norm(l);
  for (std::size_t a = 0; a < l; ++a) {
    norm[a] = l2_norm(c.row(anchors[a]));
    if (norm[a] > 0.0) {
      for (std::size_t k = 0; k < d; ++k) u(a, k) = c(anchors[a], k) / norm[a];
    }
  }
  Matrix cosm(l, l);
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t b = a + 1; b < l; ++b) {
      const double v = dot(u.row(a), u.row(b));
      cosm(a, b) = v;
      cosm(b, a) = v;
    }
  }

  Eval ev;
  ev.grads.emplace_back(c.rows(), d);
  // dL/dcos for every ordered pair, folded into the rows afterwards.
  Matrix dcos(l, l);
  std::vector<double> phi(l), weight(l);
  bool any = false;
  for (std::size_t a = 0; a < l; ++a) {
    std::size_t positives = 0;
    for (std::size_t b = 0; b < l; ++b) {
      if (b != a && labels[anchors[b]] == labels[anchors[a]]) ++positives;
    }
    if (positives == 0) continue;
    any = true;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < l; ++b) {
      if (b == a) continue;
      phi[b] = tvmf_from_cos(cosm(a, b), kappa);
      mx = std::max(mx, phi[b]);
    }
    double z = 0.0;
    for (std::size_t b = 0; b < l; ++b) {
      if (b != a) z += std::exp(phi[b] - mx);
    }
    const double logz = mx + std::log(z);
    const double inv_p = 1.0 / static_cast<double>(positives);
    double pos_sum = 0.0;
    for (std::size_t b = 0; b < l; ++b) {
      if (b == a) continue;
      const bool is_pos = labels[anchors[b]] == labels[anchors[a]];
      if (is_pos) pos_sum += phi[b];
      const double dphi = std::exp(phi[b] - logz) - (is_pos ? inv_p : 0.0);
      const double den = 1.0 + kappa * (1.0 - cosm(a, b));
      dcos(a, b) += dphi * (1.0 + 2.0 * kappa) / (den * den);
    }
    ev.value += logz - pos_sum * inv_p;
  }
  if (!any) throw EmptyInputError("every positive set is empty");

  Matrix& g = ev.grads[0];
  for (std::size_t a = 0; a < l; ++a) {
    if (norm[a] == 0.0) continue;
    auto ga = g.row(anchors[a]);
    for (std::size_t b = 0; b < l; ++b) {
      if (b == a || norm[b] == 0.0) continue;
      // cos(a,b) appears in anchor a's and anchor b's terms.
      const double w = (dcos(a, b) + dcos(b, a)) / norm[a];
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) ga[k] += w * (u(b, k) - cosm(a, b) * u(a, k));
    }
  }
  return ev;
}

Eval env_eval(const Matrix& e, std::span<const std::uint8_t> sensitive, std::size_t K_prime) {
  check_length(sensitive.size(), e.rows(), "sensitive");
  if (K_prime == 0) throw InvalidArgument("K' must be positive");
  const std::size_t n = e.rows();
  std::vector<NodeId> group[2];
  for (std::size_t i = 0; i < n; ++i) {
    if (sensitive[i] > 1) throw InvalidArgument("sensitive attribute must be 0 or 1");
    group[sensitive[i]].push_back(static_cast<NodeId>(i));
  }
  if (group[0].empty() || group[1].empty()) {
    throw EmptyInputError("environmental loss needs both sensitive groups");
  }
  Eval ev;
  ev.grads.emplace_back(e.rows(), e.cols());
  Matrix& g = ev.grads[0];
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::pair<double, NodeId>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = group[1 - sensitive[i]];
    cand.clear();
    for (NodeId j : pool) cand.emplace_back(squared_distance(e.row(i), e.row(j)), j);
    const std::size_t k = std::min(K_prime, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    const double w = -inv_n / static_cast<double>(k);
    double sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      sum += distance_grad(e.row(i), e.row(cand[t].second), w, g.row(i), g.row(cand[t].second));
    }
    ev.value -= sum / static_cast<double>(k) * inv_n;
  }
  return ev;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, omega, eta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("loss weights must be nonnegative");
  }
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InvalidArgument("kappa must be nonnegative");
  if (K == 0 || K_prime == 0) throw InvalidArgument("K and K' must be positive");
}

std::size_t CounterfactualIndex::e_pairs() const {
  std::size_t t = 0;
  for (const auto& l : e_cf) t += l.size();
  return t;
}

std::size_t CounterfactualIndex::c_pairs() const {
  std::size_t t = 0;
  for (const auto& l : c_cf) t += l.size();
  return t;
}

CounterfactualIndex select_counterfactuals(const Matrix& h, std::span<const std::int8_t> labels,
                                           std::span<const std::uint8_t> sensitive,
                                           std::size_t K) {
  const std::size_t n = h.rows();
  check_length(labels.size(), n, "labels");
  check_length(sensitive.size(), n, "sensitive");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("counterfactuals need a label for every node");
    if (sensitive[i] > 1) throw InvalidArgument("sensitive attribute must be 0 or 1");
  }
  CounterfactualIndex cf;
  cf.e_cf.resize(n);
  cf.c_cf.resize(n);
  cf.e_dist.resize(n);
  cf.c_dist.resize(n);
  std::vector<std::pair<double, NodeId>> ecand, ccand;
  auto keep = [K](std::vector<std::pair<double, NodeId>>& cand, std::vector<NodeId>& ids,
                  std::vector<double>& dist) {
    const std::size_t k = std::min(K, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t t = 0; t < k; ++t) {
      ids.push_back(cand[t].second);
      dist.push_back(std::sqrt(cand[t].first));
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    ecand.clear();
    ccand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool same_y = labels[j] == labels[i];
      const bool same_s = sensitive[j] == sensitive[i];
      if (same_y == same_s) continue;
      const double d = squared_distance(h.row(i), h.row(j));
      (same_y ? ecand : ccand).emplace_back(d, static_cast<NodeId>(j));
    }
    if (ecand.empty()) ++cf.empty_e;
    if (ccand.empty()) ++cf.empty_c;
    keep(ecand, cf.e_cf[i], cf.e_dist[i]);
    keep(ccand, cf.c_cf[i], cf.c_dist[i]);
  }
  return cf;
}

double pred_loss(const Matrix& probs, std::span<const std::int8_t> labels,
                 std::span<const std::uint8_t> mask) {
  return pred_eval(probs, labels, mask).value;
}

Var pred_loss(GradTape& tape, Var probs, std::span<const std::int8_t> labels,
              std::span<const std::uint8_t> mask) {
  return record_eval(tape, {probs}, pred_eval(tape.value(probs), labels, mask));
}

double inv_loss(const Matrix& c, const Matrix& e, const CounterfactualIndex& cf, double gamma,
                DisMetric metric, InvStats* stats) {
  return inv_eval(c, e, cf, gamma, metric, stats).value;
}

Var inv_loss(GradTape& tape, Var c, Var e, const CounterfactualIndex& cf, double gamma,
             DisMetric metric, InvStats* stats) {
  return record_eval(tape, {c, e},
                     inv_eval(tape.value(c), tape.value(e), cf, gamma, metric, stats));
}

std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed) {
  const std::uint64_t n = g.num_nodes();
  const std::uint64_t pairs = n * (n - (n > 0 ? 1 : 0)) / 2;
  const std::uint64_t capacity = pairs - g.num_edges();
  if (count > capacity) throw CapacityError("not enough non-adjacent pairs to sample from");
  Rng rng(seed);
  std::vector<Edge> out;
  out.reserve(count);
  auto decode = [n](std::uint64_t idx) {
    // Row-major enumeration of pairs u < v.
    NodeId u = 0;
    std::uint64_t row = n - 1;
    while (idx >= row) {
      idx -= row;
      ++u;
      --row;
    }
    return Edge{u, static_cast<NodeId>(u + 1 + idx)};
  };
  if (count * 2 <= capacity) {
    std::unordered_set<std::uint64_t> seen;
    while (out.size() < count) {
      const NodeId u = static_cast<NodeId>(uniform_below(rng, n));
      const NodeId v = static_cast<NodeId>(uniform_below(rng, n));
      if (u == v) continue;
      const Edge ed{std::min(u, v), std::max(u, v)};
      if (g.has_edge(ed.u, ed.v)) continue;
      if (!seen.insert(std::uint64_t{ed.u} * n + ed.v).second) continue;
      out.push_back(ed);
    }
    return out;
  }
  // Dense regime: enumerate every non-edge and take a random prefix.
  std::vector<Edge> all;
  all.reserve(capacity);
  for (std::uint64_t idx = 0; idx < pairs; ++idx) {
    const Edge ed = decode(idx);
    if (!g.has_edge(ed.u, ed.v)) all.push_back(ed);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_below(rng, all.size() - i);
    std::swap(all[i], all[j]);
    out.push_back(all[i]);
  }
  return out;
}

double suf_loss(const Matrix& h, std::span<const Edge> pos, std::span<const Edge> neg) {
  return suf_eval(h, pos, neg).value;
}

Var suf_loss(GradTape& tape, Var h, std::span<const Edge> pos, std::span<const Edge> neg) {
  return record_eval(tape, {h}, suf_eval(tape.value(h), pos, neg));
}

double tvmf_from_cos(double cos, double kappa) {
  return (1.0 + cos) / (1.0 + kappa * (1.0 - cos)) - 1.0;
}

double tvmf(std::span<const double> a, std::span<const double> b, double kappa) {
  if (a.size() != b.size()) throw ShapeError("t-vMF arguments differ in length");
  return tvmf_from_cos(cosine(a, b), kappa);
}

double sc_loss(const Matrix& c, std::span<const std::int8_t> labels,
               std::span<const std::uint8_t> mask, double kappa) {
  return sc_eval(c, labels, mask, kappa).value;
}

Var sc_loss(GradTape& tape, Var c, std::span<const std::int8_t> labels,
            std::span<const std::uint8_t> mask, double kappa) {
  return record_eval(tape, {c}, sc_eval(tape.value(c), labels, mask, kappa));
}

double env_loss(const Matrix& e, std::span<const std::uint8_t> sensitive, std::size_t K_prime) {
  return env_eval(e, sensitive, K_prime).value;
}

Var env_loss(GradTape& tape, Var e, std::span<const std::uint8_t> sensitive,
             std::size_t K_prime) {
  return record_eval(tape, {e}, env_eval(tape.value(e), sensitive, K_prime));
}

double total_loss(const LossParts& p, const LossWeights& w) {
  for (double v : {p.pred, p.inv, p.suf, p.sc, p.env}) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss component");
  }
  return p.pred + w.alpha * p.inv + w.beta * p.suf + w.omega * p.sc + w.eta * p.env;
}

}  // namespace fairgraph
