#include "protoed/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "protoed/crf.hpp"
#include <memory>

#include "protoed/error.hpp"

namespace protoed {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Tensor::Tensor(std::string n, std::vector<std::size_t> s, double fill) : name(std::move(n)), shape(std::move(s)) {
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  value.assign(total, fill);
}

Var Tape::push(Vec value, std::function<void(Tape&, int)> backward) {
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Vec& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Vec& Tape::param_grad(const Tensor& t) {
  Vec& g = param_grads_[&t];
  if (g.empty()) g.assign(t.size(), 0.0);
  return g;
}

const Vec* Tape::grad(const Tensor& t) const {
  auto it = param_grads_.find(&t);
  return it == param_grads_.end() ? nullptr : &it->second;
}

Var Tape::constant(Vec v) { return push(std::move(v), nullptr); }

Var Tape::param(const Tensor& t) {
  const Tensor* tp = &t;
  return push(t.value, [tp](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& pg = tape.param_grad(*tp);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
}

Var Tape::detach(Var x) { return push(value(x), nullptr); }

Var Tape::embed_context(const Tensor& emb, const Tensor& pos, std::span<const std::size_t> buckets, int center,
                        int lo, int hi) {
  const std::size_t m = emb.cols();
  const int width = static_cast<int>(pos.rows());
  const int radius = width / 2;
  const double inv = 1.0 / static_cast<double>(width);
  Vec out(m, 0.0);
  std::vector<std::pair<int, std::size_t>> used;  // (offset row, bucket)
  for (int o = -radius; o <= radius; ++o) {
    const int p = center + o;
    if (p < lo || p >= hi) continue;
    const std::size_t b = buckets[p];
    const auto e = emb.row(b);
    const auto w = pos.row(static_cast<std::size_t>(o + radius));
    for (std::size_t k = 0; k < m; ++k) out[k] += inv * w[k] * e[k];
    used.emplace_back(o + radius, b);
  }
  const Tensor* ep = &emb;
  const Tensor* pp = &pos;
  return push(std::move(out), [ep, pp, used = std::move(used), inv, m](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& ge = tape.param_grad(*ep);
    Vec& gp = tape.param_grad(*pp);
    for (auto [r, b] : used) {
      const auto e = ep->row(b);
      const auto w = pp->row(static_cast<std::size_t>(r));
      double* ger = ge.data() + b * m;
      double* gpr = gp.data() + static_cast<std::size_t>(r) * m;
      for (std::size_t k = 0; k < m; ++k) {
        ger[k] += inv * g[k] * w[k];
        gpr[k] += inv * g[k] * e[k];
      }
    }
  });
}

Var Tape::matvec(const Tensor& w, Var x) {
  const Vec& xv = value(x);
  if (w.cols() != xv.size()) {
    throw ShapeError("matvec: " + w.name + " expects " + std::to_string(w.cols()) + " inputs, got " +
                     std::to_string(xv.size()));
  }
  Vec out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] = dot(w.row(r), xv);
  const Tensor* wp = &w;
  return push(std::move(out), [wp, x](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    const Vec& xv = tape.nodes_[x.id].value;
    Vec& gw = tape.param_grad(*wp);
    Vec& gx = tape.grad_ref(x.id);
    const std::size_t cols = wp->cols();
    for (std::size_t r = 0; r < wp->rows(); ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      const auto wr = wp->row(r);
      double* gwr = gw.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        gwr[c] += gr * xv[c];
        gx[c] += gr * wr[c];
      }
    }
  });
}

Var Tape::affine(const Tensor& w, const Tensor& b, Var x) {
  Var y = matvec(w, x);
  if (b.size() != w.rows()) throw ShapeError("affine: bias " + b.name + " size mismatch");
  Vec out = value(y);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += b.value[r];
  const Tensor* bp = &b;
  return push(std::move(out), [bp, y](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& gb = tape.param_grad(*bp);
    Vec& gy = tape.grad_ref(y.id);
    for (std::size_t r = 0; r < g.size(); ++r) {
      gb[r] += g[r];
      gy[r] += g[r];
    }
  });
}

Var Tape::tanh(Var x) {
  Vec out = value(x);
  for (double& v : out) v = std::tanh(v);
  return push(std::move(out), [x](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    const Vec& y = tape.nodes_[self].value;
    Vec& gx = tape.grad_ref(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::softplus(Var x, double floor) {
  const Vec& xv = value(x);
  Vec out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = (v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v))) + floor;
  }
  return push(std::move(out), [x](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    const Vec& xv = tape.nodes_[x.id].value;
    Vec& gx = tape.grad_ref(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / (1.0 + std::exp(-xv[i]));
  });
}

Var Tape::normalize(Var x) {
  const Vec& xv = value(x);
  const double norm = std::sqrt(dot(xv, xv));
  if (!(norm > 0.0)) throw NumericError("normalize: zero vector");
  Vec out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / norm;
  return push(std::move(out), [x, norm](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    const Vec& y = tape.nodes_[self].value;
    Vec& gx = tape.grad_ref(x.id);
    const double yg = dot(y, g);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (g[i] - y[i] * yg) / norm;
  });
}

Var Tape::add(Var a, Var b) {
  const Vec& av = value(a);
  const Vec& bv = value(b);
  if (av.size() != bv.size()) throw ShapeError("add: size mismatch");
  Vec out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return push(std::move(out), [a, b](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& ga = tape.grad_ref(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Vec& gb = tape.grad_ref(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var Tape::scale(Var a, double c) {
  Vec out = value(a);
  for (double& v : out) v *= c;
  return push(std::move(out), [a, c](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& ga = tape.grad_ref(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var Tape::mean(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("mean: no inputs");
  const std::size_t n = value(xs[0]).size();
  Vec out(n, 0.0);
  for (Var x : xs) {
    const Vec& v = value(x);
    if (v.size() != n) throw ShapeError("mean: size mismatch");
    for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& v : out) v *= inv;
  std::vector<Var> inputs(xs.begin(), xs.end());
  return push(std::move(out), [inputs = std::move(inputs), inv](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    for (Var x : inputs) {
      Vec& gx = tape.grad_ref(x.id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += inv * g[i];
    }
  });
}

Var Tape::concat(Var a, Var b) {
  Vec out = value(a);
  const std::size_t na = out.size();
  const Vec& bv = value(b);
  out.insert(out.end(), bv.begin(), bv.end());
  return push(std::move(out), [a, b, na](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& ga = tape.grad_ref(a.id);
    for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
    Vec& gb = tape.grad_ref(b.id);
    for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
  });
}

Var Tape::gather(Var src, std::vector<int> index) {
  const Vec& sv = value(src);
  Vec out(index.size(), 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= 0) out[i] = sv.at(static_cast<std::size_t>(index[i]));
  }
  return push(std::move(out), [src, index = std::move(index)](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    Vec& gs = tape.grad_ref(src.id);
    for (std::size_t i = 0; i < index.size(); ++i)
      if (index[i] >= 0) gs[index[i]] += g[i];
  });
}

Var Tape::finite_or_zero(Var x) {
  Vec out = value(x);
  for (double& v : out)
    if (v == kNegInf) v = 0.0;
  return push(std::move(out), [x](Tape& tape, int self) {
    const Vec& g = tape.nodes_[self].grad;
    const Vec& xv = tape.nodes_[x.id].value;
    Vec& gx = tape.grad_ref(x.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] != kNegInf) gx[i] += g[i];
  });
}

Var Tape::proto_logits(Var query, const std::vector<std::vector<Var>>& keys, const DistanceSpec& d, int exclude) {
  const Vec& q = value(query);
  Vec out(keys.size(), kNegInf);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    double s = 0.0;
    std::size_t count = 0;
    for (Var key : keys[k]) {
      if (key.id == exclude) continue;
      s += distance(q, value(key), d);
      ++count;
    }
    if (count > 0) out[k] = -s / static_cast<double>(count);
  }
  return push(std::move(out), [query, keys, d, exclude](Tape& tape, int self) {
    const Vec g = tape.nodes_[self].grad;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (g[k] == 0.0) continue;
      std::size_t count = 0;
      for (Var key : keys[k])
        if (key.id != exclude) ++count;
      if (count == 0) continue;
      const double up = -g[k] / static_cast<double>(count);
      for (Var key : keys[k]) {
        if (key.id == exclude) continue;
        Vec& gq = tape.grad_ref(query.id);
        Vec& gk = tape.grad_ref(key.id);
        distance_backward(tape.nodes_[query.id].value, tape.nodes_[key.id].value, d, up, gq, gk);
      }
    }
  });
}

Var Tape::cross_entropy(Var logits, std::size_t gold) {
  const Vec& l = value(logits);
  if (gold >= l.size() || l[gold] == kNegInf) throw NumericError("cross_entropy: gold class has no logit");
  double mx = kNegInf;
  for (double v : l) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : l)
    if (v != kNegInf) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  return push(Vec{lse - l[gold]}, [logits, gold, lse](Tape& tape, int self) {
    const double g = tape.nodes_[self].grad[0];
    const Vec& l = tape.nodes_[logits.id].value;
    Vec& gl = tape.grad_ref(logits.id);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i] == kNegInf) continue;
      gl[i] += g * (std::exp(l[i] - lse) - (i == gold ? 1.0 : 0.0));
    }
  });
}

Var Tape::sum(std::span<const Var> xs) {
  double s = 0.0;
  for (Var x : xs) s += value(x)[0];
  std::vector<Var> inputs(xs.begin(), xs.end());
  return push(Vec{s}, [inputs = std::move(inputs)](Tape& tape, int self) {
    const double g = tape.nodes_[self].grad[0];
    for (Var x : inputs) tape.grad_ref(x.id)[0] += g;
  });
}

Var Tape::bilinear_matrix(std::span<const Var> protos, Var w) {
  const std::size_t K = protos.size();
  if (K == 0) throw ShapeError("bilinear_matrix: no prototypes");
  const std::size_t dim = value(protos[0]).size();
  const Vec& wv = value(w);
  if (wv.size() != dim * dim) throw ShapeError("bilinear_matrix: W must be dim x dim");
  // wp[b] = W p_b
  std::vector<Vec> wp(K, Vec(dim, 0.0));
  for (std::size_t b = 0; b < K; ++b) {
    const Vec& p = value(protos[b]);
    if (p.size() != dim) throw ShapeError("bilinear_matrix: prototype dimension mismatch");
    for (std::size_t r = 0; r < dim; ++r) wp[b][r] = dot(std::span<const double>(wv.data() + r * dim, dim), p);
  }
  Vec out(K * K);
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b) out[a * K + b] = dot(value(protos[a]), wp[b]);
  std::vector<Var> inputs(protos.begin(), protos.end());
  return push(std::move(out), [inputs = std::move(inputs), w, K, dim](Tape& tape, int self) {
    const Vec g = tape.nodes_[self].grad;
    const Vec& wv = tape.nodes_[w.id].value;
    std::vector<Vec> pv(K);
    for (std::size_t a = 0; a < K; ++a) pv[a] = tape.nodes_[inputs[a].id].value;
    Vec& gw = tape.grad_ref(w.id);
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        const double gab = g[a * K + b];
        if (gab == 0.0) continue;
        Vec& ga = tape.grad_ref(inputs[a].id);
        for (std::size_t r = 0; r < dim; ++r) {
          double wpb = 0.0;
          for (std::size_t c = 0; c < dim; ++c) wpb += wv[r * dim + c] * pv[b][c];
          ga[r] += gab * wpb;
        }
        Vec& gb = tape.grad_ref(inputs[b].id);
        for (std::size_t c = 0; c < dim; ++c) {
          double wta = 0.0;
          for (std::size_t r = 0; r < dim; ++r) wta += wv[r * dim + c] * pv[a][r];
          gb[c] += gab * wta;
        }
        for (std::size_t r = 0; r < dim; ++r)
          for (std::size_t c = 0; c < dim; ++c) gw[r * dim + c] += gab * pv[a][r] * pv[b][c];
      }
    }
  });
}

Var Tape::crf_nll(std::span<const Var> emissions, Var trans, Var start, Var stop, std::vector<int> gold) {
  const std::size_t n = emissions.size();
  if (n == 0 || gold.size() != n) throw ShapeError("crf_nll: emissions and gold must be non-empty and aligned");
  const std::size_t T = value(start).size();
  Matrix em(n, T);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& e = value(emissions[i]);
    if (e.size() != T) throw ShapeError("crf_nll: emission width mismatch");
    std::copy(e.begin(), e.end(), em.row(i).begin());
  }
  TransitionTable tb(T);
  tb.trans.data = value(trans);
  tb.start = value(start);
  tb.stop = value(stop);
  auto grad = std::make_shared<CrfGradient>();
  const double nll = protoed::crf_nll(em, tb, gold, record_ ? grad.get() : nullptr);
  if (!std::isfinite(nll)) throw NumericError("crf_nll: non-finite likelihood (gold path forbidden?)");
  std::vector<Var> inputs(emissions.begin(), emissions.end());
  return push(Vec{nll}, [inputs = std::move(inputs), trans, start, stop, grad](Tape& tape, int self) {
    const double g = tape.nodes_[self].grad[0];
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Vec& ge = tape.grad_ref(inputs[i].id);
      const auto row = grad->emissions.row(i);
      for (std::size_t t = 0; t < row.size(); ++t) ge[t] += g * row[t];
    }
    Vec& gt = tape.grad_ref(trans.id);
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g * grad->trans.data[i];
    Vec& gs = tape.grad_ref(start.id);
    Vec& gp = tape.grad_ref(stop.id);
    for (std::size_t t = 0; t < gs.size(); ++t) {
      gs[t] += g * grad->start[t];
      gp[t] += g * grad->stop[t];
    }
  });
}

void Tape::backward(Var root) {
  if (!record_) throw NumericError("backward on a non-recording tape");
  grad_ref(root.id).assign(nodes_[root.id].value.size(), 1.0);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

}  // namespace protoed
