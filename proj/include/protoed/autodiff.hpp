#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "protoed/distance.hpp"
#include "protoed/matrix.hpp"

namespace protoed {

// Named trainable array. Row-major when 2-D.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  Vec value;

  Tensor() = default;
  Tensor(std::string n, std::vector<std::size_t> s, double fill = 0.0);

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::span<const double> row(std::size_t r) const { return {value.data() + r * cols(), cols()}; }
  std::span<double> row(std::size_t r) { return {value.data() + r * cols(), cols()}; }
};

struct Var {
  int id = -1;
};

// Reverse-mode tape over vector-valued nodes. Parameters are read through
// const references; their gradients are collected on the tape and fetched
// with grad(tensor) after backward().
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t node_count() const { return nodes_.size(); }

  const Vec& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value[0]; }

  Var constant(Vec v);
  Var param(const Tensor& t);
  Var detach(Var x);

  // (1 / (2r + 1)) * sum_{o=-r..r} pos[o + r] (.) emb[bucket[c + o]] over
  // positions inside [lo, hi). `pos` is (2r + 1) x m.
  Var embed_context(const Tensor& emb, const Tensor& pos, std::span<const std::size_t> buckets,
                    int center, int lo, int hi);
  Var affine(const Tensor& w, const Tensor& b, Var x);
  Var matvec(const Tensor& w, Var x);
  Var tanh(Var x);
  Var softplus(Var x, double floor);
  Var normalize(Var x);
  Var add(Var a, Var b);
  Var scale(Var a, double c);
  Var mean(std::span<const Var> xs);
  Var concat(Var a, Var b);
  // out[i] = src[index[i]], or 0 where index[i] < 0.
  Var gather(Var src, std::vector<int> index);
  // Replaces -inf entries by 0 (gradient 0 there).
  Var finite_or_zero(Var x);

  // out[k] = -mean_{key in keys[k], key != exclude} d(query, key); -inf when
  // the key set is empty after exclusion.
  Var proto_logits(Var query, const std::vector<std::vector<Var>>& keys, const DistanceSpec& d,
                   int exclude = -1);
  // -log softmax(logits)[gold] over the finite entries.
  Var cross_entropy(Var logits, std::size_t gold);
  Var sum(std::span<const Var> scalars);
  // K x K matrix of p_a^T W p_b, W a dim x dim node.
  Var bilinear_matrix(std::span<const Var> protos, Var w);
  // Linear-chain CRF negative log-likelihood; emissions are N nodes of width T.
  Var crf_nll(std::span<const Var> emissions, Var trans, Var start, Var stop, std::vector<int> gold);

  void backward(Var root);

  // Accumulated gradient for a parameter, or nullptr if it was never reached.
  const Vec* grad(const Tensor& t) const;
  const Vec& grad(Var v) const { return nodes_[v.id].grad; }

 private:
  struct Node {
    Vec value;
    Vec grad;
    std::function<void(Tape&, int)> backward;
  };

  Var push(Vec value, std::function<void(Tape&, int)> backward);
  Vec& grad_ref(int id);
  Vec& param_grad(const Tensor& t);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, Vec> param_grads_;
};

}  // namespace protoed
