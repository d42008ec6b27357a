#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "protoed/autodiff.hpp"
#include "protoed/error.hpp"
#include "protoed/random.hpp"

using namespace protoed;

namespace {

Tensor rand_tensor(Rng& rng, std::string name, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(name), std::move(shape));
  for (double& v : t.value) v = scale * standard_normal(rng);
  return t;
}

// Compares tape gradients of a scalar graph against central differences for
// every entry of every tensor.
void check_grad(const std::function<Var(Tape&)>& build, const std::vector<Tensor*>& params, double tol = 1e-6) {
  Tape tape;
  Var out = build(tape);
  ASSERT_EQ(tape.value(out).size(), 1u);
  tape.backward(out);
  const double h = 1e-6;
  for (Tensor* t : params) {
    const Vec* g = tape.grad(*t);
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double keep = t->value[i];
      t->value[i] = keep + h;
      Tape a(false);
      const double fp = a.scalar(build(a));
      t->value[i] = keep - h;
      Tape b(false);
      const double fm = b.scalar(build(b));
      t->value[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double an = g ? (*g)[i] : 0.0;
      EXPECT_NEAR(an, fd, tol * std::max(1.0, std::abs(fd))) << t->name << "[" << i << "]";
    }
  }
}

// A smooth scalar readout for vector-valued nodes.
Var readout(Tape& t, Var v) { return t.cross_entropy(v, 0); }

}  // namespace

TEST(Autodiff, AffineTanhSoftplus) {
  Rng rng(1);
  Tensor w = rand_tensor(rng, "w", {3, 4}), b = rand_tensor(rng, "b", {3}), x = rand_tensor(rng, "x", {4});
  check_grad([&](Tape& t) { return readout(t, t.tanh(t.affine(w, b, t.param(x)))); }, {&w, &b, &x});
  check_grad([&](Tape& t) { return readout(t, t.softplus(t.matvec(w, t.param(x)), 1e-3)); }, {&w, &x});
}

TEST(Autodiff, EmbedContext) {
  Rng rng(2);
  Tensor emb = rand_tensor(rng, "emb", {7, 3}), pos = rand_tensor(rng, "pos", {5, 3});
  const std::vector<std::size_t> buckets{1, 4, 4, 6, 0};
  for (int c : {0, 2, 4}) {
    check_grad([&](Tape& t) { return readout(t, t.embed_context(emb, pos, buckets, c, 0, 5)); }, {&emb, &pos});
  }
  // Window clipped to [1, 3): offsets outside contribute nothing.
  Tape t(false);
  Vec v = t.value(t.embed_context(emb, pos, buckets, 2, 1, 3));
  for (std::size_t k = 0; k < 3; ++k) {
    const double expect = (pos.row(1)[k] * emb.row(4)[k] + pos.row(2)[k] * emb.row(4)[k]) / 5.0;
    EXPECT_NEAR(v[k], expect, 1e-12);
  }
}

TEST(Autodiff, NormalizeMeanConcatScaleAdd) {
  Rng rng(3);
  Tensor a = rand_tensor(rng, "a", {4}), b = rand_tensor(rng, "b", {4}), c = rand_tensor(rng, "c", {2});
  check_grad([&](Tape& t) { return readout(t, t.normalize(t.param(a))); }, {&a});
  check_grad(
      [&](Tape& t) {
        const Var xs[2] = {t.param(a), t.scale(t.param(b), -0.7)};
        return readout(t, t.concat(t.mean(xs), t.param(c)));
      },
      {&a, &b, &c});
  check_grad([&](Tape& t) { return readout(t, t.add(t.param(a), t.normalize(t.param(b)))); }, {&a, &b});
  Tape t(false);
  EXPECT_THROW(t.normalize(t.constant(Vec(3, 0.0))), NumericError);
}

TEST(Autodiff, GatherAndFiniteOrZero) {
  Rng rng(4);
  Tensor a = rand_tensor(rng, "a", {3});
  check_grad([&](Tape& t) { return readout(t, t.gather(t.param(a), {2, -1, 0, 2})); }, {&a});
  Tape t(false);
  Var v = t.constant({1.0, -std::numeric_limits<double>::infinity(), 2.0});
  EXPECT_EQ(t.value(t.finite_or_zero(v)), (Vec{1.0, 0.0, 2.0}));
  EXPECT_EQ(t.value(t.gather(v, {2, -1})), (Vec{2.0, 0.0}));
}

TEST(Autodiff, DetachBlocksGradient) {
  Rng rng(5);
  Tensor a = rand_tensor(rng, "a", {3});
  Tape t;
  Var out = readout(t, t.add(t.detach(t.param(a)), t.param(a)));
  t.backward(out);
  Tape ref;
  Var r = readout(ref, ref.add(ref.constant(a.value), ref.param(a)));
  ref.backward(r);
  ASSERT_NE(t.grad(a), nullptr);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR((*t.grad(a))[i], (*ref.grad(a))[i], 1e-12);
}

TEST(Autodiff, ProtoLogitsAllDistances) {
  Rng rng(6);
  Tensor q = rand_tensor(rng, "q", {4}), k1 = rand_tensor(rng, "k1", {4}), k2 = rand_tensor(rng, "k2", {4});
  Tensor k3 = rand_tensor(rng, "k3", {4});
  for (auto kind : {DistanceKind::Cosine, DistanceKind::ScaledCosine, DistanceKind::Euclidean,
                    DistanceKind::ScaledEuclidean, DistanceKind::GaussianDivergence}) {
    const bool g = kind == DistanceKind::GaussianDivergence;
    auto in = [&](Tape& t, const Tensor& x) {
      if (!g) return t.param(x);
      // [mean; positive variance]
      Var p = t.param(x);
      return t.concat(p, t.softplus(p, 1e-3));
    };
    check_grad(
        [&](Tape& t) {
          Var qv = in(t, q);
          std::vector<std::vector<Var>> keys{{in(t, k1), in(t, k2)}, {in(t, k3)}, {qv}};
          // The query's own key is excluded, leaving slot 2 empty (-inf).
          return t.cross_entropy(t.proto_logits(qv, keys, {kind, 0.3}, qv.id), 1);
        },
        {&q, &k1, &k2, &k3});
  }
  Tape t(false);
  Var qv = t.param(q);
  std::vector<std::vector<Var>> keys{{t.param(k1), t.param(k2)}, {}};
  const Vec l = t.value(t.proto_logits(qv, keys, {DistanceKind::Euclidean, 1.0}));
  EXPECT_TRUE(std::isinf(l[1]) && l[1] < 0);
  double d1 = 0, d2 = 0;
  for (int i = 0; i < 4; ++i) {
    d1 += (q.value[i] - k1.value[i]) * (q.value[i] - k1.value[i]);
    d2 += (q.value[i] - k2.value[i]) * (q.value[i] - k2.value[i]);
  }
  EXPECT_NEAR(l[0], -(std::sqrt(d1) + std::sqrt(d2)) / 2, 1e-12);
}

TEST(Autodiff, CrossEntropySkipsInfiniteLogits) {
  Tape t(false);
  const double inf = std::numeric_limits<double>::infinity();
  Var l = t.constant({1.0, -inf, 2.0});
  const double expect = -1.0 + std::log(std::exp(1.0) + std::exp(2.0));
  EXPECT_NEAR(t.scalar(t.cross_entropy(l, 0)), expect, 1e-12);
}

TEST(Autodiff, SumAndBilinear) {
  Rng rng(7);
  Tensor p1 = rand_tensor(rng, "p1", {3}), p2 = rand_tensor(rng, "p2", {3}), w = rand_tensor(rng, "w", {3, 3});
  check_grad(
      [&](Tape& t) {
        const Var ps[2] = {t.param(p1), t.param(p2)};
        Var m = t.bilinear_matrix(ps, t.param(w));
        const Var parts[2] = {readout(t, m), t.cross_entropy(m, 3)};
        return t.sum(parts);
      },
      {&p1, &p2, &w});
}

TEST(Autodiff, CrfNll) {
  Rng rng(8);
  Tensor e0 = rand_tensor(rng, "e0", {3}), e1 = rand_tensor(rng, "e1", {3}), e2 = rand_tensor(rng, "e2", {3});
  Tensor tr = rand_tensor(rng, "trans", {3, 3}), st = rand_tensor(rng, "start", {3}), sp = rand_tensor(rng, "stop", {3});
  check_grad(
      [&](Tape& t) {
        const Var em[3] = {t.param(e0), t.param(e1), t.param(e2)};
        return t.crf_nll(em, t.param(tr), t.param(st), t.param(sp), {2, 0, 1});
      },
      {&e0, &e1, &e2, &tr, &st, &sp});
}
