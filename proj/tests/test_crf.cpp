#include <gtest/gtest.h>

#include <cmath>

#include "protoed/crf.hpp"
#include "protoed/error.hpp"
#include "test_util.hpp"

using namespace protoed;
using protoed::testing::brute_crf;
using protoed::testing::brute_path_score;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, bool integer) {
  Matrix m(r, c);
  for (double& v : m.data) v = integer ? static_cast<double>(uniform_index(rng, 3)) : standard_normal(rng);
  return m;
}

TransitionTable random_table(Rng& rng, std::size_t t, bool integer) {
  TransitionTable tb(t);
  tb.trans = random_matrix(rng, t, t, integer);
  for (double& v : tb.start) v = integer ? static_cast<double>(uniform_index(rng, 3)) : standard_normal(rng);
  for (double& v : tb.stop) v = integer ? static_cast<double>(uniform_index(rng, 3)) : standard_normal(rng);
  return tb;
}

}  // namespace

TEST(Crf, PartitionAndViterbiMatchEnumeration) {
  Rng rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 5), t = 1 + uniform_index(rng, 4);
    const bool integer = trial % 2 == 1;  // integer scores produce ties
    Matrix e = random_matrix(rng, n, t, integer);
    TransitionTable tb = random_table(rng, t, integer);
    const auto oracle = brute_crf(e, tb);
    EXPECT_NEAR(crf_log_partition(e, tb), oracle.log_z, 1e-8);
    const auto v = crf_viterbi(e, tb);
    EXPECT_EQ(v.path, oracle.best_path);
    EXPECT_NEAR(v.score, oracle.best, 1e-9);
    EXPECT_NEAR(crf_path_score(e, tb, v.path), brute_path_score(e, tb, v.path), 1e-12);
  }
}

TEST(Crf, ForbiddenTransitionsAreAvoided) {
  TransitionTable tb(2);
  tb.trans(0, 1) = -std::numeric_limits<double>::infinity();
  Matrix e(3, 2);
  e(1, 1) = 5.0;
  e(0, 0) = 1.0;
  const auto v = crf_viterbi(e, tb);
  for (std::size_t i = 1; i < v.path.size(); ++i) EXPECT_FALSE(v.path[i - 1] == 0 && v.path[i] == 1);
  EXPECT_TRUE(std::isfinite(crf_log_partition(e, tb)));
}

TEST(Crf, NllGradientMatchesFiniteDifferences) {
  Rng rng(8);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 4), t = 2 + uniform_index(rng, 3);
    Matrix e = random_matrix(rng, n, t, false);
    TransitionTable tb = random_table(rng, t, false);
    std::vector<int> gold(n);
    for (int& g : gold) g = static_cast<int>(uniform_index(rng, t));
    CrfGradient g;
    const double nll = crf_nll(e, tb, gold, &g);
    EXPECT_NEAR(nll, brute_crf(e, tb).log_z - brute_path_score(e, tb, gold), 1e-9);
    for (std::size_t i = 0; i < e.data.size(); ++i) {
      Matrix a = e, b = e;
      a.data[i] += h;
      b.data[i] -= h;
      EXPECT_NEAR(g.emissions.data[i], (crf_nll(a, tb, gold) - crf_nll(b, tb, gold)) / (2 * h), 1e-6);
    }
    for (std::size_t i = 0; i < tb.trans.data.size(); ++i) {
      TransitionTable a = tb, b = tb;
      a.trans.data[i] += h;
      b.trans.data[i] -= h;
      EXPECT_NEAR(g.trans.data[i], (crf_nll(e, a, gold) - crf_nll(e, b, gold)) / (2 * h), 1e-6);
    }
    for (std::size_t i = 0; i < t; ++i) {
      TransitionTable a = tb, b = tb;
      a.start[i] += h;
      b.start[i] -= h;
      EXPECT_NEAR(g.start[i], (crf_nll(e, a, gold) - crf_nll(e, b, gold)) / (2 * h), 1e-6);
      a = tb;
      b = tb;
      a.stop[i] += h;
      b.stop[i] -= h;
      EXPECT_NEAR(g.stop[i], (crf_nll(e, a, gold) - crf_nll(e, b, gold)) / (2 * h), 1e-6);
    }
  }
}

TEST(Crf, BioLayout) {
  Schema schema({"A", "B"});
  EXPECT_EQ(bio::tag_count(2), 5u);
  EXPECT_EQ(bio::tag_names(schema), (std::vector<std::string>{"O", "B-A", "I-A", "B-B", "I-B"}));
  Sentence s{"s", {"a", "b", "c", "d"}, {{0, 2, "B"}, {3, 4, "A"}}};
  const auto tags = bio::tags_from_mentions(s, schema);
  EXPECT_EQ(tags, (std::vector<int>{3, 4, 0, 1}));
  EXPECT_EQ(bio::mentions_from_tags(tags, schema), s.mentions);
  EXPECT_EQ(bio::emission_columns(2), (std::vector<int>{2, 0, 0, 1, 1}));

  Matrix logits(1, 3);
  logits(0, 0) = 1;
  logits(0, 1) = 2;
  logits(0, 2) = 3;
  Matrix em = bio::emissions_from_logits(logits);
  EXPECT_EQ(em.data, (Vec{3, 1, 1, 2, 2}));
}

TEST(Crf, CollapsedRolesCoverEveryTransition) {
  // Hand-listed roles for one type pair.
  EXPECT_EQ(role_of(0, 0), Role::OtoO);
  EXPECT_EQ(role_of(0, 1), Role::OtoB);
  EXPECT_EQ(role_of(0, 2), Role::OtoI);
  EXPECT_EQ(role_of(1, 2), Role::BtoIsame);
  EXPECT_EQ(role_of(1, 4), Role::ToIdiff);
  EXPECT_EQ(role_of(2, 2), Role::ItoIsame);
  EXPECT_EQ(role_of(2, 3), Role::ItoB);
  EXPECT_EQ(role_of(1, 3), Role::BtoB);
  EXPECT_EQ(role_of(2, 0), Role::ItoO);
  EXPECT_EQ(role_of(1, 0), Role::BtoO);
  EXPECT_EQ(start_role_of(0), Role::StartToO);
  EXPECT_EQ(start_role_of(3), Role::StartToB);
  EXPECT_EQ(start_role_of(4), Role::StartToI);

  CollapsedTransitions ct;
  for (std::size_t r = 0; r < kRoleCount; ++r) ct.scores[r] = static_cast<double>(r) + 0.5;
  const std::size_t n = 3, T = bio::tag_count(n);
  const TransitionTable tb = expand_collapsed(ct, n);
  const auto idx = collapsed_index_map(n);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) {
      EXPECT_EQ(tb.trans(a, b), ct.scores[static_cast<std::size_t>(role_of(int(a), int(b)))]);
      EXPECT_EQ(idx[a * T + b], static_cast<int>(role_of(int(a), int(b))));
    }
  for (std::size_t b = 0; b < T; ++b) {
    EXPECT_EQ(tb.stop[b], 0.0);
    EXPECT_EQ(idx[T * T + T + b], -1);
  }
}

TEST(Crf, CdtDecodeIsViterbiOverExpandedTable) {
  Rng rng(5);
  CollapsedTransitions ct;
  for (double& v : ct.scores) v = standard_normal(rng);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix logits = random_matrix(rng, 4, 3, false);
    const auto path = cdt_decode(logits, ct, 2);
    EXPECT_EQ(path, brute_crf(bio::emissions_from_logits(logits), expand_collapsed(ct, 2)).best_path);
  }
  EXPECT_THROW(cdt_decode(Matrix(2, 5), ct, 2), ShapeError);
}

TEST(Crf, PaTransitionsAreBilinearInPrototypes) {
  Rng rng(6);
  const std::size_t dim = 3, n = 2;
  std::vector<Vec> protos(n + 1, Vec(dim));
  for (auto& p : protos)
    for (double& v : p) v = standard_normal(rng);
  Matrix w = random_matrix(rng, dim, dim, false);
  const TransitionTable tb = pa_transitions(protos, w);
  const std::size_t T = bio::tag_count(n);
  for (std::size_t a = 0; a < T; ++a) {
    for (std::size_t b = 0; b < T; ++b) {
      const Vec& pa = protos[bio::type_of(int(a), n)];
      const Vec& pb = protos[bio::type_of(int(b), n)];
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) s += pa[i] * w(i, j) * pb[j];
      EXPECT_NEAR(tb.trans(a, b), s, 1e-12);
    }
    EXPECT_EQ(tb.start[a], 0.0);
    EXPECT_EQ(tb.stop[a], 0.0);
  }
  EXPECT_THROW(pa_transitions(protos, Matrix(2, 2)), ShapeError);
}
