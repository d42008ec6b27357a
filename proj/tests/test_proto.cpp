#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "protoed/error.hpp"
#include "protoed/proto.hpp"
#include "protoed/random.hpp"

using namespace protoed;

namespace {

Vec randvec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (double& x : v) x = standard_normal(rng);
  return v;
}

PrototypeSet score_set(std::vector<std::vector<Vec>> slots) {
  PrototypeSet s;
  s.aggregation = Aggregation::Score;
  s.slots = std::move(slots);
  return s;
}

EncoderConfig tiny() {
  EncoderConfig c;
  c.buckets = 32;
  c.dim = 4;
  return c;
}

}  // namespace

TEST(Transfer, Examples) {
  TransferHeads id = TransferHeads::init({TransferKind::Identity}, 2, 0);
  TransferHeads nz = TransferHeads::init({TransferKind::Normalize}, 2, 0);
  EXPECT_EQ(transfer(Vec{3, 4}, id), (Vec{3, 4}));
  const Vec n = transfer(Vec{3, 4}, nz);
  EXPECT_NEAR(n[0], 0.6, 1e-15);
  EXPECT_NEAR(n[1], 0.8, 1e-15);
  EXPECT_THROW(transfer(Vec{0, 0}, nz), NumericError);
  EXPECT_THROW(transfer(Vec{1, 2, 3}, nz), ShapeError);
}

TEST(Transfer, NormalizingTransfersHaveUnitNorm) {
  Rng rng(1);
  TransferHeads nz = TransferHeads::init({TransferKind::Normalize}, 5, 0);
  for (int i = 0; i < 100; ++i) {
    const Vec z = transfer(randvec(rng, 5), nz);
    double s = 0;
    for (double v : z) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
}

TEST(Transfer, ProjectionAndGaussianShapes) {
  Rng rng(2);
  TransferHeads d = TransferHeads::init({TransferKind::DownProject}, 6, 1);
  EXPECT_EQ(d.out_dim, 3u);
  EXPECT_EQ(d.projection.shape, (std::vector<std::size_t>{3, 6}));
  TransferHeads dn = TransferHeads::init({TransferKind::DownProjectNormalize, 2}, 6, 1);
  const Vec h = randvec(rng, 6);
  // M h / |h|
  double nh = 0;
  for (double v : h) nh += v * v;
  nh = std::sqrt(nh);
  const Vec z = transfer(h, dn);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 6; ++c) s += dn.projection.row(r)[c] * h[c] / nh;
    EXPECT_NEAR(z[r], s, 1e-12);
  }
  TransferHeads rp = TransferHeads::init({TransferKind::Reparameterize}, 6, 1);
  EXPECT_EQ(rp.output_size(), 6u);
  for (int i = 0; i < 50; ++i) {
    const GaussianRepr g = unpack_gaussian(transfer(randvec(rng, 6), rp));
    for (double v : g.var) EXPECT_GE(v, kVarianceFloor);
  }
  EXPECT_THROW(TransferHeads::init({TransferKind::DownProject, 9}, 6, 1), ConfigError);
  EXPECT_EQ(transfer_from_code(to_code(TransferKind::DownProjectNormalize)), TransferKind::DownProjectNormalize);
  EXPECT_THROW(transfer_from_code("X"), ConfigError);
}

TEST(Transfer, GaussianPacking) {
  GaussianRepr g{{1, 2}, {0.5, 0.25}};
  EXPECT_EQ(pack_gaussian(g), (Vec{1, 2, 0.5, 0.25}));
  const GaussianRepr back = unpack_gaussian(pack_gaussian(g));
  EXPECT_EQ(back.mean, g.mean);
  EXPECT_EQ(back.var, g.var);
  EXPECT_THROW(unpack_gaussian(Vec{1, 2, 3}), ShapeError);
}

TEST(Prototypes, FeatureMeanAndScoreKeepAll) {
  const EncoderParams enc = EncoderParams::init(tiny(), 0);
  TransferHeads id = TransferHeads::init({TransferKind::Identity}, 4, 0);
  Schema schema({"y"});
  std::map<std::string, std::vector<Vec>> support{{"y", {{0, 0, 0, 0}, {2, 2, 2, 2}}}};
  const Vec null(4, 0.5);
  auto f = build_prototypes(support, schema, ProtoSource::Mentions, Aggregation::Feature, enc, id, null);
  ASSERT_EQ(f.slots.size(), 2u);
  EXPECT_EQ(f.slots[0], (std::vector<Vec>{{1, 1, 1, 1}}));
  EXPECT_EQ(f.slots[1], (std::vector<Vec>{null}));
  auto s = build_prototypes(support, schema, ProtoSource::Mentions, Aggregation::Score, enc, id, null);
  EXPECT_EQ(s.slots[0].size(), 2u);

  auto l = build_prototypes({}, schema, ProtoSource::Label, Aggregation::Feature, enc, id, null);
  EXPECT_EQ(l.slots[0][0], label_embed("y", enc));

  // Both sources: mention mean and label vector, equally weighted.
  auto b = build_prototypes(support, schema, ProtoSource::Both, Aggregation::Feature, enc, id, null);
  const Vec lab = label_embed("y", enc);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(b.slots[0][0][i], 0.5 * (1.0 + lab[i]), 1e-15);

  EXPECT_THROW(build_prototypes({}, schema, ProtoSource::Mentions, Aggregation::Feature, enc, id, null),
               ValidationError);
  EXPECT_THROW(build_prototypes(support, schema, ProtoSource::Both, Aggregation::Loss, enc, id, null), ConfigError);
}

TEST(Prototypes, FeatureMeanIsTakenAfterTransfer) {
  const EncoderParams enc = EncoderParams::init(tiny(), 0);
  TransferHeads nz = TransferHeads::init({TransferKind::Normalize}, 2, 0);
  Schema schema({"y"});
  std::map<std::string, std::vector<Vec>> support{{"y", {{2, 0}, {0, 4}}}};
  auto f = build_prototypes(support, schema, ProtoSource::Mentions, Aggregation::Feature, enc, nz, Vec{1, 1});
  EXPECT_EQ(f.slots[0][0], (Vec{0.5, 0.5}));
}

TEST(Logits, FeatureAndScore) {
  const DistanceSpec eu{DistanceKind::Euclidean, 1.0};
  PrototypeSet one = score_set({{{1, 1}}, {{0, 0}}});
  one.aggregation = Aggregation::Feature;
  const Vec q{1, 1};
  const Vec lf = logits_feature(q, one, eu);
  EXPECT_EQ(lf[0], 0.0);
  EXPECT_LE(lf[1], 0.0);
  EXPECT_EQ(logits_score(q, one, eu), lf);
  // {u, u} behaves like {u}.
  EXPECT_EQ(logits_score(q, score_set({{{3, 1}, {3, 1}}, {{0, 0}}}), eu),
            logits_score(q, score_set({{{3, 1}}, {{0, 0}}}), eu));
  // Symmetric prototypes are equidistant.
  const Vec sym = logits_feature(Vec{0, 0}, score_set({{{1, 0}}, {{-1, 0}}}), eu);
  EXPECT_EQ(sym[0], sym[1]);
  // Hand computation, three types plus N.A.
  const Vec hand = logits_feature(Vec{0, 1}, score_set({{{0, 1}}, {{3, 5}}, {{0, -1}}, {{1, 1}}}), eu);
  EXPECT_EQ(hand, (Vec{0, -5, -2, -1}));
  EXPECT_THROW(logits_feature(q, score_set({{{1, 1}, {2, 2}}, {{0, 0}}}), eu), ValidationError);
  EXPECT_THROW(logits_score(q, score_set({{}, {{0, 0}}}), eu), ValidationError);
}

TEST(Logits, ScoreMatchesBruteForce) {
  Rng rng(3);
  for (auto kind : {DistanceKind::ScaledCosine, DistanceKind::Euclidean, DistanceKind::GaussianDivergence}) {
    const DistanceSpec d{kind, 0.2};
    const bool g = kind == DistanceKind::GaussianDivergence;
    auto rv = [&] {
      Vec v = randvec(rng, 6);
      if (g)
        for (std::size_t i = 3; i < 6; ++i) v[i] = std::exp(v[i]);
      return v;
    };
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::vector<Vec>> slots(4);
      for (auto& s : slots)
        for (std::size_t j = 0, n = 1 + uniform_index(rng, 4); j < n; ++j) s.push_back(rv());
      const Vec q = rv();
      const Vec l = logits_score(q, score_set(slots), d);
      for (std::size_t k = 0; k < 4; ++k) {
        double s = 0;
        for (const auto& c : slots[k]) s -= distance(q, c, d);
        EXPECT_NEAR(l[k], s / static_cast<double>(slots[k].size()), 1e-12);
      }
    }
  }
}

TEST(NearestNeighbor, MatchesExhaustiveSearchAndBreaksTies) {
  Rng rng(4);
  const DistanceSpec d{DistanceKind::Euclidean, 1.0};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<Vec>> slots(3);
    for (auto& s : slots)
      for (std::size_t j = 0, n = 1 + uniform_index(rng, 3); j < n; ++j) s.push_back(randvec(rng, 3));
    const Vec q = randvec(rng, 3);
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 3; ++k)
      for (const auto& c : slots[k]) {
        double s = 0;
        for (int i = 0; i < 3; ++i) s += (q[i] - c[i]) * (q[i] - c[i]);
        if (std::sqrt(s) < bd) {
          bd = std::sqrt(s);
          best = k;
        }
      }
    EXPECT_EQ(predict_nn(q, score_set(slots), d), best);
  }
  // Exact prototype hit, and a three-way tie resolved to the first slot.
  EXPECT_EQ(predict_nn(Vec{2, 2}, score_set({{{0, 0}}, {{2, 2}}, {{5, 5}}}), d), 1u);
  EXPECT_EQ(predict_nn(Vec{0, 0}, score_set({{{1, 0}}, {{0, 1}}, {{-1, 0}}}), d), 0u);
}

TEST(NearestNeighbor, InvariantToTau) {
  Rng rng(5);
  for (auto kind : {DistanceKind::ScaledCosine, DistanceKind::ScaledEuclidean}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<std::vector<Vec>> slots(5);
      for (auto& s : slots)
        for (std::size_t j = 0, n = 1 + uniform_index(rng, 3); j < n; ++j) s.push_back(randvec(rng, 4));
      const Vec q = randvec(rng, 4);
      const auto ref = predict_nn(q, score_set(slots), {kind, 1.0});
      for (double tau : {0.1, 0.2, 0.3, 10.0}) EXPECT_EQ(predict_nn(q, score_set(slots), {kind, tau}), ref);
    }
  }
}
