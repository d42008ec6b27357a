#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "protoed/error.hpp"
#include "protoed/model.hpp"
#include "protoed/random.hpp"
#include "protoed/synthetic.hpp"
#include "protoed/training.hpp"

using namespace protoed;

namespace {

EncoderConfig tiny() {
  EncoderConfig c;
  c.buckets = 32;
  c.dim = 4;
  c.hidden = 6;
  return c;
}

Dataset small_corpus() {
  SyntheticSpec s;
  s.n_types = 3;
  s.n_sentences = 24;
  s.vocab_size = 12;
  s.min_length = 4;
  s.max_length = 6;
  s.distractor_rate = 0.2;
  s.seed = 7;
  return gen_synthetic(s);
}

Model make_model(const std::string& preset, const Schema& schema, std::uint64_t seed, ClMode cl = ClMode::Auto) {
  MethodConfig m = method_preset(preset);
  if (cl != ClMode::Auto) m.cl = cl;
  m.cl = resolve_cl(m.cl, 10);
  return Model::init(m, schema, tiny(), ModelOptions{}, seed);
}

std::vector<const Sentence*> ptrs(const Dataset& d) {
  std::vector<const Sentence*> out;
  for (const auto& s : d.sentences) out.push_back(&s);
  return out;
}

}  // namespace

TEST(Model, ResolveCl) {
  EXPECT_EQ(resolve_cl(ClMode::Auto, 127), ClMode::InBatch);
  EXPECT_EQ(resolve_cl(ClMode::Auto, 128), ClMode::Moco);
  EXPECT_EQ(resolve_cl(ClMode::None, 5), ClMode::None);
  EXPECT_THROW(Model::init(method_preset("unified-baseline"), Schema({"A"}), tiny(), {}, 0), ConfigError);
}

TEST(Model, BranchLayout) {
  const Schema schema({"A", "B"});
  const Model u = make_model("unified-baseline", schema, 0);
  EXPECT_TRUE(u.has_label_branch());
  EXPECT_TRUE(u.has_mention_branch());
  EXPECT_FALSE(u.prototype_learning());
  const Model p = make_model("protonet", schema, 0);
  EXPECT_FALSE(p.has_label_branch());
  EXPECT_TRUE(p.prototype_learning());
  const Model f = make_model("fsls", schema, 0);
  EXPECT_TRUE(f.has_label_branch());
  EXPECT_FALSE(f.prototype_learning());
  EXPECT_EQ(f.n_slots(), 3u);
}

TEST(Model, SelectItemsKeepsTriggersAndCapsNegatives) {
  const Dataset d = small_corpus();
  Model m = make_model("protonet", d.schema, 0);
  const auto sents = ptrs(d);
  std::size_t n_trig = 0, n_tok = 0;
  for (const auto& s : d.sentences) {
    n_trig += s.mentions.size();
    n_tok += s.tokens.size();
  }
  const auto items = select_items(m, sents, 3);
  std::size_t trig = 0;
  for (const auto& it : items) trig += it.gold != d.schema.size();
  EXPECT_EQ(trig, n_trig);
  EXPECT_EQ(items.size() - trig, std::min(n_tok - n_trig, static_cast<std::size_t>(3 * n_trig)));
  const auto again = select_items(m, sents, 3);
  ASSERT_EQ(again.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(again[i].span, items[i].span);
  m.options.negative_ratio = 0.0;
  EXPECT_EQ(select_items(m, sents, 3).size(), n_trig);
}

TEST(Model, MergeTokenTypes) {
  const Schema schema({"A", "B"});
  const auto ms = merge_token_types({2, 0, 0, 1, 2, 1}, schema);
  EXPECT_EQ(ms, (std::vector<Mention>{{1, 3, "A"}, {3, 4, "B"}, {5, 6, "B"}}));
  EXPECT_TRUE(merge_token_types({2, 2}, schema).empty());
}

TEST(Model, LossGradientsMatchFiniteDifferences) {
  const Dataset d = small_corpus();
  auto [support, query] = episode_split(d, 1, 1, 2);
  const std::vector<std::string> presets{"unified-baseline", "protonet", "protonet-adj", "fsls", "fsls-adj",
                                         "pa-crf", "fine-tuning"};
  for (const auto& name : presets) {
    Model m = make_model(name, d.schema, 11);
    StepBatch b;
    b.query = ptrs(query);
    if (m.prototype_learning()) b.support = ptrs(support);
    b.seed = 5;
    for (const auto& e : protoed::testing::model_grad_errors(m, b, nullptr))
      EXPECT_LE(e.rel_error, 1e-4) << name << " " << e.tensor;
  }
}

// The collapsed-transition CRF reads detached emissions: only the role
// scores learn from it, everything else sees the loss without the CRF term.
TEST(Model, CdtCrfTermOnlyTrainsRoleScores) {
  const Dataset d = small_corpus();
  auto [support, query] = episode_split(d, 1, 1, 2);
  for (const std::string name : {"container", "l-tapnet-cdt"}) {
    Model m = make_model(name, d.schema, 12);
    MethodConfig plain_method = m.method;
    plain_method.crf = CrfKind::None;
    Model plain = Model::init(plain_method, d.schema, tiny(), ModelOptions{}, 99);
    for (Tensor* t : plain.tensors())
      for (Tensor* u : m.tensors())
        if (u->name == t->name) t->value = u->value;
    StepBatch b;
    b.query = ptrs(query);
    if (m.prototype_learning()) b.support = ptrs(support);
    b.seed = 5;
    const auto g = loss_gradients(m, b, nullptr, nullptr);
    const auto gp = loss_gradients(plain, b, nullptr, nullptr);
    const auto tm = m.tensors(), tp = plain.tensors();
    std::size_t matched = 0;
    for (std::size_t i = 0; i < tm.size(); ++i) {
      for (std::size_t j = 0; j < tp.size(); ++j) {
        if (tm[i]->name != tp[j]->name) continue;
        ++matched;
        for (std::size_t k = 0; k < g[i].size(); ++k) EXPECT_NEAR(g[i][k], gp[j][k], 1e-12) << name << " " << tm[i]->name;
      }
    }
    EXPECT_EQ(matched, tp.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < tm.size(); ++i) {
      if (tm[i] != &m.cdt_roles) continue;
      for (std::size_t k = 0; k < m.cdt_roles.size(); ++k) {
        const double keep = m.cdt_roles.value[k];
        m.cdt_roles.value[k] = keep + h;
        const double fp = loss_value(m, b, nullptr);
        m.cdt_roles.value[k] = keep - h;
        const double fm = loss_value(m, b, nullptr);
        m.cdt_roles.value[k] = keep;
        EXPECT_NEAR(g[i][k], (fp - fm) / (2 * h), 1e-6) << name << " role " << k;
      }
    }
  }
}

TEST(Model, MocoLossGradients) {
  const Dataset d = small_corpus();
  Model m = make_model("unified-baseline", d.schema, 4, ClMode::Moco);
  CLQueue q(16);
  Rng rng(9);
  for (int i = 0; i < 12; ++i) {
    Vec v(4);
    double n = 0;
    for (double& x : v) {
      x = standard_normal(rng);
      n += x * x;
    }
    for (double& x : v) x /= std::sqrt(n);
    q.push({v, static_cast<std::size_t>(i % 4)});
  }
  StepBatch b;
  b.query = ptrs(d);
  b.query.resize(8);
  b.seed = 1;
  for (const auto& e : protoed::testing::model_grad_errors(m, b, &q)) EXPECT_LE(e.rel_error, 1e-4) << e.tensor;
}

TEST(Model, PredictReturnsWellFormedMentions) {
  const Dataset d = small_corpus();
  for (const std::string name : {"unified-baseline", "protonet", "l-tapnet-cdt", "pa-crf", "fine-tuning"}) {
    const Model m = make_model(name, d.schema, 3);
    const Memory mem = build_memory(m, d);
    for (const auto& s : d.sentences) {
      for (const auto& pm : predict(m, mem, s)) {
        EXPECT_LT(pm.start, pm.end);
        EXPECT_LE(pm.end, static_cast<int>(s.tokens.size()));
        EXPECT_TRUE(d.schema.contains(pm.label));
      }
    }
  }
}
