#include <gtest/gtest.h>

#include <set>

#include "protoed/error.hpp"
#include "protoed/sampler.hpp"
#include "test_util.hpp"

using namespace protoed;
using protoed::testing::count_types;
using protoed::testing::covers;
using protoed::testing::random_dataset;
using protoed::testing::single_removal_minimal;

TEST(Sampler, GreedySampleMeetsKAndIsMinimal) {
  Rng rng(7);
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Dataset d = random_dataset(rng, 2 + uniform_index(rng, 8), 20 + uniform_index(rng, 120));
    for (int k : {1, 2, 5}) {
      const bool can = covers(count_types(d.sentences), d.schema, static_cast<std::size_t>(k));
      if (!can) {
        EXPECT_THROW(greedy_sample(d, k, trial), InfeasibleError);
        ++infeasible;
        continue;
      }
      ++feasible;
      Dataset s = greedy_sample(d, k, trial);
      EXPECT_TRUE(covers(count_types(s.sentences), d.schema, static_cast<std::size_t>(k)));
      EXPECT_TRUE(single_removal_minimal(s.sentences, d.schema, static_cast<std::size_t>(k)));
      std::set<std::string> ids;
      for (const auto& x : s.sentences) EXPECT_TRUE(ids.insert(x.id).second);
    }
  }
  EXPECT_GT(feasible, 0);
  EXPECT_GT(infeasible, 0);
}

TEST(Sampler, InfeasibleErrorNamesType) {
  Dataset d;
  d.schema = Schema({"Rare", "Common"});
  d.sentences = {{"a", {"x", "y"}, {{0, 1, "Common"}, {1, 2, "Rare"}}}, {"b", {"x"}, {{0, 1, "Common"}}}};
  try {
    greedy_sample(d, 2, 0);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("Rare"), std::string::npos);
  }
  Dataset lenient = greedy_sample_lenient(d, 2, 0);
  EXPECT_EQ(count_types(lenient.sentences)["Rare"], 1u);
}

TEST(Sampler, DeterministicPerSeed) {
  Rng rng(3);
  Dataset d = random_dataset(rng, 4, 200);
  Dataset a = greedy_sample(d, 2, 11), b = greedy_sample(d, 2, 11);
  EXPECT_EQ(a.sentences, b.sentences);
}

TEST(Sampler, TrainAndDevAreDisjoint) {
  Rng rng(5);
  Dataset d = random_dataset(rng, 4, 300);
  auto [train, dev] = sample_train_dev(d, SampleSpec{3, 2, 9});
  std::set<std::string> ids;
  for (const auto& s : train.sentences) ids.insert(s.id);
  for (const auto& s : dev.sentences) EXPECT_FALSE(ids.count(s.id));
  EXPECT_TRUE(covers(count_types(dev.sentences), d.schema, 2));
  Dataset rest = without_sentences(d, train);
  EXPECT_EQ(rest.sentences.size(), d.sentences.size() - train.sentences.size());
}

TEST(Sampler, StatsCountMentions) {
  Dataset d;
  d.schema = Schema({"A", "B"});
  d.sentences = {{"a", {"x", "y"}, {{0, 1, "A"}, {1, 2, "B"}}}, {"b", {"x"}, {{0, 1, "A"}}}};
  SampleStats st = sample_stats(d);
  EXPECT_EQ(st.n_sentences, 2u);
  EXPECT_EQ(st.n_mentions, 3u);
  EXPECT_DOUBLE_EQ(st.avg_shot, 1.5);
}

TEST(Sampler, ClassTransferSplitHasNoLeakage) {
  Rng rng(13);
  Dataset d = random_dataset(rng, 6, 300);
  const auto top = most_frequent_types(d, 3);
  ASSERT_EQ(top.size(), 3u);
  // The most frequent types under the skewed generator are the low ids.
  const auto c = count_types(d.sentences);
  for (const auto& t : d.schema.types()) {
    if (std::find(top.begin(), top.end(), t) == top.end()) {
      for (const auto& s : top) EXPECT_GE(c.at(s), c.count(t) ? c.at(t) : 0u);
    }
  }
  TransferSplit split = split_class_transfer(d, std::set<std::string>(top.begin(), top.end()));
  EXPECT_NO_THROW(check_no_leakage(split));
  EXPECT_EQ(split.source_data.sentences.size() + split.target_pool.sentences.size(), d.sentences.size());
  std::set<std::string> src(top.begin(), top.end());
  for (const auto& s : split.source_data.sentences)
    for (const auto& m : s.mentions) EXPECT_TRUE(src.count(m.label));
  for (const auto& s : split.target_pool.sentences) {
    EXPECT_FALSE(s.mentions.empty());
    for (const auto& m : s.mentions) EXPECT_FALSE(src.count(m.label));
  }

  TransferSplit bad = split;
  bad.target_pool.sentences.push_back(split.source_data.sentences.front());
  EXPECT_THROW(check_no_leakage(bad), LeakageError);
  EXPECT_THROW(split_class_transfer(d, {"nope"}), ValidationError);
}
