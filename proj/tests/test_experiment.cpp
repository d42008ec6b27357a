#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "protoed/error.hpp"
#include "protoed/experiment.hpp"
#include "protoed/synthetic.hpp"

using namespace protoed;

namespace {

KeyValues kv_of(const std::string& text) {
  std::istringstream in(text);
  return parse_kv(in);
}

TrainConfig quick(const std::string& method) {
  return train_config_from_kv(kv_of("method = " + method +
                                    "\nlr = 0.01\nsteps = 3\nbuckets = 32\ndim = 4\nbatch_size = 8\n"));
}

Dataset corpus(std::size_t n_types, std::size_t n) {
  SyntheticSpec s;
  s.n_types = n_types;
  s.n_sentences = n;
  s.vocab_size = 20;
  s.seed = 3;
  s.distractor_rate = 0.1;
  return gen_synthetic(s);
}

}  // namespace

TEST(Config, ParseKv) {
  const KeyValues kv = kv_of("# comment\n\n a = 1 \nb=x y # trailing\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "x y");
  EXPECT_THROW(kv_of("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(kv_of("just text\n"), ParseError);
  EXPECT_THROW(parse_kv_file("/nonexistent/protoed.cfg"), IoError);
  EXPECT_EQ(split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(parse_double_list("0.001,0.01"), (std::vector<double>{0.001, 0.01}));
}

TEST(Config, TrainConfigFromKv) {
  const TrainConfig c = train_config_from_kv(kv_of("method = protonet\nlr = 0.001,0.003\nsteps = 7\ndim = 8\n"));
  EXPECT_EQ(c.method, method_preset("protonet"));
  EXPECT_EQ(c.lr_grid, (std::vector<double>{0.001, 0.003}));
  EXPECT_EQ(resolved_steps(c), 7u);
  EXPECT_EQ(c.encoder.dim, 8u);
  EXPECT_THROW(train_config_from_kv(kv_of("bogus = 1\n")), ConfigError);
  EXPECT_NO_THROW(train_config_from_kv(kv_of("bogus = 1\n"), {"bogus"}));
  EXPECT_THROW(train_config_from_kv(kv_of("steps = -3\n")), ConfigError);

  TrainConfig d;
  d.method = method_preset("protonet-adj");
  EXPECT_EQ(resolved_steps(d), 200u);
  d.method = method_preset("protonet");
  EXPECT_EQ(resolved_steps(d), 500u);
}

TEST(Config, HashIsStableAndSensitive) {
  const TrainConfig a = quick("protonet"), b = quick("protonet");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_NE(config_hash(a), config_hash(quick("fsls")));
  // The round trip through key-values preserves the hash.
  EXPECT_EQ(config_hash(train_config_from_kv(to_kv(a))), config_hash(a));
}

TEST(Grid, DeterministicAndComplete) {
  const Dataset pool = corpus(3, 80);
  const std::vector<GridCell> cells{{"p", quick("protonet")}};
  const std::string log_path = (std::filesystem::temp_directory_path() / "protoed_grid_log.jsonl").string();
  std::filesystem::remove(log_path);
  RunLog log(log_path);
  const auto a = run_grid(cells, {1, 2}, pool, Dataset{}, 2, 1, &log);
  const auto b = run_grid(cells, {1, 2}, pool, Dataset{}, 2, 1);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(a[0].runs.size(), 2u);
  EXPECT_TRUE(a[0].errors.empty());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a[0].runs[i].f1, b[0].runs[i].f1);
  std::ifstream in(log_path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty();
  EXPECT_EQ(n, 2u);
  std::filesystem::remove(log_path);
  EXPECT_NE(format_table(a).find("p"), std::string::npos);
  EXPECT_THROW(run_grid({}, {1}, pool, Dataset{}, 2, 1), ConfigError);
}

TEST(Grid, InfeasibleSeedIsRecorded) {
  const Dataset pool = corpus(3, 6);
  const auto r = run_grid({{"p", quick("protonet")}}, {1}, pool, Dataset{}, 5, 5);
  EXPECT_TRUE(r[0].runs.empty());
  EXPECT_EQ(r[0].errors.size(), 1u);
}

TEST(TransferGrid, FullCrossProduct) {
  const Dataset d = corpus(6, 160);
  const auto src_types = most_frequent_types(d, 3);
  const TransferSplit split = split_class_transfer(d, std::set<std::string>(src_types.begin(), src_types.end()));
  TransferGridSpec spec;
  spec.sources = {std::nullopt, GridCell{"protonet", quick("protonet")}, GridCell{"fsls", quick("fsls")}};
  spec.targets = {{"protonet", quick("protonet")}, {"fsls", quick("fsls")}, {"unified", quick("unified-baseline")}};
  spec.seeds = {1};
  spec.k_train = 2;
  spec.k_dev = 1;
  const auto cells = run_transfer_grid(spec, split);
  ASSERT_EQ(cells.size(), 9u);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : cells) {
    seen.insert({c.source_id, c.target_id});
    EXPECT_EQ(c.report.runs.size(), 1u) << c.report.config_id;
  }
  EXPECT_EQ(seen.size(), 9u);
  EXPECT_NE(format_transfer_table(cells).find("none"), std::string::npos);
}
