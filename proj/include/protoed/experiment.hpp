#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "protoed/evaluation.hpp"
#include "protoed/pipeline.hpp"
#include "protoed/sampler.hpp"

namespace protoed {

using KeyValues = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment, blank lines are skipped. A
// repeated key is an error.
KeyValues parse_kv(std::istream& in);
KeyValues parse_kv_file(const std::string& path);

// Builds a training config from keys (method keys, optimizer, encoder, queue,
// seed). Unknown keys raise ConfigError unless listed in `extra_keys`.
TrainConfig train_config_from_kv(const KeyValues& kv, const std::vector<std::string>& extra_keys = {});
KeyValues to_kv(const TrainConfig& config);
// FNV-1a over the canonical key-value text of the resolved config.
std::string config_hash(const TrainConfig& config);

std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Append-only JSONL log; one record per line.
class RunLog {
 public:
  explicit RunLog(std::string path);
  void append(const std::string& json_line);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
};

std::string run_record(const std::string& config_id, const TrainConfig& config, const SeedScore& score,
                       const std::string& extra_json_fields = "");

struct GridCell {
  std::string id;
  TrainConfig config;
};

// For each seed: sample train/dev from `pool` (seed, seed + 1), train every
// cell with that seed, score on `test` (or on the rest of the pool when `test`
// is empty). A failing run is recorded in its report and the grid continues.
std::vector<RunReport> run_grid(const std::vector<GridCell>& cells, const std::vector<std::uint64_t>& seeds,
                                const Dataset& pool, const Dataset& test, int k_train, int k_dev,
                                RunLog* log = nullptr);

struct TransferCellReport {
  std::string source_id;  // "none" for no source stage
  std::string target_id;
  RunReport report;
};

struct TransferGridSpec {
  std::vector<std::optional<GridCell>> sources;  // nullopt: no source stage
  std::vector<GridCell> targets;
  std::vector<std::uint64_t> seeds;
  int k_train = 5;
  int k_dev = 2;
  double source_lr = 3e-3;
};

// Source encoders are trained once per (source, seed) and shared by all
// targets; every target run sees the same target sample for a given seed.
std::vector<TransferCellReport> run_transfer_grid(const TransferGridSpec& spec, const TransferSplit& split,
                                                  RunLog* log = nullptr);

std::string format_table(const std::vector<RunReport>& reports);
std::string format_transfer_table(const std::vector<TransferCellReport>& cells);
std::string reports_to_json(const std::vector<RunReport>& reports);
std::string transfer_to_json(const std::vector<TransferCellReport>& cells);

}  // namespace protoed
