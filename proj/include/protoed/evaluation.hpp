#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protoed/corpus.hpp"

namespace protoed {

using MentionsById = std::map<std::string, std::vector<Mention>>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t n_predicted = 0;
  std::size_t n_gold = 0;
};

// Exact (span, type) matching pooled over all sentences. Duplicate mentions
// count once. A predicted sentence id absent from `gold` is an error; gold
// sentences without predictions count as predicting nothing.
Prf micro_f1(const MentionsById& predictions, const MentionsById& gold);
Prf micro_f1(const std::vector<Sentence>& predictions, const std::vector<Sentence>& gold);

MentionsById mentions_by_id(const std::vector<Sentence>& sentences);

struct Aggregate {
  double mean = 0.0;
  std::optional<double> std;  // sample std (n - 1), absent when n == 1
};

Aggregate aggregate_runs(const std::vector<double>& values);

struct SeedScore {
  std::uint64_t seed = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double lr = 0.0;  // learning rate picked on dev
};

struct RunReport {
  std::string config_id;
  std::vector<SeedScore> runs;
  std::vector<std::string> errors;  // failed seeds, "seed: message"

  Aggregate aggregate() const;
};

}  // namespace protoed
