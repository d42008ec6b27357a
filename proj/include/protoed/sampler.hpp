#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "protoed/corpus.hpp"

namespace protoed {

struct SampleSpec {
  int k_train = 5;
  int k_dev = 2;
  std::uint64_t seed = 0;
};

struct SampleStats {
  std::size_t n_sentences = 0;
  std::size_t n_mentions = 0;
  double avg_shot = 0.0;
};

struct TransferSplit {
  std::vector<std::string> source_types;
  std::vector<std::string> target_types;
  Dataset source_data;
  Dataset target_pool;
};

// Per-type mention counts, indexed like `schema.types()`.
std::vector<std::size_t> type_counts(const Dataset& dataset);

// Greedy K-shot sentence sampling. Types are processed by ascending corpus
// frequency (ties by name); for each type, sentences containing it are drawn
// uniformly until its counter reaches K, counting every mention of a drawn
// sentence. A single pruning pass then drops any sentence whose removal keeps
// every counter >= K. Throws InfeasibleError naming the first deficient type.
Dataset greedy_sample(const Dataset& dataset, int k, std::uint64_t seed);

// As above, but a type short of K simply takes all its sentences.
Dataset greedy_sample_lenient(const Dataset& dataset, int k, std::uint64_t seed);

// Train with `seed`, then dev from the remaining sentences with `seed + 1`.
std::pair<Dataset, Dataset> sample_train_dev(const Dataset& dataset, const SampleSpec& spec);

// Sentences of `dataset` whose id is not in `exclude`.
Dataset without_sentences(const Dataset& dataset, const Dataset& exclude);

std::vector<std::string> most_frequent_types(const Dataset& dataset, std::size_t n);

TransferSplit split_class_transfer(const Dataset& dataset, const std::set<std::string>& source_types);

// Throws LeakageError if any disjointness invariant of the split is violated.
void check_no_leakage(const TransferSplit& split);

SampleStats sample_stats(const Dataset& subset);

}  // namespace protoed
