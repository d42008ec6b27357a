#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protoed/corpus.hpp"

namespace protoed {

// Planted-trigger corpus. The lexicon (type names, label texts, trigger pools,
// distractor words) depends only on the lexicon fields, so corpora drawn with
// different `seed`s share a vocabulary.
struct SyntheticSpec {
  std::size_t n_types = 10;
  std::size_t n_sentences = 1000;
  std::size_t vocab_size = 150;  // distractor words
  std::size_t triggers_per_type = 2;
  double distractor_rate = 0.3;  // chance a sentence plants no trigger
  std::size_t max_triggers = 2;  // per planted sentence
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::uint64_t seed = 0;
  std::uint64_t lexicon_seed = 0;
  std::string id_prefix = "syn";

  void validate() const;
};

struct SyntheticLexicon {
  Schema schema;
  std::vector<std::vector<std::string>> triggers;  // per type
  std::vector<std::string> distractors;
  std::map<std::string, std::string> trigger_type;  // word -> type
};

SyntheticLexicon synthetic_lexicon(const SyntheticSpec& spec);

// Every planted trigger is a single token, never adjacent to another trigger,
// and trigger words never occur as distractors.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Bag-of-trigger-words tagger: each lexicon word becomes a one-token mention.
std::vector<Sentence> rule_based_predict(const SyntheticLexicon& lexicon, const std::vector<Sentence>& sentences);

}  // namespace protoed
