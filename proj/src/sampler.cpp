#include "protoed/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

namespace {

// Per-sentence type counts over the schema.
std::vector<std::vector<std::size_t>> sentence_type_counts(const Dataset& d) {
  std::vector<std::vector<std::size_t>> out(d.sentences.size(),
                                            std::vector<std::size_t>(d.schema.size(), 0));
  for (std::size_t s = 0; s < d.sentences.size(); ++s) {
    for (const auto& m : d.sentences[s].mentions) {
      if (auto idx = d.schema.index_of(m.label)) ++out[s][*idx];
    }
  }
  return out;
}

Dataset greedy_impl(const Dataset& d, int k, std::uint64_t seed, bool lenient) {
  if (k < 1) throw ValidationError("greedy_sample: K must be >= 1");
  const std::size_t n_types = d.schema.size();
  const auto totals = type_counts(d);

  std::vector<std::size_t> order(n_types);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (totals[a] != totals[b]) return totals[a] < totals[b];
    return d.schema.types()[a] < d.schema.types()[b];
  });
  if (!lenient) {
    for (std::size_t t : order) {
      if (totals[t] < static_cast<std::size_t>(k)) {
        throw InfeasibleError("type '" + d.schema.types()[t] + "' has " + std::to_string(totals[t]) +
                              " mentions, fewer than K=" + std::to_string(k));
      }
    }
  }

  const auto per_sentence = sentence_type_counts(d);
  Rng rng(seed);
  std::vector<bool> available(d.sentences.size(), true);
  std::vector<std::size_t> counter(n_types, 0);
  std::vector<std::size_t> selected;

  for (std::size_t t : order) {
    while (counter[t] < static_cast<std::size_t>(k)) {
      std::vector<std::size_t> candidates;
      for (std::size_t s = 0; s < d.sentences.size(); ++s) {
        if (available[s] && per_sentence[s][t] > 0) candidates.push_back(s);
      }
      if (candidates.empty()) {
        if (lenient) break;
        throw InfeasibleError("type '" + d.schema.types()[t] + "' cannot reach K=" + std::to_string(k));
      }
      const std::size_t pick = candidates[uniform_index(rng, candidates.size())];
      available[pick] = false;
      selected.push_back(pick);
      for (std::size_t u = 0; u < n_types; ++u) counter[u] += per_sentence[pick][u];
    }
  }

  // Pruning pass. In lenient mode a type is only protected up to the count it
  // actually reached.
  std::vector<std::size_t> floor(n_types, static_cast<std::size_t>(k));
  if (lenient) {
    for (std::size_t u = 0; u < n_types; ++u) floor[u] = std::min(floor[u], counter[u]);
  }
  std::vector<bool> keep(selected.size(), true);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto& c = per_sentence[selected[i]];
    bool needed = false;
    for (std::size_t u = 0; u < n_types; ++u) {
      if (counter[u] - c[u] < floor[u]) {
        needed = true;
        break;
      }
    }
    if (!needed) {
      keep[i] = false;
      for (std::size_t u = 0; u < n_types; ++u) counter[u] -= c[u];
    }
  }

  std::vector<std::size_t> retained;
  for (std::size_t i = 0; i < selected.size(); ++i)
    if (keep[i]) retained.push_back(selected[i]);
  std::sort(retained.begin(), retained.end());

  Dataset out;
  out.schema = d.schema;
  out.paradigm = d.paradigm;
  for (std::size_t s : retained) out.sentences.push_back(d.sentences[s]);
  return out;
}

}  // namespace

std::vector<std::size_t> type_counts(const Dataset& d) {
  std::vector<std::size_t> counts(d.schema.size(), 0);
  for (const auto& s : d.sentences)
    for (const auto& m : s.mentions)
      if (auto idx = d.schema.index_of(m.label)) ++counts[*idx];
  return counts;
}

Dataset greedy_sample(const Dataset& d, int k, std::uint64_t seed) {
  return greedy_impl(d, k, seed, false);
}

Dataset greedy_sample_lenient(const Dataset& d, int k, std::uint64_t seed) {
  return greedy_impl(d, k, seed, true);
}

Dataset without_sentences(const Dataset& d, const Dataset& exclude) {
  std::unordered_set<std::string> ids;
  for (const auto& s : exclude.sentences) ids.insert(s.id);
  Dataset out;
  out.schema = d.schema;
  out.paradigm = d.paradigm;
  for (const auto& s : d.sentences)
    if (!ids.count(s.id)) out.sentences.push_back(s);
  return out;
}

std::pair<Dataset, Dataset> sample_train_dev(const Dataset& d, const SampleSpec& spec) {
  if (spec.k_dev < 0 || spec.k_dev > spec.k_train) {
    throw ValidationError("sample spec: require 0 <= k_dev <= k_train");
  }
  Dataset train = greedy_sample(d, spec.k_train, spec.seed);
  Dataset dev;
  dev.schema = d.schema;
  dev.paradigm = d.paradigm;
  if (spec.k_dev > 0) dev = greedy_sample(without_sentences(d, train), spec.k_dev, spec.seed + 1);
  return {std::move(train), std::move(dev)};
}

std::vector<std::string> most_frequent_types(const Dataset& d, std::size_t n) {
  const auto counts = type_counts(d);
  std::vector<std::size_t> order(d.schema.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return d.schema.types()[a] < d.schema.types()[b];
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) out.push_back(d.schema.types()[order[i]]);
  return out;
}

TransferSplit split_class_transfer(const Dataset& d, const std::set<std::string>& source_types) {
  if (source_types.empty()) throw ValidationError("split_class_transfer: empty source type set");
  for (const auto& t : source_types) {
    if (!d.schema.contains(t)) throw ValidationError("split_class_transfer: unknown type '" + t + "'");
  }
  if (source_types.size() >= d.schema.size()) {
    throw ValidationError("split_class_transfer: source types cover the schema; target schema empty");
  }

  TransferSplit split;
  std::map<std::string, std::string> source_texts, target_texts;
  for (const auto& t : d.schema.types()) {
    auto& bucket = source_types.count(t) ? split.source_types : split.target_types;
    auto& texts = source_types.count(t) ? source_texts : target_texts;
    bucket.push_back(t);
    if (d.schema.label_texts().count(t)) texts[t] = d.schema.label_texts().at(t);
  }
  split.source_data.schema = Schema(split.source_types, source_texts);
  split.target_pool.schema = Schema(split.target_types, target_texts);
  split.source_data.paradigm = split.target_pool.paradigm = d.paradigm;

  for (const auto& s : d.sentences) {
    const bool has_target = std::any_of(s.mentions.begin(), s.mentions.end(),
                                        [&](const Mention& m) { return !source_types.count(m.label); });
    Sentence relabeled = s;
    // Relabeling to N.A. is deletion: an unannotated word is N.A.
    std::erase_if(relabeled.mentions, [&](const Mention& m) {
      return has_target ? source_types.count(m.label) > 0 : source_types.count(m.label) == 0;
    });
    (has_target ? split.target_pool : split.source_data).sentences.push_back(std::move(relabeled));
  }
  check_no_leakage(split);
  return split;
}

void check_no_leakage(const TransferSplit& split) {
  std::set<std::string> src(split.source_types.begin(), split.source_types.end());
  std::set<std::string> tgt(split.target_types.begin(), split.target_types.end());
  for (const auto& t : src) {
    if (tgt.count(t)) throw LeakageError("type '" + t + "' in both source and target schemas");
  }
  std::unordered_set<std::string> source_ids;
  for (const auto& s : split.source_data.sentences) {
    source_ids.insert(s.id);
    for (const auto& m : s.mentions) {
      if (!src.count(m.label)) {
        throw LeakageError("source sentence '" + s.id + "' carries non-source type '" + m.label + "'");
      }
    }
  }
  for (const auto& s : split.target_pool.sentences) {
    if (source_ids.count(s.id)) throw LeakageError("sentence '" + s.id + "' in both source and target");
    for (const auto& m : s.mentions) {
      if (!tgt.count(m.label)) {
        throw LeakageError("target sentence '" + s.id + "' carries non-target type '" + m.label + "'");
      }
    }
  }
}

SampleStats sample_stats(const Dataset& subset) {
  if (subset.schema.empty()) throw ValidationError("sample_stats: empty schema");
  SampleStats st;
  st.n_sentences = subset.sentences.size();
  const auto counts = type_counts(subset);
  for (auto c : counts) st.n_mentions += c;
  st.avg_shot = static_cast<double>(st.n_mentions) / static_cast<double>(subset.schema.size());
  return st;
}

}  // namespace protoed
