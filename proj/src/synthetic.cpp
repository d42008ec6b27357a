#include "protoed/synthetic.hpp"

#include <algorithm>
#include <set>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

namespace {

struct NamedType {
  const char* name;
  const char* label;
  std::vector<const char*> words;  // label word first
};

const std::vector<NamedType>& named_types() {
  static const std::vector<NamedType> types = {
      {"Attack", "attack", {"attack", "bombed", "raided"}},
      {"Transport", "transport", {"transport", "traveled", "shipped"}},
      {"Die", "die", {"die", "died", "perished"}},
      {"Meet", "meet", {"meet", "met", "gathered"}},
      {"Elect", "elect", {"elect", "elected", "voted"}},
      {"Injure", "injure", {"injure", "wounded", "hurt"}},
      {"Marry", "marry", {"marry", "married", "wed"}},
      {"Sue", "sue", {"sue", "sued", "litigated"}},
      {"Arrest", "arrest", {"arrest", "arrested", "detained"}},
      {"Donate", "donate", {"donate", "donated", "gave"}},
  };
  return types;
}

const char* const kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
const char* const kNuclei[] = {"a", "e", "i", "o", "u"};

std::string pseudo_word(Rng& rng, std::set<std::string>& taken) {
  for (;;) {
    std::string w;
    const std::size_t syl = 2 + uniform_index(rng, 2);
    for (std::size_t i = 0; i < syl; ++i) {
      w += kOnsets[uniform_index(rng, std::size(kOnsets))];
      w += kNuclei[uniform_index(rng, std::size(kNuclei))];
    }
    if (taken.insert(w).second) return w;
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) throw ConfigError("distractor_rate must lie in [0, 1]");
  if (min_length < 1 || max_length < min_length) throw ConfigError("need 1 <= min_length <= max_length");
  if (distractor_rate < 1.0) {
    if (n_types == 0) throw ConfigError("planting triggers needs at least one type");
    if (triggers_per_type == 0) throw ConfigError("triggers_per_type must be >= 1");
    if (max_triggers == 0) throw ConfigError("max_triggers must be >= 1");
    if (2 * max_triggers - 1 > min_length) {
      throw ConfigError("min_length too short for max_triggers non-adjacent triggers");
    }
  }
  if (vocab_size == 0) throw ConfigError("vocab_size must be >= 1");
}

SyntheticLexicon synthetic_lexicon(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticLexicon lex;
  Rng rng(derive_seed(spec.lexicon_seed, "lexicon"));
  std::set<std::string> taken;
  for (const auto& t : named_types())
    for (const char* w : t.words) taken.insert(w);

  std::vector<std::string> names;
  std::map<std::string, std::string> labels;
  for (std::size_t t = 0; t < spec.n_types; ++t) {
    std::string name, label;
    std::vector<std::string> pool;
    if (t < named_types().size()) {
      const auto& nt = named_types()[t];
      name = nt.name;
      label = nt.label;
      for (const char* w : nt.words) pool.emplace_back(w);
    } else {
      label = pseudo_word(rng, taken);
      name = "Event-" + label;
      pool.push_back(label);
    }
    while (pool.size() < spec.triggers_per_type) pool.push_back(pseudo_word(rng, taken));
    pool.resize(spec.triggers_per_type);
    for (const auto& w : pool) lex.trigger_type[w] = name;
    names.push_back(name);
    labels[name] = label;
    lex.triggers.push_back(std::move(pool));
  }
  lex.schema = Schema(names, labels);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) lex.distractors.push_back(pseudo_word(rng, taken));
  return lex;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  const SyntheticLexicon lex = synthetic_lexicon(spec);
  Dataset d;
  d.schema = lex.schema;
  Rng rng(derive_seed(spec.seed, "synthetic"));
  for (std::size_t s = 0; s < spec.n_sentences; ++s) {
    Sentence sent;
    sent.id = spec.id_prefix + "-" + std::to_string(s);
    const std::size_t len = spec.min_length + uniform_index(rng, spec.max_length - spec.min_length + 1);
    sent.tokens.resize(len);
    for (auto& tok : sent.tokens) tok = lex.distractors[uniform_index(rng, lex.distractors.size())];
    if (uniform01(rng) >= spec.distractor_rate) {
      const std::size_t k = 1 + uniform_index(rng, spec.max_triggers);
      // Non-adjacent positions: pick k gaps among len - k + 1 slots.
      std::vector<std::size_t> slots(len - k + 1);
      for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
      shuffle(slots.begin(), slots.end(), rng);
      slots.resize(k);
      std::sort(slots.begin(), slots.end());
      for (std::size_t j = 0; j < k; ++j) {
        // Map the j-th chosen slot to a position with at least one gap.
        const int pos = static_cast<int>(slots[j] + j);
        const std::size_t t = uniform_index(rng, spec.n_types);
        const auto& pool = lex.triggers[t];
        sent.tokens[pos] = pool[uniform_index(rng, pool.size())];
        sent.mentions.push_back({pos, pos + 1, lex.schema.types()[t]});
      }
    }
    d.sentences.push_back(std::move(sent));
  }
  validate(d);
  return d;
}

std::vector<Sentence> rule_based_predict(const SyntheticLexicon& lex, const std::vector<Sentence>& sentences) {
  std::vector<Sentence> out;
  for (const auto& s : sentences) {
    Sentence p;
    p.id = s.id;
    p.tokens = s.tokens;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      auto it = lex.trigger_type.find(s.tokens[i]);
      if (it != lex.trigger_type.end()) p.mentions.push_back({static_cast<int>(i), static_cast<int>(i) + 1, it->second});
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace protoed
