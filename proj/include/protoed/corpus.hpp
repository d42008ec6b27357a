#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protoed {

// Reserved label for words that trigger no in-schema event.
inline constexpr std::string_view kNoneLabel = "N.A.";

// Trigger span [start, end) over token indices.
struct Mention {
  int start = 0;
  int end = 0;
  std::string label;

  auto operator<=>(const Mention&) const = default;
};

struct Span {
  int start = 0;
  int end = 0;

  auto operator<=>(const Span&) const = default;
  int length() const { return end - start; }
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;

  bool operator==(const Sentence&) const = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<std::string> types,
                  std::map<std::string, std::string> label_texts = {});

  const std::vector<std::string>& types() const { return types_; }
  std::size_t size() const { return types_.size(); }
  bool empty() const { return types_.empty(); }

  // Index in `types()`; nullopt for unknown names (including N.A.).
  std::optional<std::size_t> index_of(std::string_view type) const;
  bool contains(std::string_view type) const { return index_of(type).has_value(); }

  // Natural-language label text; defaults to the type name with '-', '_',
  // ':' and '.' replaced by spaces.
  std::string label_text(std::string_view type) const;
  const std::map<std::string, std::string>& label_texts() const { return label_texts_; }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<std::string> types_;
  std::map<std::string, std::string> label_texts_;
};

enum class Paradigm { SequenceLabeling, SpanClassification };

struct Dataset {
  Schema schema;
  std::vector<Sentence> sentences;
  Paradigm paradigm = Paradigm::SequenceLabeling;
};

std::string default_label_text(std::string_view type);

// Throws ValidationError when a span is out of range, empty, overlapping, or
// carries a type outside the schema.
void validate(const Sentence& sentence, const Schema& schema);
void validate(const Dataset& dataset);

// Sorted, de-duplicated mention types.
Schema infer_schema(const std::vector<Sentence>& sentences);

// JSONL corpus: one {"id", "tokens", "events": [{"type","start","end"}]} per
// line. Blank lines are skipped. When `schema` is absent it is inferred.
Dataset parse_corpus(const std::string& path, std::optional<Schema> schema = std::nullopt,
                     Paradigm paradigm = Paradigm::SequenceLabeling);
Dataset parse_corpus(std::istream& in, std::optional<Schema> schema = std::nullopt,
                     Paradigm paradigm = Paradigm::SequenceLabeling);
Sentence parse_sentence_line(std::string_view line, std::size_t line_number);

std::string to_jsonl(const Sentence& sentence);
void write_corpus(const std::string& path, const Dataset& dataset);
void write_corpus(std::ostream& out, const Dataset& dataset);

// Schema file: {"types": [...], "label_texts": {...}}.
Schema read_schema(const std::string& path);
void write_schema(const std::string& path, const Schema& schema);

std::vector<std::string> encode_bio(const Sentence& sentence, const Schema& schema);
// Lenient: an I-t after O or after a different type opens a new mention.
std::vector<Mention> decode_bio(const std::vector<std::string>& tags);

std::vector<Span> enumerate_spans(std::size_t n_tokens, int max_len);
inline std::vector<Span> enumerate_spans(const Sentence& s, int max_len) {
  return enumerate_spans(s.tokens.size(), max_len);
}

std::vector<Mention> sorted_mentions(std::vector<Mention> mentions);

}  // namespace protoed
