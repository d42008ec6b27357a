#include "protoed/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protoed/error.hpp"

namespace protoed {

using json = nlohmann::json;

std::string default_label_text(std::string_view type) {
  std::string out(type);
  for (char& c : out) {
    if (c == '-' || c == '_' || c == ':' || c == '.') c = ' ';
  }
  return out;
}

Schema::Schema(std::vector<std::string> types, std::map<std::string, std::string> label_texts)
    : types_(std::move(types)), label_texts_(std::move(label_texts)) {
  std::set<std::string> seen;
  for (const auto& t : types_) {
    if (t.empty()) throw ValidationError("schema: empty type name");
    if (t == kNoneLabel) throw ValidationError("schema: reserved name N.A. cannot be a type");
    if (!seen.insert(t).second) throw ValidationError("schema: duplicate type '" + t + "'");
  }
  for (const auto& [type, text] : label_texts_) {
    if (!seen.count(type)) {
      throw ValidationError("schema: label text given for unknown type '" + type + "'");
    }
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view type) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i] == type) return i;
  }
  return std::nullopt;
}

std::string Schema::label_text(std::string_view type) const {
  auto it = label_texts_.find(std::string(type));
  if (it != label_texts_.end()) return it->second;
  return default_label_text(type);
}

void validate(const Sentence& s, const Schema& schema) {
  const int n = static_cast<int>(s.tokens.size());
  if (n == 0) throw ValidationError("sentence '" + s.id + "': no tokens");
  std::vector<Mention> sorted = sorted_mentions(s.mentions);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Mention& m = sorted[i];
    if (m.start < 0 || m.end > n || m.start >= m.end) {
      throw ValidationError("sentence '" + s.id + "': span [" + std::to_string(m.start) + ", " +
                            std::to_string(m.end) + ") out of range for " + std::to_string(n) +
                            " tokens");
    }
    if (!schema.contains(m.label)) {
      throw ValidationError("sentence '" + s.id + "': type '" + m.label + "' not in schema");
    }
    if (i > 0 && sorted[i - 1].end > m.start) {
      throw ValidationError("sentence '" + s.id + "': overlapping mentions");
    }
  }
}

void validate(const Dataset& d) {
  for (const auto& s : d.sentences) validate(s, d.schema);
}

Schema infer_schema(const std::vector<Sentence>& sentences) {
  std::set<std::string> types;
  for (const auto& s : sentences)
    for (const auto& m : s.mentions) types.insert(m.label);
  return Schema(std::vector<std::string>(types.begin(), types.end()));
}

Sentence parse_sentence_line(std::string_view line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + "malformed JSON (" + e.what() + ")");
  }
  Sentence s;
  try {
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("events")) {
      for (const auto& e : j.at("events")) {
        s.mentions.push_back(
            {e.at("start").get<int>(), e.at("end").get<int>(), e.at("type").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(where + "bad sentence record (" + e.what() + ")");
  }
  return s;
}

Dataset parse_corpus(std::istream& in, std::optional<Schema> schema, Paradigm paradigm) {
  Dataset d;
  d.paradigm = paradigm;
  std::string line;
  std::size_t line_number = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sentence s = parse_sentence_line(line, line_number);
    if (!ids.insert(s.id).second) {
      throw ValidationError("line " + std::to_string(line_number) + ": duplicate id '" + s.id + "'");
    }
    d.sentences.push_back(std::move(s));
  }
  d.schema = schema ? std::move(*schema) : infer_schema(d.sentences);
  validate(d);
  return d;
}

Dataset parse_corpus(const std::string& path, std::optional<Schema> schema, Paradigm paradigm) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return parse_corpus(in, std::move(schema), paradigm);
}

std::string to_jsonl(const Sentence& s) {
  json events = json::array();
  for (const auto& m : s.mentions) {
    events.push_back({{"type", m.label}, {"start", m.start}, {"end", m.end}});
  }
  json j = {{"id", s.id}, {"tokens", s.tokens}, {"events", events}};
  return j.dump();
}

void write_corpus(std::ostream& out, const Dataset& d) {
  for (const auto& s : d.sentences) out << to_jsonl(s) << '\n';
}

void write_corpus(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus '" + path + "'");
  write_corpus(out, d);
}

Schema read_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema '" + path + "'");
  json j;
  try {
    j = json::parse(in);
    auto types = j.at("types").get<std::vector<std::string>>();
    std::map<std::string, std::string> texts;
    if (j.contains("label_texts")) texts = j.at("label_texts").get<std::map<std::string, std::string>>();
    return Schema(std::move(types), std::move(texts));
  } catch (const json::exception& e) {
    throw ParseError("schema '" + path + "': " + e.what());
  }
}

void write_schema(const std::string& path, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema '" + path + "'");
  json j = {{"types", schema.types()}, {"label_texts", schema.label_texts()}};
  out << j.dump(2) << '\n';
}

std::vector<std::string> encode_bio(const Sentence& s, const Schema& schema) {
  validate(s, schema);
  std::vector<std::string> tags(s.tokens.size(), "O");
  for (const auto& m : s.mentions) {
    tags[m.start] = "B-" + m.label;
    for (int i = m.start + 1; i < m.end; ++i) tags[i] = "I-" + m.label;
  }
  return tags;
}

std::vector<Mention> decode_bio(const std::vector<std::string>& tags) {
  std::vector<Mention> out;
  std::optional<Mention> open;
  auto close = [&] {
    if (open) out.push_back(*open);
    open.reset();
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      close();
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) {
      throw ParseError("unknown BIO tag '" + tag + "'");
    }
    std::string type = tag.substr(2);
    if (tag[0] == 'I' && open && open->label == type) {
      open->end = i + 1;
      continue;
    }
    close();
    open = Mention{i, i + 1, std::move(type)};
  }
  close();
  return out;
}

std::vector<Span> enumerate_spans(std::size_t n_tokens, int max_len) {
  if (max_len < 1) throw ValidationError("enumerate_spans: max_len must be >= 1");
  std::vector<Span> out;
  const int n = static_cast<int>(n_tokens);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= std::min(n, i + max_len); ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<Mention> sorted_mentions(std::vector<Mention> mentions) {
  std::sort(mentions.begin(), mentions.end());
  return mentions;
}

}  // namespace protoed
