#include "protoed/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

namespace {
constexpr double kEmbeddingScale = 0.02;
}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& c, std::uint64_t seed) {
  if (c.buckets == 0 || c.dim == 0 || c.context_radius < 0 || c.window == 0) {
    throw ConfigError("encoder: buckets, dim and window must be positive");
  }
  const std::size_t m = c.dim, h = c.hidden_width();
  const std::size_t width = static_cast<std::size_t>(2 * c.context_radius + 1);
  EncoderParams p;
  p.config = c;
  p.embedding = Tensor("encoder.embedding", {c.buckets, m});
  p.position = Tensor("encoder.position", {width, m});
  p.w1 = Tensor("encoder.w1", {h, m});
  p.b1 = Tensor("encoder.b1", {h});
  p.w2 = Tensor("encoder.w2", {m, h});
  p.b2 = Tensor("encoder.b2", {m});

  Rng rng(derive_seed(seed, "encoder"));
  for (double& v : p.embedding.value) v = kEmbeddingScale * standard_normal(rng);
  for (std::size_t r = 0; r < width; ++r) {
    const double w = static_cast<int>(r) == c.context_radius ? 1.0 : 0.1;
    for (double& v : p.position.row(r)) v = w * static_cast<double>(width);
  }
  const double s1 = 1.0 / std::sqrt(static_cast<double>(m));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& v : p.w1.value) v = s1 * standard_normal(rng);
  for (double& v : p.w2.value) v = s2 * standard_normal(rng);
  return p;
}

std::vector<Tensor*> EncoderParams::tensors() { return {&embedding, &position, &w1, &b1, &w2, &b2}; }

std::vector<const Tensor*> EncoderParams::tensors() const {
  return {&embedding, &position, &w1, &b1, &w2, &b2};
}

std::size_t token_bucket(std::string_view token, std::size_t buckets) { return fnv1a64(token) % buckets; }

WindowRange window(std::size_t n_tokens, int center, std::size_t width) {
  const int n = static_cast<int>(n_tokens);
  if (center < 0 || center >= n) throw ValidationError("window: center out of range");
  if (width == 0) throw ValidationError("window: width must be >= 1");
  const int w = static_cast<int>(std::min<std::size_t>(width, n_tokens));
  const int begin = std::clamp(center - w / 2, 0, n - w);
  return {begin, begin + w, center - begin};
}

Sentence window(const Sentence& s, int center, std::size_t width) {
  const WindowRange r = window(s.tokens.size(), center, width);
  Sentence out;
  out.id = s.id;
  out.tokens.assign(s.tokens.begin() + r.begin, s.tokens.begin() + r.end);
  for (const auto& m : s.mentions) {
    if (m.start >= r.begin && m.end <= r.end) out.mentions.push_back({m.start - r.begin, m.end - r.begin, m.label});
  }
  return out;
}

std::vector<Var> encode(Tape& tape, std::span<const std::string> tokens, const EncoderParams& p) {
  if (tokens.empty()) throw ValidationError("encode: empty token sequence");
  std::vector<std::size_t> buckets(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) buckets[i] = token_bucket(tokens[i], p.config.buckets);
  std::vector<Var> out;
  out.reserve(tokens.size());
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const WindowRange r = window(tokens.size(), i, p.config.window);
    Var x = tape.embed_context(p.embedding, p.position, buckets, i, r.begin, r.end);
    Var hdn = tape.tanh(tape.affine(p.w1, p.b1, x));
    out.push_back(tape.affine(p.w2, p.b2, hdn));
  }
  return out;
}

std::vector<Vec> encode(std::span<const std::string> tokens, const EncoderParams& p) {
  Tape tape(false);
  const auto vars = encode(tape, tokens, p);
  std::vector<Vec> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(tape.value(v));
  return out;
}

Var span_repr(Tape& tape, std::span<const Var> token_vectors, Span span) {
  if (span.start < 0 || span.end > static_cast<int>(token_vectors.size()) || span.start >= span.end) {
    throw ValidationError("span_repr: empty or out-of-range span");
  }
  if (span.length() == 1) return token_vectors[span.start];
  return tape.mean(token_vectors.subspan(span.start, span.length()));
}

Vec span_repr(const std::vector<Vec>& token_vectors, Span span) {
  if (span.start < 0 || span.end > static_cast<int>(token_vectors.size()) || span.start >= span.end) {
    throw ValidationError("span_repr: empty or out-of-range span");
  }
  Vec out(token_vectors[span.start].size(), 0.0);
  for (int i = span.start; i < span.end; ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += token_vectors[i][k];
  for (double& v : out) v /= static_cast<double>(span.length());
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

Var label_embed(Tape& tape, std::string_view text, const EncoderParams& p) {
  const auto words = split_words(text);
  if (words.empty()) throw ValidationError("label_embed: empty label text");
  const auto vars = encode(tape, words, p);
  return span_repr(tape, vars, Span{0, static_cast<int>(vars.size())});
}

Vec label_embed(std::string_view text, const EncoderParams& p) {
  Tape tape(false);
  return tape.value(label_embed(tape, text, p));
}

void momentum_update(const EncoderParams& primary, MomentumEncoder& mom) {
  const double c = mom.coefficient;
  if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("momentum coefficient must lie in [0, 1]");
  auto src = primary.tensors();
  auto dst = mom.shadow.tensors();
  for (std::size_t t = 0; t < src.size(); ++t) {
    if (src[t]->shape != dst[t]->shape) throw ShapeError("momentum_update: shape mismatch on " + src[t]->name);
    Vec& d = dst[t]->value;
    const Vec& s = src[t]->value;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = c * d[i] + (1.0 - c) * s[i];
  }
}

}  // namespace protoed
