#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protoed/autodiff.hpp"
#include "protoed/corpus.hpp"

namespace protoed {

struct EncoderConfig {
  std::size_t buckets = 4096;
  std::size_t dim = 64;
  std::size_t hidden = 0;  // 0 -> 2 * dim
  int context_radius = 2;
  std::size_t window = 128;

  std::size_t hidden_width() const { return hidden == 0 ? 2 * dim : hidden; }
};

// Hash-bucket embeddings, a position-weighted mean over a +-radius context,
// then a tanh perceptron: h = W2 tanh(W1 x + b1) + b2.
struct EncoderParams {
  EncoderConfig config;
  Tensor embedding;  // buckets x dim
  Tensor position;   // (2r + 1) x dim
  Tensor w1;         // hidden x dim
  Tensor b1;
  Tensor w2;  // dim x hidden
  Tensor b2;

  static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

struct MomentumEncoder {
  EncoderParams shadow;
  double coefficient = 0.999;
};

std::size_t token_bucket(std::string_view token, std::size_t buckets);

// Token range [begin, end) of at most `width` tokens centred on `center`,
// shifted inward at sentence boundaries.
struct WindowRange {
  int begin = 0;
  int end = 0;
  int center_offset = 0;
};
WindowRange window(std::size_t n_tokens, int center, std::size_t width);
// Cropped copy of the sentence (mentions clipped to the window are kept).
Sentence window(const Sentence& sentence, int center, std::size_t width);

// Differentiable encoding of every token. Token i sees only context inside
// its own window.
std::vector<Var> encode(Tape& tape, std::span<const std::string> tokens, const EncoderParams& params);
std::vector<Vec> encode(std::span<const std::string> tokens, const EncoderParams& params);
inline std::vector<Vec> encode(const Sentence& s, const EncoderParams& p) { return encode(s.tokens, p); }

Var span_repr(Tape& tape, std::span<const Var> token_vectors, Span span);
Vec span_repr(const std::vector<Vec>& token_vectors, Span span);

std::vector<std::string> split_words(std::string_view text);
Var label_embed(Tape& tape, std::string_view label_text, const EncoderParams& params);
Vec label_embed(std::string_view label_text, const EncoderParams& params);

// shadow <- c * shadow + (1 - c) * primary, elementwise.
void momentum_update(const EncoderParams& primary, MomentumEncoder& momentum);

}  // namespace protoed
