#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "protoed/autodiff.hpp"
#include "protoed/corpus.hpp"
#include "protoed/distance.hpp"
#include "protoed/encoder.hpp"

namespace protoed {

enum class TransferKind { Identity, Normalize, DownProject, DownProjectNormalize, Reparameterize };

struct TransferSpec {
  TransferKind kind = TransferKind::Identity;
  std::size_t out_dim = 0;  // projections and reparameterisation; 0 -> dim / 2

  bool operator==(const TransferSpec&) const = default;
};

// Short codes: I, N, D, DN, R.
std::string to_code(TransferKind kind);
TransferKind transfer_from_code(const std::string& code);

inline constexpr double kVarianceFloor = 1e-3;

// Learnable parameters behind a transfer function.
struct TransferHeads {
  TransferSpec spec;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;  // n
  Tensor projection;        // n x m       (D, DN)
  Tensor mean_w, mean_b;    // n x m, n    (R)
  Tensor var_w, var_b;      // n x m, n    (R)

  static TransferHeads init(const TransferSpec& spec, std::size_t in_dim, std::uint64_t seed);
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  // Width of a transferred vector: n, 2n for Gaussians, m for I and N.
  std::size_t output_size() const;
};

struct GaussianRepr {
  Vec mean;
  Vec var;
};
// Gaussians travel as packed [mean; variance] vectors.
GaussianRepr unpack_gaussian(std::span<const double> packed);
Vec pack_gaussian(const GaussianRepr& g);

// identity: h; normalize: h/|h|; down_project: M h; down_project_normalize:
// M h/|h|; reparameterize: packed N(mu(h), softplus(.) + floor).
Var transfer(Tape& tape, Var h, const TransferHeads& heads);
Vec transfer(std::span<const double> h, const TransferHeads& heads);

enum class ProtoSource { Mentions, Label, Both };
enum class Aggregation { Feature, Score, Loss };

// Prototypes in transfer space, one slot per schema type plus N.A. (last).
// Feature aggregation holds exactly one vector per slot.
struct PrototypeSet {
  Aggregation aggregation = Aggregation::Feature;
  ProtoSource provenance = ProtoSource::Mentions;
  std::vector<std::vector<Vec>> slots;

  std::size_t n_types() const { return slots.empty() ? 0 : slots.size() - 1; }
  std::size_t none_index() const { return n_types(); }
};

// Feature aggregation averages in transfer space; with both sources the
// mention mean and the label vector are averaged with equal weight. Score
// aggregation keeps every vector. N.A. gets `null_prototype` (encoder space).
// Throws ValidationError naming a type with empty support under a mention
// source, and ConfigError for loss-level aggregation (built per branch).
PrototypeSet build_prototypes(const std::map<std::string, std::vector<Vec>>& support, const Schema& schema,
                              ProtoSource source, Aggregation aggregation, const EncoderParams& encoder,
                              const TransferHeads& transfer_heads, std::span<const double> null_prototype);

// `query` is already transferred.
Vec logits_feature(std::span<const double> query, const PrototypeSet& prototypes, const DistanceSpec& d);
Vec logits_score(std::span<const double> query, const PrototypeSet& prototypes, const DistanceSpec& d);

// argmin_y min_{c in C_y} d(query, c); ties go to the earlier slot, so N.A.
// loses ties.
std::size_t predict_nn(std::span<const double> query, const PrototypeSet& prototypes, const DistanceSpec& d);

}  // namespace protoed
