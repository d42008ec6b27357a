#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "protoed/corpus.hpp"
#include "protoed/matrix.hpp"

namespace protoed {

// Transition scores over a tag alphabet of size T, plus start and stop
// potentials. Entries may be -inf to forbid a transition.
struct TransitionTable {
  std::size_t num_tags = 0;
  Matrix trans;  // trans(from, to)
  Vec start;
  Vec stop;

  TransitionTable() = default;
  explicit TransitionTable(std::size_t t) : num_tags(t), trans(t, t), start(t, 0.0), stop(t, 0.0) {}
};

// Log-space forward recursion. `emissions` is N x T, N >= 1.
double crf_log_partition(const Matrix& emissions, const TransitionTable& table);

double crf_path_score(const Matrix& emissions, const TransitionTable& table, const std::vector<int>& path);

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;
};

// Best path; among equally scored paths the lexicographically smallest tag
// sequence wins.
ViterbiResult crf_viterbi(const Matrix& emissions, const TransitionTable& table);

struct CrfGradient {
  Matrix emissions;
  Matrix trans;
  Vec start;
  Vec stop;
};

// log Z - score(gold). Fills `grad` (marginals minus gold indicators) when
// non-null.
double crf_nll(const Matrix& emissions, const TransitionTable& table, const std::vector<int>& gold,
               CrfGradient* grad = nullptr);

// BIO tag layout for n event types: 0 = O, 1 + 2t = B-t, 2 + 2t = I-t.
namespace bio {
inline std::size_t tag_count(std::size_t n_types) { return 1 + 2 * n_types; }
inline int begin_tag(std::size_t type) { return static_cast<int>(1 + 2 * type); }
inline int inside_tag(std::size_t type) { return static_cast<int>(2 + 2 * type); }
inline bool is_outside(int tag) { return tag == 0; }
inline bool is_begin(int tag) { return tag > 0 && tag % 2 == 1; }
inline bool is_inside(int tag) { return tag > 0 && tag % 2 == 0; }
// Type index of a tag; n_types (the N.A. slot) for O.
inline std::size_t type_of(int tag, std::size_t n_types) {
  return tag == 0 ? n_types : static_cast<std::size_t>((tag - 1) / 2);
}
std::vector<std::string> tag_names(const Schema& schema);
std::vector<int> tags_from_mentions(const Sentence& sentence, const Schema& schema);
std::vector<Mention> mentions_from_tags(const std::vector<int>& tags, const Schema& schema);
// Maps N x (n+1) type logits (N.A. last) onto N x T BIO emissions: O takes
// the N.A. logit, B-t and I-t both take logit t.
Matrix emissions_from_logits(const Matrix& logits);
// For each BIO tag, the logit column it reads.
std::vector<int> emission_columns(std::size_t n_types);
}  // namespace bio

// Collapsed transition roles. O->I and the start roles extend the listed
// abstract roles so that every concrete BIO transition has one.
enum class Role : int {
  OtoB,
  OtoO,
  BtoIsame,
  BtoB,
  BtoO,
  ItoIsame,
  ItoB,
  ItoO,
  ToIdiff,  // B-t or I-t followed by I-u, u != t
  OtoI,
  StartToO,
  StartToB,
  StartToI,
};
inline constexpr std::size_t kRoleCount = 13;

struct CollapsedTransitions {
  std::array<double, kRoleCount> scores{};
  double& operator[](Role r) { return scores[static_cast<std::size_t>(r)]; }
  double operator[](Role r) const { return scores[static_cast<std::size_t>(r)]; }
};

Role role_of(int from_tag, int to_tag);
Role start_role_of(int to_tag);

// Index layout [trans (T*T) | start (T) | stop (T)] mapping each concrete
// entry to a role index (-1: constant zero). Used for differentiable expansion.
std::vector<int> collapsed_index_map(std::size_t n_types);

TransitionTable expand_collapsed(const CollapsedTransitions& ct, std::size_t n_types);

// Inference-only decoding: type logits (N x (n+1)) mapped to BIO emissions,
// Viterbi over the expanded collapsed table.
std::vector<int> cdt_decode(const Matrix& logits, const CollapsedTransitions& ct, std::size_t n_types);

// Prototype-derived transitions: score(y -> y') = p_y^T W p_y' with the N.A.
// prototype standing in for O; start and stop are zero.
TransitionTable pa_transitions(const std::vector<Vec>& prototypes, const Matrix& w);

// Index layout [trans (T*T)] into a row-major (n+1) x (n+1) type-pair matrix.
std::vector<int> pa_index_map(std::size_t n_types);

}  // namespace protoed
