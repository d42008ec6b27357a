#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "protoed/autodiff.hpp"
#include "protoed/corpus.hpp"
#include "protoed/distance.hpp"

namespace protoed {

// -log softmax(logits)[gold], skipping -inf entries (types without keys).
double ce_loss(std::span<const double> logits, std::size_t gold);

struct LabeledRep {
  Vec rep;  // transferred
  std::size_t type = 0;
};

// logits[y] = mean over batch items j != i of type y of -d(rep_i, rep_j);
// -inf for types with no such item. `n_slots` counts N.A.
Vec inbatch_cl_logits(const std::vector<LabeledRep>& batch, std::size_t i, std::size_t n_slots,
                      const DistanceSpec& d);

// Bounded FIFO of momentum-encoder keys.
class CLQueue {
 public:
  explicit CLQueue(std::size_t capacity = 256);

  void push(LabeledRep entry);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::deque<LabeledRep>& entries() const { return entries_; }
  bool has_type(std::size_t type) const;

 private:
  std::size_t capacity_;
  std::deque<LabeledRep> entries_;
};

Vec moco_cl_logits(std::span<const double> query, const CLQueue& queue, std::size_t n_slots, const DistanceSpec& d);

// Sentence-level support/query split of a few-shot train set. Support is a
// greedy k_s-shot sample; query then draws, per type in the same order, from
// the remaining sentences until k_q mentions are covered or none are left.
// `lenient` lets the support take everything for types short of k_s.
std::pair<Dataset, Dataset> episode_split(const Dataset& train, int k_s, int k_q, std::uint64_t seed,
                                          bool lenient = false);

// Episode sizes used when none are configured, keyed on the smallest
// per-type mention count.
std::pair<int, int> auto_episode_sizes(const Dataset& train);

double fused_loss(std::span<const double> branch_losses);

struct OptimizerSpec {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double warmup = 0.1;  // fraction of total steps
  std::size_t total_steps = 200;
  std::size_t batch_size = 128;  // sentences
  double clip = 1.0;             // global gradient norm

  void validate() const;
};

std::size_t warmup_steps(const OptimizerSpec& spec);
// lr * min(step / warm, (total - step) / (total - warm)).
double scheduled_lr(const OptimizerSpec& spec, std::size_t step);

// Rescales every gradient so the global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(std::vector<Vec>& grads, double max_norm);

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Vec>& grads, double lr, double weight_decay);
  std::size_t updates() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Vec> m_, v_;
};

}  // namespace protoed
