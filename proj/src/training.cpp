#include "protoed/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "protoed/error.hpp"
#include "protoed/random.hpp"
#include "protoed/sampler.hpp"

namespace protoed {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double ce_loss(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size() || logits[gold] == kNegInf) throw ValidationError("ce_loss: gold type has no logit");
  double mx = kNegInf;
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits)
    if (v != kNegInf) s += std::exp(v - mx);
  return mx + std::log(s) - logits[gold];
}

Vec inbatch_cl_logits(const std::vector<LabeledRep>& batch, std::size_t i, std::size_t n_slots,
                      const DistanceSpec& d) {
  if (batch.size() < 2) throw ValidationError("inbatch_cl_logits: batch needs at least two items");
  if (i >= batch.size()) throw ValidationError("inbatch_cl_logits: query index out of range");
  Vec sum(n_slots, 0.0);
  std::vector<std::size_t> count(n_slots, 0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (j == i) continue;
    if (batch[j].type >= n_slots) throw ValidationError("inbatch_cl_logits: item type out of range");
    sum[batch[j].type] += distance(batch[i].rep, batch[j].rep, d);
    ++count[batch[j].type];
  }
  Vec out(n_slots, kNegInf);
  for (std::size_t y = 0; y < n_slots; ++y)
    if (count[y] > 0) out[y] = -sum[y] / static_cast<double>(count[y]);
  return out;
}

CLQueue::CLQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("queue capacity must be >= 1");
}

void CLQueue::push(LabeledRep entry) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(entry));
}

bool CLQueue::has_type(std::size_t type) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const LabeledRep& e) { return e.type == type; });
}

Vec moco_cl_logits(std::span<const double> query, const CLQueue& queue, std::size_t n_slots, const DistanceSpec& d) {
  if (queue.empty()) throw ValidationError("moco_cl_logits: queue is empty");
  Vec sum(n_slots, 0.0);
  std::vector<std::size_t> count(n_slots, 0);
  for (const auto& e : queue.entries()) {
    if (e.type >= n_slots) throw ValidationError("moco_cl_logits: key type out of range");
    sum[e.type] += distance(query, e.rep, d);
    ++count[e.type];
  }
  Vec out(n_slots, kNegInf);
  for (std::size_t y = 0; y < n_slots; ++y)
    if (count[y] > 0) out[y] = -sum[y] / static_cast<double>(count[y]);
  return out;
}

std::pair<Dataset, Dataset> episode_split(const Dataset& train, int k_s, int k_q, std::uint64_t seed, bool lenient) {
  if (k_s < 1 || k_q < 1) throw ValidationError("episode_split: k_s and k_q must be >= 1");
  const auto totals = type_counts(train);
  const auto& types = train.schema.types();
  if (!lenient) {
    for (std::size_t t = 0; t < types.size(); ++t) {
      if (totals[t] < static_cast<std::size_t>(k_s) + 1) {
        throw InfeasibleError("episode_split: type '" + types[t] + "' has " + std::to_string(totals[t]) +
                              " mentions, need at least k_s + 1 = " + std::to_string(k_s + 1));
      }
    }
  }
  Dataset support = lenient ? greedy_sample_lenient(train, k_s, derive_seed(seed, "support"))
                            : greedy_sample(train, k_s, derive_seed(seed, "support"));
  Dataset rest = without_sentences(train, support);

  std::vector<std::size_t> order(types.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return totals[a] != totals[b] ? totals[a] < totals[b] : types[a] < types[b];
  });

  std::vector<std::vector<std::size_t>> per_sentence(rest.sentences.size(), std::vector<std::size_t>(types.size(), 0));
  for (std::size_t s = 0; s < rest.sentences.size(); ++s)
    for (const auto& m : rest.sentences[s].mentions) ++per_sentence[s][*train.schema.index_of(m.label)];

  Rng rng(derive_seed(seed, "query"));
  std::vector<bool> taken(rest.sentences.size(), false);
  std::vector<std::size_t> counter(types.size(), 0);
  for (std::size_t t : order) {
    while (counter[t] < static_cast<std::size_t>(k_q)) {
      std::vector<std::size_t> candidates;
      for (std::size_t s = 0; s < rest.sentences.size(); ++s)
        if (!taken[s] && per_sentence[s][t] > 0) candidates.push_back(s);
      if (candidates.empty()) break;
      const std::size_t pick = candidates[uniform_index(rng, candidates.size())];
      taken[pick] = true;
      for (std::size_t u = 0; u < types.size(); ++u) counter[u] += per_sentence[pick][u];
    }
  }
  Dataset query;
  query.schema = train.schema;
  query.paradigm = train.paradigm;
  for (std::size_t s = 0; s < rest.sentences.size(); ++s)
    if (taken[s]) query.sentences.push_back(rest.sentences[s]);
  if (query.sentences.empty()) throw InfeasibleError("episode_split: no sentences left for the query set");
  return {std::move(support), std::move(query)};
}

std::pair<int, int> auto_episode_sizes(const Dataset& train) {
  const auto totals = type_counts(train);
  std::size_t lo = totals.empty() ? 0 : *std::min_element(totals.begin(), totals.end());
  if (lo < 5) return {1, 1};
  if (lo < 10) return {2, 3};
  return {5, 5};
}

double fused_loss(std::span<const double> branch_losses) {
  if (branch_losses.empty()) throw ValidationError("fused_loss: no branches");
  double s = 0.0;
  for (double v : branch_losses) s += v;
  return s;
}

void OptimizerSpec::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(warmup >= 0.0 && warmup <= 1.0)) throw ConfigError("warmup must lie in [0, 1]");
  if (total_steps == 0) throw ConfigError("total steps must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(clip > 0.0)) throw ConfigError("clip must be > 0");
}

std::size_t warmup_steps(const OptimizerSpec& spec) {
  return static_cast<std::size_t>(std::llround(spec.warmup * static_cast<double>(spec.total_steps)));
}

double scheduled_lr(const OptimizerSpec& spec, std::size_t step) {
  const std::size_t warm = warmup_steps(spec);
  const double s = static_cast<double>(step);
  const double total = static_cast<double>(spec.total_steps);
  double up = warm == 0 ? std::numeric_limits<double>::infinity() : s / static_cast<double>(warm);
  double down = warm >= spec.total_steps ? std::numeric_limits<double>::infinity()
                                         : (total - s) / (total - static_cast<double>(warm));
  double f = std::min(up, down);
  f = std::clamp(f, 0.0, 1.0);
  return spec.lr * f;
}

double clip_global_norm(std::vector<Vec>& grads, double max_norm) {
  double ss = 0.0;
  for (const auto& g : grads)
    for (double v : g) ss += v * v;
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double c = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g) v *= c;
  }
  return norm;
}

void AdamW::step(const std::vector<Tensor*>& params, const std::vector<Vec>& grads, double lr, double wd) {
  if (params.size() != grads.size()) throw ShapeError("AdamW: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("AdamW: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Vec& x = params[k]->value;
    const Vec& g = grads[k];
    if (g.size() != x.size()) throw ShapeError("AdamW: gradient shape mismatch on " + params[k]->name);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      const double mh = m_[k][i] / bc1;
      const double vh = v_[k][i] / bc2;
      x[i] -= lr * (mh / (std::sqrt(vh) + eps_) + wd * x[i]);
    }
  }
}

}  // namespace protoed
