#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "protoed/autodiff.hpp"
#include "protoed/corpus.hpp"
#include "protoed/crf.hpp"
#include "protoed/encoder.hpp"
#include "protoed/method.hpp"
#include "protoed/proto.hpp"
#include "protoed/training.hpp"

namespace protoed {

struct ModelOptions {
  Paradigm paradigm = Paradigm::SequenceLabeling;
  int max_span_len = 3;
  // N.A. items kept per step, as a multiple of the trigger items.
  double negative_ratio = 3.0;
};

// Encoder plus every head the method needs. `method.cl` is always resolved
// (never auto). Only the tensors a method uses are allocated.
struct Model {
  MethodConfig method;
  Schema schema;
  ModelOptions options;
  EncoderParams encoder;
  TransferHeads transfer;
  Tensor null_label;    // encoder space
  Tensor null_mention;  // encoder space
  Tensor linear_w, linear_b;
  Tensor crf_trans, crf_start, crf_stop;
  Tensor cdt_roles;
  Tensor pa_w;

  static Model init(const MethodConfig& method, const Schema& schema, const EncoderConfig& encoder,
                    const ModelOptions& options, std::uint64_t seed);

  std::size_t n_slots() const { return schema.size() + 1; }
  bool prototype_learning() const;  // episodic support/query training
  bool has_label_branch() const;
  bool has_mention_branch() const;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

ClMode resolve_cl(ClMode mode, std::size_t n_train_sentences, std::size_t threshold = 128);

// A loss item: a token (sequence paradigm) or a candidate span.
struct Item {
  std::size_t sentence = 0;
  Span span;
  std::size_t gold = 0;  // slot index, N.A. last
};

// All trigger items of the sentences plus N.A. items down-sampled to
// ratio * max(1, #triggers), chosen with `seed`.
std::vector<Item> select_items(const Model& model, const std::vector<const Sentence*>& sentences, std::uint64_t seed);

struct StepBatch {
  std::vector<const Sentence*> query;
  std::vector<const Sentence*> support;  // episodic training only
  std::uint64_t seed = 0;
};

struct LossResult {
  Var total;
  bool empty = true;  // no loss term could be formed
  std::vector<Item> items;
  std::vector<std::pair<std::string, double>> terms;
};

LossResult compute_loss(Tape& tape, const Model& model, const StepBatch& batch, const CLQueue* queue);

struct TrainState {
  Model model;
  AdamW optimizer;
  std::optional<MomentumEncoder> momentum;
  CLQueue queue;
  std::size_t step = 0;

  TrainState(Model m, std::size_t queue_capacity = 256, double momentum_coefficient = 0.999);
};

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
};

// One optimizer update at the scheduled lr for `state.step`. Throws
// NumericError on a non-finite loss.
StepResult train_step(TrainState& state, const StepBatch& batch, const OptimizerSpec& spec);

// Gradients of the loss for every model tensor (zeros where unreached).
std::vector<Vec> loss_gradients(const Model& model, const StepBatch& batch, const CLQueue* queue, double* loss);
double loss_value(const Model& model, const StepBatch& batch, const CLQueue* queue);

// Keys used at inference time, computed once from the few-shot train set.
struct Memory {
  std::vector<PrototypeSet> sets;  // one per branch
  std::vector<Vec> pa_prototypes;  // pa crf only
};

Memory build_memory(const Model& model, const Dataset& train);

std::vector<Mention> predict(const Model& model, const Memory& memory, const Sentence& sentence);
std::vector<Sentence> predict(const Model& model, const Memory& memory, const Dataset& data);

// Runs of equal non-N.A. token types become mentions.
std::vector<Mention> merge_token_types(const std::vector<std::size_t>& types, const Schema& schema);

}  // namespace protoed
