#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "protoed/evaluation.hpp"
#include "protoed/model.hpp"
#include "protoed/sampler.hpp"

namespace protoed {

struct TrainConfig {
  MethodConfig method;
  EncoderConfig encoder;
  OptimizerSpec optimizer;  // lr and total_steps are filled per run
  std::vector<double> lr_grid{1e-5, 2e-5, 5e-5, 1e-4};
  std::size_t steps = 0;  // 0: 200 for scaled distances, else 500
  std::size_t queue_capacity = 256;
  std::size_t cl_threshold = 128;  // in-batch below this many train sentences
  double momentum = 0.999;
  ModelOptions options;
  int k_support = 0;  // episode sizes; 0 picks them from the train set
  int k_query = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::size_t resolved_steps(const TrainConfig& config);

using StepCallback = std::function<void(std::size_t step, const StepResult&)>;

// Trains from scratch (or from `init_encoder`) at a single learning rate.
Model train_model(const TrainConfig& config, const Dataset& train, double lr, const EncoderParams* init_encoder = nullptr,
                  const StepCallback& on_step = {});

Prf evaluate(const Model& model, const Memory& memory, const Dataset& data);

struct RunResult {
  Model model;
  Memory memory;
  SeedScore score;
  Prf test;
  std::vector<std::pair<double, double>> dev_f1;  // (lr, dev F1) per grid point
  std::vector<Sentence> predictions;
};

// One lr per grid point, pick the best on dev (the first lr when dev is empty
// or the grid has one point), then score on test.
RunResult run_low_resource(const TrainConfig& config, const Dataset& train, const Dataset& dev, const Dataset& test,
                           const EncoderParams* init_encoder = nullptr);

struct TargetData {
  Dataset train;
  Dataset dev;
  Dataset test;  // the rest of the target pool
};

TargetData sample_target(const TransferSplit& split, const SampleSpec& sample);

// Throws LeakageError when any target-side data or schema mentions a source
// type, or the split itself is not disjoint.
void check_target_leakage(const TransferSplit& split, const TargetData& data);

// Source stage: trains the source method on all source data and returns the
// encoder it learned.
EncoderParams train_source_encoder(const TrainConfig& source, const TransferSplit& split, double lr);

// Target stage with an optional pretrained encoder; heads are always fresh.
RunResult run_class_transfer(const TrainConfig* source, const TrainConfig& target, const TransferSplit& split,
                             const SampleSpec& sample, double source_lr);
RunResult run_transfer_target(const EncoderParams* source_encoder, const TrainConfig& target,
                              const TransferSplit& split, const SampleSpec& sample);

}  // namespace protoed
