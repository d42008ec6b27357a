#include "protoed/pipeline.hpp"

#include <algorithm>
#include <set>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

void TrainConfig::validate() const {
  protoed::validate(method);
  if (lr_grid.empty()) throw ConfigError("lr grid is empty");
  for (double lr : lr_grid)
    if (!(lr > 0.0)) throw ConfigError("learning rates must be > 0");
  OptimizerSpec probe = optimizer;
  probe.lr = lr_grid.front();
  probe.total_steps = std::max<std::size_t>(1, steps);
  probe.validate();
  if (queue_capacity == 0) throw ConfigError("queue capacity must be >= 1");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("momentum must lie in [0, 1]");
  if (k_support < 0 || k_query < 0) throw ConfigError("episode sizes must be >= 0");
}

std::size_t resolved_steps(const TrainConfig& c) {
  if (c.steps > 0) return c.steps;
  return c.method.distance.scaled() ? 200 : 500;
}

Model train_model(const TrainConfig& config, const Dataset& train, double lr, const EncoderParams* init_encoder,
                  const StepCallback& on_step) {
  config.validate();
  if (train.sentences.empty()) throw ValidationError("train set is empty");
  MethodConfig method = config.method;
  method.cl = resolve_cl(method.cl, train.sentences.size(), config.cl_threshold);
  ModelOptions options = config.options;
  options.paradigm = train.paradigm;
  Model model = Model::init(method, train.schema, config.encoder, options, derive_seed(config.seed, "model"));
  if (init_encoder) {
    const auto a = init_encoder->tensors();
    const auto b = std::as_const(model.encoder).tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->shape != b[i]->shape) throw ShapeError("pretrained encoder does not match the encoder config");
    }
    model.encoder = *init_encoder;
  }
  TrainState state(std::move(model), config.queue_capacity, config.momentum);

  OptimizerSpec opt = config.optimizer;
  opt.lr = lr;
  opt.total_steps = resolved_steps(config);

  const bool episodic = state.model.prototype_learning();
  auto [k_s, k_q] = auto_episode_sizes(train);
  if (config.k_support > 0) k_s = config.k_support;
  if (config.k_query > 0) k_q = config.k_query;
  const auto counts = type_counts(train);
  const std::size_t min_count = counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
  const bool lenient = min_count < static_cast<std::size_t>(k_s) + 1;

  std::vector<std::size_t> order(train.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng batch_rng(derive_seed(config.seed, "batches"));
  std::size_t cursor = order.size();

  for (std::size_t step = 0; step < opt.total_steps; ++step) {
    StepBatch batch;
    batch.seed = derive_seed(config.seed, "negatives", step);
    Dataset support, query;
    if (episodic) {
      try {
        std::tie(support, query) = episode_split(train, k_s, k_q, derive_seed(config.seed, "episode", step), lenient);
      } catch (const InfeasibleError&) {
        // Too few sentences for a disjoint query: train on the whole set.
        support = train;
        query = train;
      }
      for (const auto& s : support.sentences) batch.support.push_back(&s);
      for (const auto& s : query.sentences) batch.query.push_back(&s);
    } else {
      const std::size_t b = std::min(opt.batch_size, order.size());
      for (std::size_t i = 0; i < b; ++i) {
        if (cursor == order.size()) {
          shuffle(order.begin(), order.end(), batch_rng);
          cursor = 0;
        }
        batch.query.push_back(&train.sentences[order[cursor++]]);
      }
    }
    StepResult r = train_step(state, batch, opt);
    if (on_step) on_step(step, r);
  }
  return std::move(state.model);
}

Prf evaluate(const Model& model, const Memory& memory, const Dataset& data) {
  return micro_f1(predict(model, memory, data), data.sentences);
}

RunResult run_low_resource(const TrainConfig& config, const Dataset& train, const Dataset& dev, const Dataset& test,
                           const EncoderParams* init_encoder) {
  config.validate();
  if (!(train.schema == test.schema)) throw ValidationError("train and test schemas differ");
  std::optional<RunResult> best;
  double best_dev = -1.0;
  const bool select = !dev.sentences.empty() && config.lr_grid.size() > 1;
  for (double lr : config.lr_grid) {
    Model model = train_model(config, train, lr, init_encoder);
    Memory memory = build_memory(model, train);
    double f = 0.0;
    if (select) {
      f = evaluate(model, memory, dev).f1;
    }
    if (!best || (select && f > best_dev)) {
      best_dev = f;
      best = RunResult{std::move(model), std::move(memory), {}, {}, {}, {}};
      best->score.lr = lr;
    }
    if (select) best->dev_f1.emplace_back(lr, f);
    if (!select) break;
  }
  RunResult& r = *best;
  r.predictions = predict(r.model, r.memory, test);
  r.test = micro_f1(r.predictions, test.sentences);
  r.score.seed = config.seed;
  r.score.precision = r.test.precision;
  r.score.recall = r.test.recall;
  r.score.f1 = r.test.f1;
  return std::move(r);
}

TargetData sample_target(const TransferSplit& split, const SampleSpec& sample) {
  TargetData d;
  std::tie(d.train, d.dev) = sample_train_dev(split.target_pool, sample);
  Dataset used = d.train;
  used.sentences.insert(used.sentences.end(), d.dev.sentences.begin(), d.dev.sentences.end());
  d.test = without_sentences(split.target_pool, used);
  return d;
}

void check_target_leakage(const TransferSplit& split, const TargetData& data) {
  check_no_leakage(split);
  const std::set<std::string> source(split.source_types.begin(), split.source_types.end());
  for (const Dataset* d : {&data.train, &data.dev, &data.test}) {
    for (const auto& t : d->schema.types()) {
      if (source.count(t)) throw LeakageError("source type '" + t + "' appears in the target schema");
    }
    for (const auto& s : d->sentences) {
      for (const auto& m : s.mentions) {
        if (source.count(m.label)) {
          throw LeakageError("source label '" + m.label + "' appears in target sentence '" + s.id + "'");
        }
      }
    }
  }
}

EncoderParams train_source_encoder(const TrainConfig& source, const TransferSplit& split, double lr) {
  check_no_leakage(split);
  return train_model(source, split.source_data, lr).encoder;
}

RunResult run_transfer_target(const EncoderParams* source_encoder, const TrainConfig& target,
                              const TransferSplit& split, const SampleSpec& sample) {
  TargetData data = sample_target(split, sample);
  check_target_leakage(split, data);
  return run_low_resource(target, data.train, data.dev, data.test, source_encoder);
}

RunResult run_class_transfer(const TrainConfig* source, const TrainConfig& target, const TransferSplit& split,
                             const SampleSpec& sample, double source_lr) {
  check_no_leakage(split);
  if (!source) return run_transfer_target(nullptr, target, split, sample);
  const EncoderParams enc = train_source_encoder(*source, split, source_lr);
  return run_transfer_target(&enc, target, split, sample);
}

}  // namespace protoed
