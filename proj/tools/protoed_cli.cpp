// Command-line front end: corpus generation, sampling, training, grids.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protoed/checkpoint.hpp"
#include "protoed/corpus.hpp"
#include "protoed/error.hpp"
#include "protoed/evaluation.hpp"
#include "protoed/experiment.hpp"
#include "protoed/pipeline.hpp"
#include "protoed/sampler.hpp"
#include "protoed/synthetic.hpp"

namespace {

using namespace protoed;

// Keys that belong to experiments rather than to a single training run.
const std::vector<std::string> kExperimentKeys = {"k_train", "k_dev",   "seeds",          "methods",
                                                  "sources", "targets", "source_lr",      "n_source_types",
                                                  "source_types"};

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string schema_path;
  std::optional<Schema> schema;
  KeyValues kv;
};

std::string kv_or(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

Paradigm paradigm_of(const KeyValues& kv) {
  return kv_or(kv, "paradigm", "sequence") == "span" ? Paradigm::SpanClassification : Paradigm::SequenceLabeling;
}

Dataset load(const std::string& path, const Globals& g, const std::optional<Schema>& schema = std::nullopt) {
  return parse_corpus(path, schema ? schema : g.schema, paradigm_of(g.kv));
}

TrainConfig config_for(const Globals& g, const std::optional<std::string>& method) {
  KeyValues kv = g.kv;
  // Explicit method keys in the config still override the preset.
  if (method) {
    kv.erase("name");
    kv["method"] = *method;
  }
  TrainConfig c = train_config_from_kv(kv, kExperimentKeys);
  c.seed = g.seed;
  return c;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(base + i);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
}

std::string fixed4(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4) << v;
  return o.str();
}

int emit_error(const std::string& kind, const std::string& message, int code) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protoed: prototype-based few-shot event detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--config", g.config_path, "Key-value config file");
  app.add_option("--schema", g.schema_path, "Schema file (types and label texts) for every corpus read");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a planted-trigger corpus");
  SyntheticSpec syn;
  std::string gen_out, gen_schema;
  gen->add_option("--out", gen_out, "Output JSONL")->required();
  gen->add_option("--schema-out", gen_schema, "Also write the schema file");
  gen->add_option("--n-types", syn.n_types);
  gen->add_option("--n-sentences", syn.n_sentences);
  gen->add_option("--vocab-size", syn.vocab_size);
  gen->add_option("--triggers-per-type", syn.triggers_per_type);
  gen->add_option("--distractor-rate", syn.distractor_rate);
  gen->add_option("--max-triggers", syn.max_triggers);
  gen->add_option("--min-len", syn.min_length);
  gen->add_option("--max-len", syn.max_length);
  gen->add_option("--lexicon-seed", syn.lexicon_seed);
  gen->add_option("--id-prefix", syn.id_prefix);

  // sample
  auto* sample = app.add_subcommand("sample", "Greedy K-shot train/dev sampling");
  std::string s_corpus, s_train, s_dev;
  int k_train = 5, k_dev = 2;
  sample->add_option("--corpus", s_corpus)->required();
  sample->add_option("--k-train", k_train);
  sample->add_option("--k-dev", k_dev);
  sample->add_option("--out-train", s_train)->required();
  sample->add_option("--out-dev", s_dev)->required();

  // split-transfer
  auto* split = app.add_subcommand("split-transfer", "Class-transfer source/target split");
  std::string t_corpus, t_source_out, t_target_out, t_source_types;
  std::size_t n_source_types = 0;
  split->add_option("--corpus", t_corpus)->required();
  auto* nst = split->add_option("--n-source-types", n_source_types, "Take the n most frequent types as source");
  auto* stl = split->add_option("--source-types", t_source_types, "Comma-separated source types");
  nst->excludes(stl);
  split->add_option("--out-source", t_source_out)->required();
  split->add_option("--out-target-pool", t_target_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Train one method on a few-shot sample");
  std::string tr_train, tr_dev, tr_test, tr_method, tr_out, tr_pred, tr_log, tr_lr;
  std::size_t tr_steps = 0;
  train->add_option("--train", tr_train)->required();
  train->add_option("--dev", tr_dev);
  train->add_option("--test", tr_test);
  train->add_option("--method", tr_method, "Method preset (overrides config)");
  train->add_option("--lr", tr_lr, "Comma-separated lr grid");
  train->add_option("--steps", tr_steps);
  train->add_option("--out", tr_out, "Checkpoint path");
  train->add_option("--pred-out", tr_pred, "Write test predictions (JSONL)");
  train->add_option("--log", tr_log, "Append a JSONL run record");

  // predict
  auto* pred = app.add_subcommand("predict", "Predict with a saved checkpoint");
  std::string p_ckpt, p_corpus, p_out;
  pred->add_option("--checkpoint", p_ckpt)->required();
  pred->add_option("--corpus", p_corpus)->required();
  pred->add_option("--out", p_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Micro-F1 of predictions against gold");
  std::string e_pred, e_gold;
  eval->add_option("--pred", e_pred)->required();
  eval->add_option("--gold", e_gold)->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Methods x seeds low-resource grid");
  std::string gr_corpus, gr_test, gr_methods, gr_log, gr_out;
  std::size_t n_seeds = 0;
  grid->add_option("--corpus", gr_corpus, "Pool the few-shot sets are drawn from")->required();
  grid->add_option("--test", gr_test, "Test corpus (default: rest of the pool)");
  grid->add_option("--methods", gr_methods, "Comma-separated presets");
  grid->add_option("--seeds", n_seeds, "Number of seeds, starting at --seed");
  grid->add_option("--k-train", k_train);
  grid->add_option("--k-dev", k_dev);
  grid->add_option("--log", gr_log);
  grid->add_option("--out", gr_out, "Write the table as JSON");

  // transfer-grid
  auto* tgrid = app.add_subcommand("transfer-grid", "Source x target class-transfer grid");
  std::string tg_corpus, tg_sources, tg_targets, tg_log, tg_out, tg_source_types;
  std::size_t tg_n_source = 0;
  double source_lr = 0.0;
  tgrid->add_option("--corpus", tg_corpus)->required();
  auto* tnst = tgrid->add_option("--n-source-types", tg_n_source);
  auto* tstl = tgrid->add_option("--source-types", tg_source_types);
  tnst->excludes(tstl);
  tgrid->add_option("--sources", tg_sources, "Comma-separated presets; 'none' skips the source stage");
  tgrid->add_option("--targets", tg_targets, "Comma-separated presets");
  tgrid->add_option("--seeds", n_seeds);
  tgrid->add_option("--k-train", k_train);
  tgrid->add_option("--k-dev", k_dev);
  tgrid->add_option("--source-lr", source_lr);
  tgrid->add_option("--log", tg_log);
  tgrid->add_option("--out", tg_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("usage", e.what(), 2);
  }

  try {
    if (!g.config_path.empty()) g.kv = parse_kv_file(g.config_path);
    if (!g.schema_path.empty()) g.schema = read_schema(g.schema_path);
    auto int_key = [&](const std::string& key, int fallback) {
      return static_cast<int>(std::stol(kv_or(g.kv, key, std::to_string(fallback))));
    };

    if (*gen) {
      syn.seed = g.seed;
      Dataset d = gen_synthetic(syn);
      write_corpus(gen_out, d);
      if (!gen_schema.empty()) write_schema(gen_schema, d.schema);
      std::cout << nlohmann::json{{"sentences", d.sentences.size()}, {"types", d.schema.size()}}.dump() << "\n";
    } else if (*sample) {
      Dataset d = load(s_corpus, g);
      auto [tr, dv] = sample_train_dev(d, SampleSpec{k_train, k_dev, g.seed});
      write_corpus(s_train, tr);
      write_corpus(s_dev, dv);
      const SampleStats a = sample_stats(tr), b = sample_stats(dv);
      std::cout << nlohmann::json{{"train_sentences", a.n_sentences}, {"train_mentions", a.n_mentions},
                                  {"train_avg_shot", a.avg_shot},     {"dev_sentences", b.n_sentences},
                                  {"dev_mentions", b.n_mentions},     {"dev_avg_shot", b.avg_shot}}
                       .dump()
                << "\n";
    } else if (*split) {
      Dataset d = load(t_corpus, g);
      std::set<std::string> source;
      if (!t_source_types.empty()) {
        for (const auto& t : split_list(t_source_types)) source.insert(t);
      } else {
        if (n_source_types == 0) throw ConfigError("give --n-source-types or --source-types");
        for (const auto& t : most_frequent_types(d, n_source_types)) source.insert(t);
      }
      TransferSplit ts = split_class_transfer(d, source);
      write_corpus(t_source_out, ts.source_data);
      write_corpus(t_target_out, ts.target_pool);
      std::cout << nlohmann::json{{"source_types", ts.source_types},
                                  {"target_types", ts.target_types},
                                  {"source_sentences", ts.source_data.sentences.size()},
                                  {"target_pool_sentences", ts.target_pool.sentences.size()}}
                       .dump()
                << "\n";
    } else if (*train) {
      TrainConfig cfg = config_for(g, tr_method.empty() ? std::nullopt : std::optional<std::string>(tr_method));
      if (!tr_lr.empty()) cfg.lr_grid = parse_double_list(tr_lr);
      if (tr_steps > 0) cfg.steps = tr_steps;
      cfg.validate();
      Dataset trn = load(tr_train, g);
      Dataset dev = tr_dev.empty() ? Dataset{trn.schema, {}, trn.paradigm} : load(tr_dev, g, trn.schema);
      Dataset tst = tr_test.empty() ? Dataset{trn.schema, {}, trn.paradigm} : load(tr_test, g, trn.schema);
      RunResult r = run_low_resource(cfg, trn, dev, tst);
      if (!tr_out.empty()) save_checkpoint(tr_out, r.model, &r.memory);
      if (!tr_pred.empty()) write_corpus(tr_pred, Dataset{trn.schema, r.predictions, trn.paradigm});
      nlohmann::json out = {{"method", cfg.method.name}, {"seed", cfg.seed}, {"lr", r.score.lr},
                            {"config_hash", config_hash(cfg)}};
      if (!tr_test.empty()) {
        out["precision"] = r.test.precision;
        out["recall"] = r.test.recall;
        out["f1"] = r.test.f1;
      }
      if (!tr_log.empty()) {
        RunLog log(tr_log);
        log.append(run_record(cfg.method.name, cfg, r.score));
      }
      std::cout << out.dump() << "\n";
    } else if (*pred) {
      Checkpoint ck = load_checkpoint(p_ckpt);
      if (!ck.memory && ck.model.method.head == HeadKind::Prototype) {
        throw IoError("checkpoint has no inference keys");
      }
      Dataset d = load(p_corpus, g, ck.model.schema);
      const Memory mem = ck.memory.value_or(Memory{});
      write_corpus(p_out, Dataset{d.schema, predict(ck.model, mem, d), d.paradigm});
    } else if (*eval) {
      Dataset gold = load(e_gold, g);
      Dataset p = load(e_pred, g);
      const Prf r = micro_f1(p.sentences, gold.sentences);
      std::cout << "precision " << fixed4(r.precision) << "\n"
                << "recall " << fixed4(r.recall) << "\n"
                << "f1 " << fixed4(r.f1) << "\n";
    } else if (*grid) {
      if (gr_methods.empty()) gr_methods = kv_or(g.kv, "methods", "");
      std::vector<GridCell> cells;
      if (gr_methods.empty()) {
        TrainConfig c = config_for(g, std::nullopt);
        cells.push_back({c.method.name, c});
      } else {
        for (const auto& m : split_list(gr_methods)) cells.push_back({m, config_for(g, m)});
      }
      if (n_seeds == 0) n_seeds = static_cast<std::size_t>(int_key("seeds", 1));
      if (!grid->count("--k-train")) k_train = int_key("k_train", k_train);
      if (!grid->count("--k-dev")) k_dev = int_key("k_dev", k_dev);
      Dataset pool = load(gr_corpus, g);
      Dataset test = gr_test.empty() ? Dataset{pool.schema, {}, pool.paradigm} : load(gr_test, g, pool.schema);
      std::optional<RunLog> log;
      if (!gr_log.empty()) log.emplace(gr_log);
      auto reports = run_grid(cells, seed_list(g.seed, n_seeds), pool, test, k_train, k_dev, log ? &*log : nullptr);
      std::cout << format_table(reports);
      if (!gr_out.empty()) write_text(gr_out, reports_to_json(reports));
    } else if (*tgrid) {
      Dataset d = load(tg_corpus, g);
      std::set<std::string> source;
      if (tg_source_types.empty()) tg_source_types = kv_or(g.kv, "source_types", "");
      if (!tg_source_types.empty()) {
        for (const auto& t : split_list(tg_source_types)) source.insert(t);
      } else {
        if (tg_n_source == 0) tg_n_source = static_cast<std::size_t>(int_key("n_source_types", 0));
        if (tg_n_source == 0) throw ConfigError("give --n-source-types or --source-types");
        for (const auto& t : most_frequent_types(d, tg_n_source)) source.insert(t);
      }
      TransferSplit ts = split_class_transfer(d, source);
      TransferGridSpec spec;
      if (tg_sources.empty()) tg_sources = kv_or(g.kv, "sources", "none,fsls-adj");
      if (tg_targets.empty()) tg_targets = kv_or(g.kv, "targets", "unified-baseline");
      for (const auto& s : split_list(tg_sources)) {
        if (s == "none") {
          spec.sources.push_back(std::nullopt);
        } else {
          spec.sources.push_back(GridCell{s, config_for(g, s)});
        }
      }
      for (const auto& t : split_list(tg_targets)) spec.targets.push_back({t, config_for(g, t)});
      if (n_seeds == 0) n_seeds = static_cast<std::size_t>(int_key("seeds", 1));
      spec.seeds = seed_list(g.seed, n_seeds);
      spec.k_train = tgrid->count("--k-train") ? k_train : int_key("k_train", k_train);
      spec.k_dev = tgrid->count("--k-dev") ? k_dev : int_key("k_dev", k_dev);
      spec.source_lr = source_lr > 0.0 ? source_lr : std::stod(kv_or(g.kv, "source_lr", "0.003"));
      std::optional<RunLog> log;
      if (!tg_log.empty()) log.emplace(tg_log);
      auto cells = run_transfer_grid(spec, ts, log ? &*log : nullptr);
      std::cout << format_transfer_table(cells);
      if (!tg_out.empty()) write_text(tg_out, transfer_to_json(cells));
    }
  } catch (const protoed::Error& e) {
    return emit_error(e.kind(), e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
  return 0;
}
