#include "protoed/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

const std::set<std::string>& method_keys() {
  static const std::set<std::string> k = {"method", "name", "head", "source", "aggregation", "distance",
                                          "tau",    "transfer", "transfer_dim", "crf", "cl"};
  return k;
}

std::string fmt4(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4) << v;
  return o.str();
}

}  // namespace

KeyValues parse_kv(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("config line " + std::to_string(n) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ParseError("config line " + std::to_string(n) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_kv(in);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(to_double("list", s));
  return out;
}

TrainConfig train_config_from_kv(const KeyValues& kv, const std::vector<std::string>& extra_keys) {
  const std::set<std::string> extra(extra_keys.begin(), extra_keys.end());
  KeyValues mkv;
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (method_keys().count(k)) {
      mkv[k] = v;
    } else if (k == "lr") {
      c.lr_grid = parse_double_list(v);
    } else if (k == "weight_decay") {
      c.optimizer.weight_decay = to_double(k, v);
    } else if (k == "warmup") {
      c.optimizer.warmup = to_double(k, v);
    } else if (k == "steps") {
      c.steps = to_u64(k, v);
    } else if (k == "batch_size") {
      c.optimizer.batch_size = to_u64(k, v);
    } else if (k == "clip") {
      c.optimizer.clip = to_double(k, v);
    } else if (k == "queue") {
      c.queue_capacity = to_u64(k, v);
    } else if (k == "cl_threshold") {
      c.cl_threshold = to_u64(k, v);
    } else if (k == "momentum") {
      c.momentum = to_double(k, v);
    } else if (k == "negative_ratio") {
      c.options.negative_ratio = to_double(k, v);
    } else if (k == "max_span_len") {
      c.options.max_span_len = static_cast<int>(to_u64(k, v));
    } else if (k == "k_support") {
      c.k_support = static_cast<int>(to_u64(k, v));
    } else if (k == "k_query") {
      c.k_query = static_cast<int>(to_u64(k, v));
    } else if (k == "buckets") {
      c.encoder.buckets = to_u64(k, v);
    } else if (k == "dim") {
      c.encoder.dim = to_u64(k, v);
    } else if (k == "hidden") {
      c.encoder.hidden = to_u64(k, v);
    } else if (k == "context_radius") {
      c.encoder.context_radius = static_cast<int>(to_u64(k, v));
    } else if (k == "window") {
      c.encoder.window = to_u64(k, v);
    } else if (k == "seed") {
      c.seed = to_u64(k, v);
    } else if (k == "paradigm") {
      if (v == "sequence") c.options.paradigm = Paradigm::SequenceLabeling;
      else if (v == "span") c.options.paradigm = Paradigm::SpanClassification;
      else throw ConfigError("unknown paradigm '" + v + "' (sequence, span)");
    } else if (!extra.count(k)) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  c.method = method_from_kv(mkv);
  c.validate();
  return c;
}

KeyValues to_kv(const TrainConfig& c) {
  KeyValues kv = to_kv(c.method);
  std::string lrs;
  for (double lr : c.lr_grid) lrs += (lrs.empty() ? "" : ",") + fmt_double(lr);
  kv["lr"] = lrs;
  kv["weight_decay"] = fmt_double(c.optimizer.weight_decay);
  kv["warmup"] = fmt_double(c.optimizer.warmup);
  kv["steps"] = std::to_string(resolved_steps(c));
  kv["batch_size"] = std::to_string(c.optimizer.batch_size);
  kv["clip"] = fmt_double(c.optimizer.clip);
  kv["queue"] = std::to_string(c.queue_capacity);
  kv["cl_threshold"] = std::to_string(c.cl_threshold);
  kv["momentum"] = fmt_double(c.momentum);
  kv["negative_ratio"] = fmt_double(c.options.negative_ratio);
  kv["max_span_len"] = std::to_string(c.options.max_span_len);
  kv["k_support"] = std::to_string(c.k_support);
  kv["k_query"] = std::to_string(c.k_query);
  kv["buckets"] = std::to_string(c.encoder.buckets);
  kv["dim"] = std::to_string(c.encoder.dim);
  kv["hidden"] = std::to_string(c.encoder.hidden_width());
  kv["context_radius"] = std::to_string(c.encoder.context_radius);
  kv["window"] = std::to_string(c.encoder.window);
  kv["paradigm"] = c.options.paradigm == Paradigm::SequenceLabeling ? "sequence" : "span";
  return kv;
}

std::string config_hash(const TrainConfig& c) {
  std::string text;
  for (const auto& [k, v] : to_kv(c)) text += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

RunLog::RunLog(std::string path) : path_(std::move(path)) {
  std::ofstream probe(path_, std::ios::app);
  if (!probe) throw IoError("cannot open run log '" + path_ + "'");
}

void RunLog::append(const std::string& json_line) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app);
  out << json_line << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to run log '" + path_ + "'");
}

std::string run_record(const std::string& config_id, const TrainConfig& config, const SeedScore& score,
                       const std::string& extra) {
  nlohmann::json j;
  j["config_id"] = config_id;
  j["config_hash"] = config_hash(config);
  j["method"] = config.method.name;
  j["seed"] = score.seed;
  j["lr"] = score.lr;
  j["precision"] = score.precision;
  j["recall"] = score.recall;
  j["f1"] = score.f1;
  if (!extra.empty()) j.update(nlohmann::json::parse(extra));
  return j.dump();
}

std::vector<RunReport> run_grid(const std::vector<GridCell>& cells, const std::vector<std::uint64_t>& seeds,
                                const Dataset& pool, const Dataset& test, int k_train, int k_dev, RunLog* log) {
  if (cells.empty()) throw ConfigError("grid: no configs");
  if (seeds.empty()) throw ConfigError("grid: no seeds");
  std::vector<RunReport> reports(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) reports[c].config_id = cells[c].id;
  for (std::uint64_t seed : seeds) {
    Dataset train, dev, held_out;
    try {
      std::tie(train, dev) = sample_train_dev(pool, SampleSpec{k_train, k_dev, seed});
      if (test.sentences.empty()) {
        Dataset used = train;
        used.sentences.insert(used.sentences.end(), dev.sentences.begin(), dev.sentences.end());
        held_out = without_sentences(pool, used);
      }
    } catch (const Error& e) {
      for (auto& r : reports) r.errors.push_back(std::to_string(seed) + ": " + e.what());
      continue;
    }
    const Dataset& eval_set = test.sentences.empty() ? held_out : test;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      TrainConfig cfg = cells[c].config;
      cfg.seed = seed;
      try {
        RunResult r = run_low_resource(cfg, train, dev, eval_set);
        reports[c].runs.push_back(r.score);
        if (log) log->append(run_record(cells[c].id, cfg, r.score));
      } catch (const Error& e) {
        reports[c].errors.push_back(std::to_string(seed) + ": " + e.what());
      }
    }
  }
  return reports;
}

std::vector<TransferCellReport> run_transfer_grid(const TransferGridSpec& spec, const TransferSplit& split,
                                                  RunLog* log) {
  if (spec.sources.empty() || spec.targets.empty()) throw ConfigError("transfer grid: need sources and targets");
  if (spec.seeds.empty()) throw ConfigError("transfer grid: no seeds");
  check_no_leakage(split);
  std::vector<TransferCellReport> cells;
  for (const auto& src : spec.sources) {
    for (const auto& tgt : spec.targets) {
      TransferCellReport cell;
      cell.source_id = src ? src->id : "none";
      cell.target_id = tgt.id;
      cell.report.config_id = cell.source_id + "->" + cell.target_id;
      cells.push_back(std::move(cell));
    }
  }
  const std::size_t n_tgt = spec.targets.size();
  for (std::uint64_t seed : spec.seeds) {
    TargetData data;
    try {
      data = sample_target(split, SampleSpec{spec.k_train, spec.k_dev, seed});
      check_target_leakage(split, data);
    } catch (const LeakageError&) {
      throw;
    } catch (const Error& e) {
      for (auto& c : cells) c.report.errors.push_back(std::to_string(seed) + ": " + e.what());
      continue;
    }
    for (std::size_t s = 0; s < spec.sources.size(); ++s) {
      std::optional<EncoderParams> enc;
      if (spec.sources[s]) {
        TrainConfig scfg = spec.sources[s]->config;
        scfg.seed = seed;
        try {
          enc = train_source_encoder(scfg, split, spec.source_lr);
        } catch (const Error& e) {
          for (std::size_t t = 0; t < n_tgt; ++t) {
            cells[s * n_tgt + t].report.errors.push_back(std::to_string(seed) + ": source: " + e.what());
          }
          continue;
        }
      }
      for (std::size_t t = 0; t < n_tgt; ++t) {
        TransferCellReport& cell = cells[s * n_tgt + t];
        TrainConfig tcfg = spec.targets[t].config;
        tcfg.seed = seed;
        try {
          RunResult r = run_low_resource(tcfg, data.train, data.dev, data.test, enc ? &*enc : nullptr);
          cell.report.runs.push_back(r.score);
          if (log) {
            nlohmann::json extra = {{"source", cell.source_id}, {"target", cell.target_id}};
            log->append(run_record(cell.report.config_id, tcfg, r.score, extra.dump()));
          }
        } catch (const LeakageError&) {
          throw;
        } catch (const Error& e) {
          cell.report.errors.push_back(std::to_string(seed) + ": " + e.what());
        }
      }
    }
  }
  return cells;
}

std::string format_table(const std::vector<RunReport>& reports) {
  std::ostringstream o;
  o << std::left << std::setw(28) << "config" << std::setw(6) << "n" << std::setw(10) << "mean_f1" << std::setw(10)
    << "std_f1" << "errors\n";
  for (const auto& r : reports) {
    o << std::setw(28) << r.config_id << std::setw(6) << r.runs.size();
    if (r.runs.empty()) {
      o << std::setw(10) << "-" << std::setw(10) << "-";
    } else {
      const Aggregate a = r.aggregate();
      o << std::setw(10) << fmt4(a.mean) << std::setw(10) << (a.std ? fmt4(*a.std) : "-");
    }
    o << r.errors.size() << "\n";
  }
  return o.str();
}

std::string format_transfer_table(const std::vector<TransferCellReport>& cells) {
  std::vector<RunReport> reports;
  for (const auto& c : cells) reports.push_back(c.report);
  return format_table(reports);
}

namespace {

nlohmann::json report_json(const RunReport& r) {
  nlohmann::json j;
  j["config_id"] = r.config_id;
  j["runs"] = nlohmann::json::array();
  for (const auto& s : r.runs) {
    j["runs"].push_back(
        {{"seed", s.seed}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"lr", s.lr}});
  }
  if (!r.runs.empty()) {
    const Aggregate a = r.aggregate();
    j["mean_f1"] = a.mean;
    j["std_f1"] = a.std ? nlohmann::json(*a.std) : nlohmann::json(nullptr);
  }
  j["errors"] = r.errors;
  return j;
}

}  // namespace

std::string reports_to_json(const std::vector<RunReport>& reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(report_json(r));
  return j.dump(2);
}

std::string transfer_to_json(const std::vector<TransferCellReport>& cells) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json r = report_json(c.report);
    r["source"] = c.source_id;
    r["target"] = c.target_id;
    j.push_back(r);
  }
  return j.dump(2);
}

}  // namespace protoed
