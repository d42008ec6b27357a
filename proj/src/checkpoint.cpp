#include "protoed/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "protoed/error.hpp"

namespace protoed {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'R', 'O', 'T', 'O', 'E', 'D', '1'};
constexpr std::uint64_t kMaxRank = 8;

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("checkpoint: truncated file");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw IoError("checkpoint: implausible length field");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("checkpoint: truncated file");
  return s;
}

const char* paradigm_name(Paradigm p) { return p == Paradigm::SequenceLabeling ? "sequence" : "span"; }

}  // namespace

void write_tensor_file(std::ostream& out, const std::string& meta, const std::vector<const Tensor*>& tensors) {
  out.write(kMagic, sizeof kMagic);
  put_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u64(out, tensors.size());
  for (const Tensor* t : tensors) {
    put_u64(out, t->name.size());
    out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    put_u64(out, t->shape.size());
    std::size_t n = 1;
    for (std::size_t d : t->shape) {
      put_u64(out, d);
      n *= d;
    }
    if (n != t->value.size()) throw ShapeError("checkpoint: tensor '" + t->name + "' shape does not match its data");
    out.write(reinterpret_cast<const char*>(t->value.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed");
}

TensorFile read_tensor_file(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("checkpoint: bad magic (not a protoed tensor file)");
  }
  TensorFile f;
  f.meta = get_bytes(in, get_u64(in));
  const std::uint64_t count = get_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    Tensor t;
    t.name = get_bytes(in, get_u64(in));
    const std::uint64_t rank = get_u64(in);
    if (rank > kMaxRank) throw IoError("checkpoint: tensor '" + t.name + "' has implausible rank");
    std::uint64_t n = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      t.shape.push_back(get_u64(in));
      n *= t.shape.back();
    }
    if (n > (1ULL << 30)) throw IoError("checkpoint: tensor '" + t.name + "' is implausibly large");
    t.value.resize(n);
    if (n > 0 && !in.read(reinterpret_cast<char*>(t.value.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
      throw IoError("checkpoint: truncated data for tensor '" + t.name + "'");
    }
    f.tensors.push_back(std::move(t));
  }
  return f;
}

void save_checkpoint(const std::string& path, const Model& model, const Memory* memory) {
  nlohmann::json meta;
  meta["format"] = 1;
  meta["method"] = to_kv(model.method);
  meta["schema"] = {{"types", model.schema.types()}, {"label_texts", model.schema.label_texts()}};
  const auto& ec = model.encoder.config;
  meta["encoder"] = {{"buckets", ec.buckets},
                     {"dim", ec.dim},
                     {"hidden", ec.hidden_width()},
                     {"context_radius", ec.context_radius},
                     {"window", ec.window}};
  meta["options"] = {{"paradigm", paradigm_name(model.options.paradigm)},
                     {"max_span_len", model.options.max_span_len},
                     {"negative_ratio", model.options.negative_ratio}};
  std::vector<const Tensor*> tensors = model.tensors();
  std::vector<Tensor> mem_tensors;
  if (memory) {
    nlohmann::json sets = nlohmann::json::array();
    for (std::size_t s = 0; s < memory->sets.size(); ++s) {
      const auto& set = memory->sets[s];
      sets.push_back({{"aggregation", to_string(set.aggregation)}, {"provenance", to_string(set.provenance)}});
      for (std::size_t k = 0; k < set.slots.size(); ++k) {
        const auto& slot = set.slots[k];
        const std::size_t width = slot.empty() ? 0 : slot[0].size();
        Tensor t("memory." + std::to_string(s) + "." + std::to_string(k), {slot.size(), width});
        for (std::size_t r = 0; r < slot.size(); ++r) std::copy(slot[r].begin(), slot[r].end(), t.row(r).begin());
        mem_tensors.push_back(std::move(t));
      }
    }
    meta["memory"] = sets;
  }
  for (const auto& t : mem_tensors) tensors.push_back(&t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_tensor_file(out, meta.dump(), tensors);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  TensorFile f = read_tensor_file(in);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(f.meta);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  try {
    if (meta.at("format").get<int>() != 1) throw IoError("checkpoint: unsupported format version");
    const MethodConfig method = method_from_kv(meta.at("method").get<std::map<std::string, std::string>>());
    Schema schema(meta.at("schema").at("types").get<std::vector<std::string>>(),
                  meta.at("schema").at("label_texts").get<std::map<std::string, std::string>>());
    EncoderConfig ec;
    const auto& je = meta.at("encoder");
    ec.buckets = je.at("buckets").get<std::size_t>();
    ec.dim = je.at("dim").get<std::size_t>();
    ec.hidden = je.at("hidden").get<std::size_t>();
    ec.context_radius = je.at("context_radius").get<int>();
    ec.window = je.at("window").get<std::size_t>();
    ModelOptions opt;
    const auto& jo = meta.at("options");
    opt.paradigm =
        jo.at("paradigm").get<std::string>() == "span" ? Paradigm::SpanClassification : Paradigm::SequenceLabeling;
    opt.max_span_len = jo.at("max_span_len").get<int>();
    opt.negative_ratio = jo.at("negative_ratio").get<double>();

    Checkpoint ck{Model::init(method, schema, ec, opt, 0), std::nullopt};
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : f.tensors) {
      if (!by_name.emplace(t.name, &t).second) throw IoError("checkpoint: duplicate tensor '" + t.name + "'");
    }
    std::size_t used = 0;
    for (Tensor* t : ck.model.tensors()) {
      auto it = by_name.find(t->name);
      if (it == by_name.end()) throw IoError("checkpoint: missing tensor '" + t->name + "'");
      if (it->second->shape != t->shape) throw ShapeError("checkpoint: shape mismatch for '" + t->name + "'");
      t->value = it->second->value;
      ++used;
    }
    if (meta.contains("memory")) {
      Memory mem;
      const auto& sets = meta.at("memory");
      for (std::size_t s = 0; s < sets.size(); ++s) {
        PrototypeSet set;
        set.aggregation = aggregation_from_string(sets[s].at("aggregation").get<std::string>());
        set.provenance = source_from_string(sets[s].at("provenance").get<std::string>());
        set.slots.resize(schema.size() + 1);
        for (std::size_t k = 0; k < set.slots.size(); ++k) {
          const std::string name = "memory." + std::to_string(s) + "." + std::to_string(k);
          auto it = by_name.find(name);
          if (it == by_name.end()) throw IoError("checkpoint: missing tensor '" + name + "'");
          const Tensor& t = *it->second;
          for (std::size_t r = 0; r < t.rows(); ++r) set.slots[k].emplace_back(t.row(r).begin(), t.row(r).end());
          ++used;
        }
        mem.sets.push_back(std::move(set));
      }
      if (method.crf == CrfKind::Pa && !mem.sets.empty()) {
        for (const auto& slot : mem.sets.front().slots) {
          if (slot.size() != 1) throw IoError("checkpoint: pa memory needs one prototype per slot");
          mem.pa_prototypes.push_back(slot[0]);
        }
      }
      ck.memory = std::move(mem);
    }
    if (used != f.tensors.size()) throw IoError("checkpoint: unexpected extra tensors");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
}

}  // namespace protoed
