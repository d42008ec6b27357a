#include "protoed/method.hpp"

#include <sstream>

#include "protoed/error.hpp"

namespace protoed {

namespace {

constexpr double kDefaultTau = 0.1;

MethodConfig make(const std::string& name, ProtoSource src, Aggregation agg, DistanceKind d, TransferKind t,
                  CrfKind crf, ClMode cl) {
  MethodConfig m;
  m.name = name;
  m.source = src;
  m.aggregation = agg;
  m.distance.kind = d;
  m.distance.tau = (d == DistanceKind::ScaledCosine || d == DistanceKind::ScaledEuclidean) ? kDefaultTau : 1.0;
  m.transfer.kind = t;
  m.crf = crf;
  m.cl = cl;
  return m;
}

void adjust(MethodConfig& m, DistanceKind d) {
  m.name += "-adj";
  m.distance = {d, kDefaultTau};
  m.transfer = {TransferKind::Normalize, 0};
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fine-tuning", "protonet",  "protonet-adj",     "l-tapnet-cdt",     "l-tapnet-cdt-adj",
          "pa-crf",      "container", "container-adj",    "fsls",             "fsls-adj",
          "unified-baseline"};
}

MethodConfig method_preset(const std::string& name) {
  using A = Aggregation;
  using D = DistanceKind;
  using P = ProtoSource;
  using T = TransferKind;
  if (name == "fine-tuning") {
    MethodConfig m;
    m.name = name;
    m.head = HeadKind::Linear;
    return m;
  }
  if (name == "protonet") return make(name, P::Mentions, A::Feature, D::Euclidean, T::Identity, CrfKind::None, ClMode::None);
  if (name == "l-tapnet-cdt") {
    return make(name, P::Both, A::Feature, D::ScaledCosine, T::DownProjectNormalize, CrfKind::Cdt, ClMode::None);
  }
  if (name == "pa-crf") return make(name, P::Mentions, A::Feature, D::Cosine, T::Normalize, CrfKind::Pa, ClMode::None);
  if (name == "container") {
    return make(name, P::Mentions, A::Score, D::GaussianDivergence, T::Reparameterize, CrfKind::Cdt, ClMode::InBatch);
  }
  if (name == "fsls") return make(name, P::Label, A::Feature, D::Cosine, T::Identity, CrfKind::None, ClMode::None);
  if (name == "unified-baseline") {
    return make(name, P::Both, A::Loss, D::ScaledCosine, T::Normalize, CrfKind::None, ClMode::Auto);
  }
  if (name == "protonet-adj" || name == "l-tapnet-cdt-adj") {
    MethodConfig m = method_preset(name.substr(0, name.size() - 4));
    adjust(m, D::ScaledEuclidean);
    return m;
  }
  if (name == "container-adj" || name == "fsls-adj") {
    MethodConfig m = method_preset(name.substr(0, name.size() - 4));
    adjust(m, D::ScaledCosine);
    return m;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown method preset '" + name + "' (known: " + known + ")");
}

void validate(const MethodConfig& m) {
  if (!(m.distance.tau > 0.0)) throw ConfigError("tau must be > 0");
  if (m.head == HeadKind::Linear) {
    if (m.crf != CrfKind::None && m.crf != CrfKind::Vanilla) {
      throw ConfigError("linear head supports crf none or vanilla only");
    }
    if (m.cl != ClMode::None) throw ConfigError("linear head cannot use contrastive learning");
    return;
  }
  const bool gaussian_d = m.distance.kind == DistanceKind::GaussianDivergence;
  const bool gaussian_t = m.transfer.kind == TransferKind::Reparameterize;
  if (gaussian_d != gaussian_t) throw ConfigError("KL distance and R transfer must be used together");
  if (m.cl != ClMode::None) {
    if (!m.uses_mentions()) throw ConfigError("contrastive learning requires event mentions among the sources");
    if (m.aggregation == Aggregation::Feature) {
      throw ConfigError("contrastive learning scores against keys; use score or loss aggregation");
    }
  }
  // PA transitions read one prototype per type: a label branch or
  // feature-level mention prototypes.
  const bool single_protos = m.source == ProtoSource::Label || m.split_branches() ||
                             (m.aggregation == Aggregation::Feature && m.cl == ClMode::None);
  if (m.crf == CrfKind::Pa && !single_protos) {
    throw ConfigError("pa crf needs one prototype per type (label branch or feature aggregation)");
  }
}

std::string to_string(ProtoSource s) {
  switch (s) {
    case ProtoSource::Mentions: return "mentions";
    case ProtoSource::Label: return "label";
    case ProtoSource::Both: return "both";
  }
  return "?";
}
std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Feature: return "feature";
    case Aggregation::Score: return "score";
    case Aggregation::Loss: return "loss";
  }
  return "?";
}
std::string to_string(CrfKind c) {
  switch (c) {
    case CrfKind::None: return "none";
    case CrfKind::Vanilla: return "vanilla";
    case CrfKind::Cdt: return "cdt";
    case CrfKind::Pa: return "pa";
  }
  return "?";
}
std::string to_string(ClMode c) {
  switch (c) {
    case ClMode::None: return "none";
    case ClMode::InBatch: return "inbatch";
    case ClMode::Moco: return "moco";
    case ClMode::Auto: return "auto";
  }
  return "?";
}
std::string to_string(HeadKind h) { return h == HeadKind::Linear ? "linear" : "prototype"; }

ProtoSource source_from_string(const std::string& s) {
  if (s == "mentions") return ProtoSource::Mentions;
  if (s == "label") return ProtoSource::Label;
  if (s == "both") return ProtoSource::Both;
  throw ConfigError("unknown source '" + s + "' (mentions, label, both)");
}
Aggregation aggregation_from_string(const std::string& s) {
  if (s == "feature") return Aggregation::Feature;
  if (s == "score") return Aggregation::Score;
  if (s == "loss") return Aggregation::Loss;
  throw ConfigError("unknown aggregation '" + s + "' (feature, score, loss)");
}
CrfKind crf_from_string(const std::string& s) {
  if (s == "none") return CrfKind::None;
  if (s == "vanilla") return CrfKind::Vanilla;
  if (s == "cdt") return CrfKind::Cdt;
  if (s == "pa") return CrfKind::Pa;
  throw ConfigError("unknown crf '" + s + "' (none, vanilla, cdt, pa)");
}
ClMode cl_from_string(const std::string& s) {
  if (s == "none") return ClMode::None;
  if (s == "inbatch") return ClMode::InBatch;
  if (s == "moco") return ClMode::Moco;
  if (s == "auto") return ClMode::Auto;
  throw ConfigError("unknown cl mode '" + s + "' (none, inbatch, moco, auto)");
}
HeadKind head_from_string(const std::string& s) {
  if (s == "prototype") return HeadKind::Prototype;
  if (s == "linear") return HeadKind::Linear;
  throw ConfigError("unknown head '" + s + "' (prototype, linear)");
}

std::map<std::string, std::string> to_kv(const MethodConfig& m) {
  std::ostringstream tau;
  tau.precision(17);
  tau << m.distance.tau;
  return {{"name", m.name},
          {"head", to_string(m.head)},
          {"source", to_string(m.source)},
          {"aggregation", to_string(m.aggregation)},
          {"distance", to_code(m.distance.kind)},
          {"tau", tau.str()},
          {"transfer", to_code(m.transfer.kind)},
          {"transfer_dim", std::to_string(m.transfer.out_dim)},
          {"crf", to_string(m.crf)},
          {"cl", to_string(m.cl)}};
}

MethodConfig method_from_kv(const std::map<std::string, std::string>& kv) {
  MethodConfig m;
  if (auto it = kv.find("method"); it != kv.end()) m = method_preset(it->second);
  for (const auto& [k, v] : kv) {
    if (k == "name") m.name = v;
    else if (k == "head") m.head = head_from_string(v);
    else if (k == "source") m.source = source_from_string(v);
    else if (k == "aggregation") m.aggregation = aggregation_from_string(v);
    else if (k == "distance") m.distance.kind = distance_from_code(v);
    else if (k == "tau") m.distance.tau = parse_double(k, v);
    else if (k == "transfer") m.transfer.kind = transfer_from_code(v);
    else if (k == "transfer_dim") m.transfer.out_dim = static_cast<std::size_t>(parse_double(k, v));
    else if (k == "crf") m.crf = crf_from_string(v);
    else if (k == "cl") m.cl = cl_from_string(v);
  }
  validate(m);
  return m;
}

std::string to_text(const MethodConfig& m) {
  std::string out;
  for (const auto& [k, v] : to_kv(m)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace protoed
