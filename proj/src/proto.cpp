#include "protoed/proto.hpp"

#include <cmath>
#include <limits>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

std::string to_code(TransferKind kind) {
  switch (kind) {
    case TransferKind::Identity: return "I";
    case TransferKind::Normalize: return "N";
    case TransferKind::DownProject: return "D";
    case TransferKind::DownProjectNormalize: return "DN";
    case TransferKind::Reparameterize: return "R";
  }
  return "?";
}

TransferKind transfer_from_code(const std::string& code) {
  if (code == "I") return TransferKind::Identity;
  if (code == "N") return TransferKind::Normalize;
  if (code == "D") return TransferKind::DownProject;
  if (code == "DN") return TransferKind::DownProjectNormalize;
  if (code == "R") return TransferKind::Reparameterize;
  throw ConfigError("unknown transfer '" + code + "' (expected I, N, D, DN or R)");
}

TransferHeads TransferHeads::init(const TransferSpec& spec, std::size_t in_dim, std::uint64_t seed) {
  TransferHeads h;
  h.spec = spec;
  h.in_dim = in_dim;
  const bool learned = spec.kind == TransferKind::DownProject || spec.kind == TransferKind::DownProjectNormalize ||
                       spec.kind == TransferKind::Reparameterize;
  h.out_dim = learned ? (spec.out_dim == 0 ? std::max<std::size_t>(1, in_dim / 2) : spec.out_dim) : in_dim;
  if (learned && h.out_dim > in_dim) throw ConfigError("transfer: projection width must be <= encoder dim");
  Rng rng(derive_seed(seed, "transfer"));
  const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
  auto fill = [&](Tensor& t) {
    for (double& v : t.value) v = s * standard_normal(rng);
  };
  if (spec.kind == TransferKind::DownProject || spec.kind == TransferKind::DownProjectNormalize) {
    h.projection = Tensor("transfer.projection", {h.out_dim, in_dim});
    fill(h.projection);
  } else if (spec.kind == TransferKind::Reparameterize) {
    h.mean_w = Tensor("transfer.mean_w", {h.out_dim, in_dim});
    h.mean_b = Tensor("transfer.mean_b", {h.out_dim});
    h.var_w = Tensor("transfer.var_w", {h.out_dim, in_dim});
    h.var_b = Tensor("transfer.var_b", {h.out_dim});
    fill(h.mean_w);
    fill(h.var_w);
  }
  return h;
}

std::vector<Tensor*> TransferHeads::tensors() {
  switch (spec.kind) {
    case TransferKind::DownProject:
    case TransferKind::DownProjectNormalize: return {&projection};
    case TransferKind::Reparameterize: return {&mean_w, &mean_b, &var_w, &var_b};
    default: return {};
  }
}

std::vector<const Tensor*> TransferHeads::tensors() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<TransferHeads*>(this)->tensors()) out.push_back(t);
  return out;
}

std::size_t TransferHeads::output_size() const {
  return spec.kind == TransferKind::Reparameterize ? 2 * out_dim : out_dim;
}

GaussianRepr unpack_gaussian(std::span<const double> packed) {
  if (packed.size() % 2 != 0) throw ShapeError("unpack_gaussian: odd packed size");
  const std::size_t n = packed.size() / 2;
  return {Vec(packed.begin(), packed.begin() + n), Vec(packed.begin() + n, packed.end())};
}

Vec pack_gaussian(const GaussianRepr& g) {
  if (g.mean.size() != g.var.size()) throw ShapeError("pack_gaussian: mean/variance size mismatch");
  Vec out = g.mean;
  out.insert(out.end(), g.var.begin(), g.var.end());
  return out;
}

Var transfer(Tape& tape, Var h, const TransferHeads& heads) {
  if (tape.value(h).size() != heads.in_dim) throw ShapeError("transfer: input width mismatch");
  switch (heads.spec.kind) {
    case TransferKind::Identity: return h;
    case TransferKind::Normalize: return tape.normalize(h);
    case TransferKind::DownProject: return tape.matvec(heads.projection, h);
    case TransferKind::DownProjectNormalize: return tape.matvec(heads.projection, tape.normalize(h));
    case TransferKind::Reparameterize: {
      Var mean = tape.affine(heads.mean_w, heads.mean_b, h);
      Var var = tape.softplus(tape.affine(heads.var_w, heads.var_b, h), kVarianceFloor);
      return tape.concat(mean, var);
    }
  }
  return h;
}

Vec transfer(std::span<const double> h, const TransferHeads& heads) {
  Tape tape(false);
  Var v = tape.constant(Vec(h.begin(), h.end()));
  return tape.value(transfer(tape, v, heads));
}

namespace {

Vec mean_of(const std::vector<Vec>& xs) {
  Vec out(xs.front().size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  for (double& v : out) v /= static_cast<double>(xs.size());
  return out;
}

}  // namespace

PrototypeSet build_prototypes(const std::map<std::string, std::vector<Vec>>& support, const Schema& schema,
                              ProtoSource source, Aggregation aggregation, const EncoderParams& encoder,
                              const TransferHeads& heads, std::span<const double> null_prototype) {
  if (aggregation == Aggregation::Loss) {
    throw ConfigError("build_prototypes: loss-level aggregation builds one prototype set per branch");
  }
  PrototypeSet set;
  set.aggregation = aggregation;
  set.provenance = source;
  set.slots.resize(schema.size() + 1);
  const bool use_mentions = source != ProtoSource::Label;
  const bool use_label = source != ProtoSource::Mentions;
  for (std::size_t t = 0; t < schema.size(); ++t) {
    const std::string& type = schema.types()[t];
    std::vector<Vec> mentions;
    if (use_mentions) {
      auto it = support.find(type);
      if (it == support.end() || it->second.empty()) {
        throw ValidationError("build_prototypes: empty support for type '" + type + "'");
      }
      for (const auto& h : it->second) mentions.push_back(transfer(h, heads));
    }
    std::vector<Vec>& slot = set.slots[t];
    Vec label;
    if (use_label) label = transfer(label_embed(schema.label_text(type), encoder), heads);
    if (aggregation == Aggregation::Feature) {
      if (use_mentions && use_label) {
        slot.push_back(mean_of({mean_of(mentions), label}));
      } else {
        slot.push_back(use_label ? label : mean_of(mentions));
      }
    } else {
      slot = std::move(mentions);
      if (use_label) slot.push_back(std::move(label));
    }
  }
  set.slots.back().push_back(transfer(null_prototype, heads));
  return set;
}

namespace {

void check_query(std::span<const double> q, const PrototypeSet& set) {
  if (set.slots.empty()) throw ValidationError("prototype set is empty");
  for (std::size_t k = 0; k < set.slots.size(); ++k) {
    if (set.slots[k].empty()) {
      throw ValidationError("prototype slot " + std::to_string(k) + " has no prototypes");
    }
    if (set.slots[k][0].size() != q.size()) throw ShapeError("query and prototype dimensions differ");
  }
}

}  // namespace

Vec logits_feature(std::span<const double> q, const PrototypeSet& set, const DistanceSpec& d) {
  check_query(q, set);
  Vec out(set.slots.size());
  for (std::size_t k = 0; k < set.slots.size(); ++k) {
    if (set.slots[k].size() != 1) throw ValidationError("logits_feature: slot without a single prototype");
    out[k] = -distance(q, set.slots[k][0], d);
  }
  return out;
}

Vec logits_score(std::span<const double> q, const PrototypeSet& set, const DistanceSpec& d) {
  check_query(q, set);
  Vec out(set.slots.size());
  for (std::size_t k = 0; k < set.slots.size(); ++k) {
    double s = 0.0;
    for (const auto& c : set.slots[k]) s += -distance(q, c, d);
    out[k] = s / static_cast<double>(set.slots[k].size());
  }
  return out;
}

std::size_t predict_nn(std::span<const double> q, const PrototypeSet& set, const DistanceSpec& d) {
  check_query(q, set);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < set.slots.size(); ++k) {
    for (const auto& c : set.slots[k]) {
      const double dist = distance(q, c, d);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
  }
  return best;
}

}  // namespace protoed
