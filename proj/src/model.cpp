#include "protoed/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "protoed/error.hpp"
#include "protoed/random.hpp"

namespace protoed {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void fill_normal(Tensor& t, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (double& v : t.value) v = scale * standard_normal(rng);
}

std::size_t slot_of(const Schema& schema, const std::string& label) {
  auto idx = schema.index_of(label);
  if (!idx) throw ValidationError("mention type '" + label + "' is not in the model schema");
  return *idx;
}

// Every token (or candidate span) of a sentence with its gold slot.
std::vector<Item> all_items(const Model& model, const Sentence& s, std::size_t sentence_index) {
  const std::size_t none = model.schema.size();
  std::vector<Item> out;
  if (model.options.paradigm == Paradigm::SequenceLabeling) {
    std::vector<std::size_t> gold(s.tokens.size(), none);
    for (const auto& m : s.mentions) {
      const std::size_t t = slot_of(model.schema, m.label);
      for (int i = m.start; i < m.end; ++i) gold[i] = t;
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out.push_back({sentence_index, Span{static_cast<int>(i), static_cast<int>(i) + 1}, gold[i]});
    }
  } else {
    std::map<Span, std::size_t> gold;
    for (const auto& m : s.mentions) gold[Span{m.start, m.end}] = slot_of(model.schema, m.label);
    for (const Span& sp : enumerate_spans(s.tokens.size(), model.options.max_span_len)) {
      auto it = gold.find(sp);
      out.push_back({sentence_index, sp, it == gold.end() ? none : it->second});
    }
  }
  return out;
}

bool item_less(const Item& a, const Item& b) {
  return std::tie(a.sentence, a.span) < std::tie(b.sentence, b.span);
}

TransitionTable vanilla_table(const Model& m) {
  TransitionTable tb(m.crf_start.size());
  tb.trans.data = m.crf_trans.value;
  tb.start = m.crf_start.value;
  tb.stop = m.crf_stop.value;
  return tb;
}

CollapsedTransitions cdt_table(const Model& m) {
  CollapsedTransitions ct;
  for (std::size_t r = 0; r < kRoleCount; ++r) ct.scores[r] = m.cdt_roles.value[r];
  return ct;
}

Matrix as_matrix(const Tensor& t) {
  Matrix w(t.rows(), t.cols());
  w.data = t.value;
  return w;
}

}  // namespace

bool Model::has_label_branch() const {
  return method.head == HeadKind::Prototype &&
         (method.source == ProtoSource::Label || method.split_branches());
}

bool Model::has_mention_branch() const { return method.uses_mentions(); }

bool Model::prototype_learning() const { return has_mention_branch() && method.cl == ClMode::None; }

Model Model::init(const MethodConfig& method, const Schema& schema, const EncoderConfig& enc,
                  const ModelOptions& options, std::uint64_t seed) {
  validate(method);
  if (method.cl == ClMode::Auto) throw ConfigError("model: cl mode must be resolved before initialisation");
  if (schema.empty()) throw ValidationError("model: empty schema");
  if (method.crf != CrfKind::None && options.paradigm != Paradigm::SequenceLabeling) {
    throw ConfigError("crf modules need the sequence-labeling paradigm");
  }
  if (options.max_span_len < 1) throw ConfigError("max_span_len must be >= 1");
  if (options.negative_ratio < 0.0) throw ConfigError("negative_ratio must be >= 0");
  Model m;
  m.method = method;
  m.schema = schema;
  m.options = options;
  m.encoder = EncoderParams::init(enc, seed);
  const std::size_t dim = enc.dim;
  const std::size_t K = schema.size() + 1;
  m.transfer = TransferHeads::init(method.head == HeadKind::Prototype ? method.transfer : TransferSpec{}, dim, seed);
  if (m.has_label_branch()) {
    m.null_label = Tensor("proto.null_label", {dim});
    fill_normal(m.null_label, 0.1, derive_seed(seed, "null_label"));
  }
  if (m.prototype_learning()) {
    m.null_mention = Tensor("proto.null_mention", {dim});
    fill_normal(m.null_mention, 0.1, derive_seed(seed, "null_mention"));
  }
  if (method.head == HeadKind::Linear) {
    m.linear_w = Tensor("linear.w", {K, dim});
    m.linear_b = Tensor("linear.b", {K});
    fill_normal(m.linear_w, 1.0 / std::sqrt(static_cast<double>(dim)), derive_seed(seed, "linear"));
  }
  const std::size_t T = bio::tag_count(schema.size());
  switch (method.crf) {
    case CrfKind::Vanilla:
      m.crf_trans = Tensor("crf.trans", {T, T});
      m.crf_start = Tensor("crf.start", {T});
      m.crf_stop = Tensor("crf.stop", {T});
      break;
    case CrfKind::Cdt: m.cdt_roles = Tensor("crf.roles", {kRoleCount}); break;
    case CrfKind::Pa: {
      const std::size_t n = m.transfer.output_size();
      m.pa_w = Tensor("crf.pa_w", {n, n});
      fill_normal(m.pa_w, 0.1, derive_seed(seed, "pa_w"));
      break;
    }
    case CrfKind::None: break;
  }
  return m;
}

std::vector<Tensor*> Model::tensors() {
  std::vector<Tensor*> out = encoder.tensors();
  for (Tensor* t : transfer.tensors()) out.push_back(t);
  for (Tensor* t : {&null_label, &null_mention, &linear_w, &linear_b, &crf_trans, &crf_start, &crf_stop, &cdt_roles,
                    &pa_w}) {
    if (!t->shape.empty()) out.push_back(t);
  }
  return out;
}

std::vector<const Tensor*> Model::tensors() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<Model*>(this)->tensors()) out.push_back(t);
  return out;
}

ClMode resolve_cl(ClMode mode, std::size_t n_train_sentences, std::size_t threshold) {
  if (mode != ClMode::Auto) return mode;
  return n_train_sentences < threshold ? ClMode::InBatch : ClMode::Moco;
}

std::vector<Item> select_items(const Model& model, const std::vector<const Sentence*>& sentences, std::uint64_t seed) {
  const std::size_t none = model.schema.size();
  std::vector<Item> triggers, negatives;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const Item& it : all_items(model, *sentences[s], s)) (it.gold == none ? negatives : triggers).push_back(it);
  }
  Rng rng(seed);
  shuffle(negatives.begin(), negatives.end(), rng);
  const double cap = model.options.negative_ratio * static_cast<double>(std::max<std::size_t>(1, triggers.size()));
  const std::size_t keep = std::min(negatives.size(), static_cast<std::size_t>(std::ceil(cap)));
  std::vector<Item> out = std::move(triggers);
  out.insert(out.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.begin(), out.end(), item_less);
  return out;
}

LossResult compute_loss(Tape& tape, const Model& model, const StepBatch& batch, const CLQueue* queue) {
  const MethodConfig& M = model.method;
  const std::size_t K = model.n_slots();
  const std::size_t n_types = K - 1;
  const std::size_t none = n_types;
  const bool sequence = model.options.paradigm == Paradigm::SequenceLabeling;

  LossResult res;
  std::vector<std::vector<Var>> hq;
  for (const Sentence* s : batch.query) hq.push_back(encode(tape, s->tokens, model.encoder));
  res.items = select_items(model, batch.query, batch.seed);

  std::map<std::pair<std::size_t, Span>, Var> h_cache, z_cache;
  auto h_of = [&](std::size_t s, Span sp) {
    auto key = std::make_pair(s, sp);
    auto it = h_cache.find(key);
    if (it != h_cache.end()) return it->second;
    Var v = span_repr(tape, hq[s], sp);
    h_cache.emplace(key, v);
    return v;
  };
  auto z_of = [&](std::size_t s, Span sp) {
    auto key = std::make_pair(s, sp);
    auto it = z_cache.find(key);
    if (it != z_cache.end()) return it->second;
    Var v = transfer(tape, h_of(s, sp), model.transfer);
    z_cache.emplace(key, v);
    return v;
  };

  std::vector<Var> terms;
  auto add_term = [&](const std::string& name, const std::vector<Var>& parts) {
    if (parts.empty()) return;
    Var t = tape.scale(tape.sum(parts), 1.0 / static_cast<double>(parts.size()));
    terms.push_back(t);
    res.terms.emplace_back(name, tape.scalar(t));
  };

  // Per-branch key sets in transfer space.
  struct Branch {
    std::string name;
    std::vector<std::vector<Var>> keys;
    bool exclude_self = false;
  };
  std::vector<Branch> branches;
  std::size_t pa_branch = 0;

  if (M.head == HeadKind::Prototype) {
    std::vector<Var> label_z;
    if (M.uses_label()) {
      for (const auto& type : model.schema.types()) {
        label_z.push_back(transfer(tape, label_embed(tape, model.schema.label_text(type), model.encoder), model.transfer));
      }
    }
    if (model.has_label_branch()) {
      Branch b{"label", std::vector<std::vector<Var>>(K), false};
      for (std::size_t t = 0; t < n_types; ++t) b.keys[t] = {label_z[t]};
      b.keys[none] = {transfer(tape, tape.param(model.null_label), model.transfer)};
      branches.push_back(std::move(b));
    }
    if (model.has_mention_branch()) {
      const bool combined = M.source == ProtoSource::Both && !M.split_branches();
      Branch b{combined ? "combined" : "mention", std::vector<std::vector<Var>>(K), false};
      if (M.cl == ClMode::InBatch) {
        for (const Item& it : res.items) b.keys[it.gold].push_back(z_of(it.sentence, it.span));
        b.exclude_self = true;
      } else if (M.cl == ClMode::Moco) {
        if (!queue) throw ConfigError("moco training needs a key queue");
        for (const auto& e : queue->entries()) b.keys[e.type].push_back(tape.constant(e.rep));
      } else {
        std::vector<std::vector<Var>> zs(n_types);
        for (const Sentence* s : batch.support) {
          const auto hs = encode(tape, s->tokens, model.encoder);
          for (const auto& m : s->mentions) {
            Var h = span_repr(tape, hs, Span{m.start, m.end});
            zs[slot_of(model.schema, m.label)].push_back(transfer(tape, h, model.transfer));
          }
        }
        const bool feature = M.aggregation == Aggregation::Feature;
        for (std::size_t t = 0; t < n_types; ++t) {
          if (feature) {
            if (!zs[t].empty()) {
              Var c = zs[t].size() == 1 ? zs[t][0] : tape.mean(zs[t]);
              if (combined) {
                const Var pair[2] = {c, label_z[t]};
                c = tape.mean(pair);
              }
              b.keys[t] = {c};
            } else if (combined) {
              b.keys[t] = {label_z[t]};
            }
          } else {
            b.keys[t] = zs[t];
          }
        }
        b.keys[none] = {transfer(tape, tape.param(model.null_mention), model.transfer)};
      }
      if (combined && !(M.cl == ClMode::None && M.aggregation == Aggregation::Feature)) {
        for (std::size_t t = 0; t < n_types; ++t) b.keys[t].push_back(label_z[t]);
      }
      branches.push_back(std::move(b));
    }
    if (M.crf == CrfKind::Pa) pa_branch = model.has_label_branch() ? 0 : branches.size() - 1;
  }

  std::map<std::pair<std::size_t, int>, Var> logit_cache;
  auto branch_logits = [&](std::size_t b, Var z) {
    auto key = std::make_pair(b, z.id);
    auto it = logit_cache.find(key);
    if (it != logit_cache.end()) return it->second;
    const Branch& br = branches[b];
    Var l = tape.proto_logits(z, br.keys, M.distance, br.exclude_self ? z.id : -1);
    logit_cache.emplace(key, l);
    return l;
  };

  if (M.head == HeadKind::Linear) {
    std::vector<Var> ces;
    for (const Item& it : res.items) {
      ces.push_back(tape.cross_entropy(tape.affine(model.linear_w, model.linear_b, h_of(it.sentence, it.span)), it.gold));
    }
    add_term("linear", ces);
  } else {
    for (std::size_t b = 0; b < branches.size(); ++b) {
      std::vector<Var> ces;
      for (const Item& it : res.items) {
        Var l = branch_logits(b, z_of(it.sentence, it.span));
        if (tape.value(l)[it.gold] == kNegInf) continue;
        ces.push_back(tape.cross_entropy(l, it.gold));
      }
      add_term(branches[b].name, ces);
    }
  }

  if (M.crf != CrfKind::None && sequence && !batch.query.empty()) {
    const auto columns = bio::emission_columns(n_types);
    const std::size_t T = bio::tag_count(n_types);
    Var trans, start, stop;
    bool ok = true;
    if (M.crf == CrfKind::Vanilla) {
      trans = tape.param(model.crf_trans);
      start = tape.param(model.crf_start);
      stop = tape.param(model.crf_stop);
    } else if (M.crf == CrfKind::Cdt) {
      const auto map = collapsed_index_map(n_types);
      Var roles = tape.param(model.cdt_roles);
      trans = tape.gather(roles, std::vector<int>(map.begin(), map.begin() + T * T));
      start = tape.gather(roles, std::vector<int>(map.begin() + T * T, map.begin() + T * T + T));
      stop = tape.gather(roles, std::vector<int>(map.begin() + T * T + T, map.end()));
    } else {
      std::vector<Var> protos;
      for (const auto& slot : branches[pa_branch].keys) {
        if (slot.size() != 1) {
          ok = false;
          break;
        }
        protos.push_back(slot[0]);
      }
      if (ok) {
        Var pair_scores = tape.bilinear_matrix(protos, tape.param(model.pa_w));
        trans = tape.gather(pair_scores, pa_index_map(n_types));
        start = tape.constant(Vec(T, 0.0));
        stop = tape.constant(Vec(T, 0.0));
      }
    }
    if (ok) {
      std::vector<Var> nlls;
      for (std::size_t s = 0; s < batch.query.size(); ++s) {
        const Sentence& sent = *batch.query[s];
        std::vector<Var> em;
        for (int i = 0; i < static_cast<int>(sent.tokens.size()); ++i) {
          const Span sp{i, i + 1};
          Var e;
          if (M.head == HeadKind::Linear) {
            e = tape.affine(model.linear_w, model.linear_b, h_of(s, sp));
          } else {
            const Var z = z_of(s, sp);
            for (std::size_t b = 0; b < branches.size(); ++b) {
              Var l = tape.finite_or_zero(branch_logits(b, z));
              e = b == 0 ? l : tape.add(e, l);
            }
          }
          e = tape.gather(e, columns);
          em.push_back(M.crf == CrfKind::Cdt ? tape.detach(e) : e);
        }
        nlls.push_back(tape.crf_nll(em, trans, start, stop, bio::tags_from_mentions(sent, model.schema)));
      }
      add_term("crf", nlls);
    }
  }

  if (!terms.empty()) {
    res.total = terms.size() == 1 ? terms[0] : tape.sum(terms);
    res.empty = false;
  }
  return res;
}

TrainState::TrainState(Model m, std::size_t queue_capacity, double momentum_coefficient)
    : model(std::move(m)), queue(queue_capacity) {
  if (model.method.cl == ClMode::Moco) momentum = MomentumEncoder{model.encoder, momentum_coefficient};
}

namespace {

std::vector<Vec> collect_grads(const Tape& tape, const std::vector<const Tensor*>& params) {
  std::vector<Vec> grads;
  grads.reserve(params.size());
  for (const Tensor* p : params) {
    const Vec* g = tape.grad(*p);
    grads.push_back(g ? *g : Vec(p->size(), 0.0));
  }
  return grads;
}

}  // namespace

StepResult train_step(TrainState& st, const StepBatch& batch, const OptimizerSpec& spec) {
  StepResult r;
  Model& model = st.model;
  {
    Tape tape;
    LossResult lr = compute_loss(tape, model, batch, &st.queue);
    if (lr.empty) {
      r.skipped = true;
    } else {
      r.loss = tape.scalar(lr.total);
      if (!std::isfinite(r.loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(st.step));
      }
      tape.backward(lr.total);
      auto params = model.tensors();
      std::vector<Vec> grads = collect_grads(tape, std::as_const(model).tensors());
      r.grad_norm = clip_global_norm(grads, spec.clip);
      st.optimizer.step(params, grads, scheduled_lr(spec, st.step), spec.weight_decay);
    }
    if (st.momentum) momentum_update(model.encoder, *st.momentum);
    if (model.method.cl == ClMode::Moco) {
      // Keys come from the momentum encoder, after the update.
      std::vector<std::vector<Vec>> h;
      for (const Sentence* s : batch.query) h.push_back(encode(s->tokens, st.momentum->shadow));
      for (const Item& it : lr.items) {
        st.queue.push({transfer(span_repr(h[it.sentence], it.span), model.transfer), it.gold});
      }
    }
  }
  ++st.step;
  return r;
}

std::vector<Vec> loss_gradients(const Model& model, const StepBatch& batch, const CLQueue* queue, double* loss) {
  Tape tape;
  LossResult lr = compute_loss(tape, model, batch, queue);
  const auto params = model.tensors();
  if (lr.empty) {
    if (loss) *loss = 0.0;
    std::vector<Vec> zeros;
    for (const Tensor* p : params) zeros.emplace_back(p->size(), 0.0);
    return zeros;
  }
  if (loss) *loss = tape.scalar(lr.total);
  tape.backward(lr.total);
  return collect_grads(tape, params);
}

double loss_value(const Model& model, const StepBatch& batch, const CLQueue* queue) {
  Tape tape(false);
  LossResult lr = compute_loss(tape, model, batch, queue);
  return lr.empty ? 0.0 : tape.scalar(lr.total);
}

Memory build_memory(const Model& model, const Dataset& train) {
  Memory mem;
  const MethodConfig& M = model.method;
  if (M.head == HeadKind::Linear) return mem;
  const std::size_t n_types = model.schema.size();
  const std::size_t K = n_types + 1;

  std::vector<Vec> label_z;
  if (M.uses_label()) {
    for (const auto& type : model.schema.types()) {
      label_z.push_back(transfer(label_embed(model.schema.label_text(type), model.encoder), model.transfer));
    }
  }
  if (model.has_label_branch()) {
    PrototypeSet set;
    set.aggregation = Aggregation::Feature;
    set.provenance = ProtoSource::Label;
    set.slots.resize(K);
    for (std::size_t t = 0; t < n_types; ++t) set.slots[t] = {label_z[t]};
    set.slots[n_types] = {transfer(model.null_label.value, model.transfer)};
    mem.sets.push_back(std::move(set));
  }
  if (model.has_mention_branch()) {
    const bool combined = M.source == ProtoSource::Both && !M.split_branches();
    std::vector<std::vector<Vec>> h;
    for (const auto& s : train.sentences) h.push_back(encode(s.tokens, model.encoder));
    if (model.prototype_learning()) {
      std::map<std::string, std::vector<Vec>> support;
      for (std::size_t s = 0; s < train.sentences.size(); ++s) {
        for (const auto& m : train.sentences[s].mentions) {
          support[m.label].push_back(span_repr(h[s], Span{m.start, m.end}));
        }
      }
      const Aggregation agg = M.aggregation == Aggregation::Loss ? Aggregation::Score : M.aggregation;
      mem.sets.push_back(build_prototypes(support, model.schema, combined ? ProtoSource::Both : ProtoSource::Mentions,
                                          agg, model.encoder, model.transfer, model.null_mention.value));
    } else {
      PrototypeSet set;
      set.aggregation = Aggregation::Score;
      set.provenance = combined ? ProtoSource::Both : ProtoSource::Mentions;
      set.slots.resize(K);
      for (std::size_t s = 0; s < train.sentences.size(); ++s) {
        for (const Item& it : all_items(model, train.sentences[s], s)) {
          set.slots[it.gold].push_back(transfer(span_repr(h[s], it.span), model.transfer));
        }
      }
      if (combined) {
        for (std::size_t t = 0; t < n_types; ++t) set.slots[t].push_back(label_z[t]);
      }
      for (std::size_t k = 0; k < K; ++k) {
        if (set.slots[k].empty()) {
          throw ValidationError("train set has no items for slot " +
                                (k < n_types ? "'" + model.schema.types()[k] + "'" : std::string(kNoneLabel)));
        }
      }
      mem.sets.push_back(std::move(set));
    }
  }
  if (M.crf == CrfKind::Pa) {
    const PrototypeSet& set = mem.sets.front();
    for (const auto& slot : set.slots) {
      if (slot.size() != 1) throw ValidationError("pa crf needs one prototype per type");
      mem.pa_prototypes.push_back(slot[0]);
    }
  }
  return mem;
}

std::vector<Mention> merge_token_types(const std::vector<std::size_t>& types, const Schema& schema) {
  std::vector<Mention> out;
  const std::size_t none = schema.size();
  std::size_t i = 0;
  while (i < types.size()) {
    if (types[i] == none) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < types.size() && types[j] == types[i]) ++j;
    out.push_back({static_cast<int>(i), static_cast<int>(j), schema.types()[types[i]]});
    i = j;
  }
  return out;
}

namespace {

struct Candidate {
  double score;
  Span span;
  std::size_t type;
};

std::vector<Mention> resolve_spans(std::vector<Candidate> cands, const Schema& schema, std::size_t n_tokens) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.span < b.span;
  });
  std::vector<bool> used(n_tokens, false);
  std::vector<Mention> out;
  for (const auto& c : cands) {
    bool free = true;
    for (int i = c.span.start; i < c.span.end; ++i) free = free && !used[i];
    if (!free) continue;
    for (int i = c.span.start; i < c.span.end; ++i) used[i] = true;
    out.push_back({c.span.start, c.span.end, schema.types()[c.type]});
  }
  return sorted_mentions(std::move(out));
}

}  // namespace

std::vector<Mention> predict(const Model& model, const Memory& mem, const Sentence& sentence) {
  const MethodConfig& M = model.method;
  const std::size_t n_types = model.schema.size();
  const std::size_t K = n_types + 1;
  const std::size_t none = n_types;
  const bool sequence = model.options.paradigm == Paradigm::SequenceLabeling;
  const auto h = encode(sentence.tokens, model.encoder);
  const std::size_t N = h.size();

  std::vector<Span> spans;
  if (sequence) {
    for (std::size_t i = 0; i < N; ++i) spans.push_back({static_cast<int>(i), static_cast<int>(i) + 1});
  } else {
    spans = enumerate_spans(N, model.options.max_span_len);
  }

  // Per-item scores (type logits) when a CRF or the linear head decides.
  Matrix logits(spans.size(), K);
  if (M.head == HeadKind::Linear) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const Vec x = span_repr(h, spans[i]);
      for (std::size_t k = 0; k < K; ++k) logits(i, k) = model.linear_b.value[k] + dot(model.linear_w.row(k), x);
    }
  } else if (M.crf != CrfKind::None) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const Vec z = transfer(span_repr(h, spans[i]), model.transfer);
      for (const auto& set : mem.sets) {
        const Vec l = set.aggregation == Aggregation::Feature ? logits_feature(z, set, M.distance)
                                                               : logits_score(z, set, M.distance);
        for (std::size_t k = 0; k < K; ++k) logits(i, k) += std::isfinite(l[k]) ? l[k] : 0.0;
      }
    }
  }

  if (M.crf != CrfKind::None) {
    std::vector<int> tags;
    if (M.crf == CrfKind::Cdt) {
      tags = cdt_decode(logits, cdt_table(model), n_types);
    } else {
      const TransitionTable tb =
          M.crf == CrfKind::Vanilla ? vanilla_table(model) : pa_transitions(mem.pa_prototypes, as_matrix(model.pa_w));
      tags = crf_viterbi(bio::emissions_from_logits(logits), tb).path;
    }
    return bio::mentions_from_tags(tags, model.schema);
  }

  std::vector<std::size_t> types(spans.size(), none);
  std::vector<double> scores(spans.size(), 0.0);
  if (M.head == HeadKind::Linear) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (logits(i, k) > logits(i, best)) best = k;
      types[i] = best;
      scores[i] = logits(i, best);
    }
  } else {
    // Nearest neighbour over the union of all branch keys.
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const Vec z = transfer(span_repr(h, spans[i]), model.transfer);
      double best_d = std::numeric_limits<double>::infinity();
      std::size_t best = none;
      for (std::size_t k = 0; k < K; ++k) {
        for (const auto& set : mem.sets) {
          for (const auto& c : set.slots[k]) {
            const double d = distance(z, c, M.distance);
            if (d < best_d) {
              best_d = d;
              best = k;
            }
          }
        }
      }
      types[i] = best;
      scores[i] = -best_d;
    }
  }
  if (sequence) return merge_token_types(types, model.schema);
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < spans.size(); ++i)
    if (types[i] != none) cands.push_back({scores[i], spans[i], types[i]});
  return resolve_spans(std::move(cands), model.schema, N);
}

std::vector<Sentence> predict(const Model& model, const Memory& mem, const Dataset& data) {
  std::vector<Sentence> out;
  out.reserve(data.sentences.size());
  for (const auto& s : data.sentences) {
    Sentence p;
    p.id = s.id;
    p.tokens = s.tokens;
    p.mentions = predict(model, mem, s);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace protoed
