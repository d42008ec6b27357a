#include "protoed/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protoed/error.hpp"

namespace protoed {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(std::span<const double> xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

void check_shapes(const Matrix& em, const TransitionTable& t) {
  if (em.rows == 0) throw ShapeError("crf: empty sequence");
  if (em.cols != t.num_tags || t.trans.rows != t.num_tags || t.trans.cols != t.num_tags ||
      t.start.size() != t.num_tags || t.stop.size() != t.num_tags) {
    throw ShapeError("crf: emission width " + std::to_string(em.cols) + " does not match " +
                     std::to_string(t.num_tags) + " tags");
  }
}

// alpha(i, t): log-sum over prefixes ending in t at i, including emission i.
Matrix forward(const Matrix& em, const TransitionTable& tb) {
  const std::size_t n = em.rows, T = tb.num_tags;
  Matrix alpha(n, T);
  for (std::size_t t = 0; t < T; ++t) alpha(0, t) = tb.start[t] + em(0, t);
  Vec buf(T);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < T; ++b) {
      for (std::size_t a = 0; a < T; ++a) buf[a] = alpha(i - 1, a) + tb.trans(a, b);
      alpha(i, b) = logsumexp(buf) + em(i, b);
    }
  }
  return alpha;
}

// beta(i, t): log-sum over suffixes after i given t at i (excluding emission i).
Matrix backward(const Matrix& em, const TransitionTable& tb) {
  const std::size_t n = em.rows, T = tb.num_tags;
  Matrix beta(n, T);
  for (std::size_t t = 0; t < T; ++t) beta(n - 1, t) = tb.stop[t];
  Vec buf(T);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t a = 0; a < T; ++a) {
      for (std::size_t b = 0; b < T; ++b) buf[b] = tb.trans(a, b) + em(i + 1, b) + beta(i + 1, b);
      beta(i, a) = logsumexp(buf);
    }
  }
  return beta;
}

}  // namespace

double crf_log_partition(const Matrix& em, const TransitionTable& tb) {
  check_shapes(em, tb);
  const Matrix alpha = forward(em, tb);
  Vec last(tb.num_tags);
  for (std::size_t t = 0; t < tb.num_tags; ++t) last[t] = alpha(em.rows - 1, t) + tb.stop[t];
  return logsumexp(last);
}

double crf_path_score(const Matrix& em, const TransitionTable& tb, const std::vector<int>& path) {
  check_shapes(em, tb);
  if (path.size() != em.rows) throw ShapeError("crf: path length does not match emissions");
  double s = tb.start[path[0]] + em(0, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i) s += tb.trans(path[i - 1], path[i]) + em(i, path[i]);
  return s + tb.stop[path.back()];
}

ViterbiResult crf_viterbi(const Matrix& em, const TransitionTable& tb) {
  check_shapes(em, tb);
  const std::size_t n = em.rows, T = tb.num_tags;
  // Suffix DP so that a forward greedy walk picks the smallest tag at each
  // position among those that still reach the optimum.
  Matrix best(n, T);
  for (std::size_t t = 0; t < T; ++t) best(n - 1, t) = em(n - 1, t) + tb.stop[t];
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t a = 0; a < T; ++a) {
      double m = kNegInf;
      for (std::size_t b = 0; b < T; ++b) m = std::max(m, tb.trans(a, b) + best(i + 1, b));
      best(i, a) = em(i, a) + m;
    }
  }
  ViterbiResult out;
  out.path.resize(n);
  double target = kNegInf;
  for (std::size_t t = 0; t < T; ++t) target = std::max(target, tb.start[t] + best(0, t));
  for (std::size_t t = 0; t < T; ++t) {
    if (tb.start[t] + best(0, t) == target) {
      out.path[0] = static_cast<int>(t);
      break;
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t a = out.path[i - 1];
    double m = kNegInf;
    for (std::size_t b = 0; b < T; ++b) m = std::max(m, tb.trans(a, b) + best(i, b));
    for (std::size_t b = 0; b < T; ++b) {
      if (tb.trans(a, b) + best(i, b) == m) {
        out.path[i] = static_cast<int>(b);
        break;
      }
    }
  }
  out.score = crf_path_score(em, tb, out.path);
  return out;
}

double crf_nll(const Matrix& em, const TransitionTable& tb, const std::vector<int>& gold, CrfGradient* grad) {
  check_shapes(em, tb);
  const std::size_t n = em.rows, T = tb.num_tags;
  const Matrix alpha = forward(em, tb);
  Vec last(T);
  for (std::size_t t = 0; t < T; ++t) last[t] = alpha(n - 1, t) + tb.stop[t];
  const double log_z = logsumexp(last);
  const double nll = log_z - crf_path_score(em, tb, gold);
  if (!grad) return nll;

  const Matrix beta = backward(em, tb);
  grad->emissions = Matrix(n, T);
  grad->trans = Matrix(T, T);
  grad->start.assign(T, 0.0);
  grad->stop.assign(T, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double lp = alpha(i, t) + beta(i, t) - log_z;
      grad->emissions(i, t) = lp == kNegInf ? 0.0 : std::exp(lp);
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    grad->start[t] = grad->emissions(0, t);
    grad->stop[t] = grad->emissions(n - 1, t);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t a = 0; a < T; ++a) {
      for (std::size_t b = 0; b < T; ++b) {
        const double lp = alpha(i, a) + tb.trans(a, b) + em(i + 1, b) + beta(i + 1, b) - log_z;
        if (lp != kNegInf) grad->trans(a, b) += std::exp(lp);
      }
    }
  }
  grad->start[gold[0]] -= 1.0;
  grad->stop[gold.back()] -= 1.0;
  for (std::size_t i = 0; i < n; ++i) grad->emissions(i, gold[i]) -= 1.0;
  for (std::size_t i = 1; i < n; ++i) grad->trans(gold[i - 1], gold[i]) -= 1.0;
  return nll;
}

namespace bio {

std::vector<std::string> tag_names(const Schema& schema) {
  std::vector<std::string> out{"O"};
  for (const auto& t : schema.types()) {
    out.push_back("B-" + t);
    out.push_back("I-" + t);
  }
  return out;
}

std::vector<int> tags_from_mentions(const Sentence& s, const Schema& schema) {
  std::vector<int> tags(s.tokens.size(), 0);
  for (const auto& m : s.mentions) {
    const auto t = schema.index_of(m.label);
    if (!t) throw ValidationError("tags_from_mentions: type '" + m.label + "' not in schema");
    tags[m.start] = begin_tag(*t);
    for (int i = m.start + 1; i < m.end; ++i) tags[i] = inside_tag(*t);
  }
  return tags;
}

std::vector<Mention> mentions_from_tags(const std::vector<int>& tags, const Schema& schema) {
  std::vector<std::string> names = tag_names(schema);
  std::vector<std::string> as_strings;
  as_strings.reserve(tags.size());
  for (int t : tags) as_strings.push_back(names.at(t));
  return decode_bio(as_strings);
}

std::vector<int> emission_columns(std::size_t n_types) {
  std::vector<int> cols(tag_count(n_types));
  cols[0] = static_cast<int>(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    cols[begin_tag(t)] = static_cast<int>(t);
    cols[inside_tag(t)] = static_cast<int>(t);
  }
  return cols;
}

Matrix emissions_from_logits(const Matrix& logits) {
  if (logits.cols == 0) throw ShapeError("emissions_from_logits: no columns");
  const std::size_t n_types = logits.cols - 1;
  const auto cols = emission_columns(n_types);
  Matrix em(logits.rows, cols.size());
  for (std::size_t i = 0; i < logits.rows; ++i)
    for (std::size_t t = 0; t < cols.size(); ++t) em(i, t) = logits(i, cols[t]);
  return em;
}

}  // namespace bio

Role role_of(int from, int to) {
  if (bio::is_outside(from)) {
    if (bio::is_outside(to)) return Role::OtoO;
    return bio::is_begin(to) ? Role::OtoB : Role::OtoI;
  }
  const bool from_begin = bio::is_begin(from);
  if (bio::is_outside(to)) return from_begin ? Role::BtoO : Role::ItoO;
  if (bio::is_begin(to)) return from_begin ? Role::BtoB : Role::ItoB;
  const bool same = (from - 1) / 2 == (to - 1) / 2;
  if (!same) return Role::ToIdiff;
  return from_begin ? Role::BtoIsame : Role::ItoIsame;
}

Role start_role_of(int to) {
  if (bio::is_outside(to)) return Role::StartToO;
  return bio::is_begin(to) ? Role::StartToB : Role::StartToI;
}

std::vector<int> collapsed_index_map(std::size_t n_types) {
  const std::size_t T = bio::tag_count(n_types);
  std::vector<int> idx(T * T + 2 * T, -1);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b)
      idx[a * T + b] = static_cast<int>(role_of(static_cast<int>(a), static_cast<int>(b)));
  for (std::size_t b = 0; b < T; ++b) idx[T * T + b] = static_cast<int>(start_role_of(static_cast<int>(b)));
  return idx;
}

TransitionTable expand_collapsed(const CollapsedTransitions& ct, std::size_t n_types) {
  const std::size_t T = bio::tag_count(n_types);
  TransitionTable tb(T);
  const auto idx = collapsed_index_map(n_types);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) tb.trans(a, b) = ct.scores[idx[a * T + b]];
  for (std::size_t b = 0; b < T; ++b) tb.start[b] = ct.scores[idx[T * T + b]];
  return tb;
}

std::vector<int> cdt_decode(const Matrix& logits, const CollapsedTransitions& ct, std::size_t n_types) {
  if (logits.cols != n_types + 1) throw ShapeError("cdt_decode: expected n_types + 1 logit columns");
  return crf_viterbi(bio::emissions_from_logits(logits), expand_collapsed(ct, n_types)).path;
}

std::vector<int> pa_index_map(std::size_t n_types) {
  const std::size_t T = bio::tag_count(n_types), K = n_types + 1;
  std::vector<int> idx(T * T);
  for (std::size_t a = 0; a < T; ++a) {
    for (std::size_t b = 0; b < T; ++b) {
      const std::size_t ya = bio::type_of(static_cast<int>(a), n_types);
      const std::size_t yb = bio::type_of(static_cast<int>(b), n_types);
      idx[a * T + b] = static_cast<int>(ya * K + yb);
    }
  }
  return idx;
}

TransitionTable pa_transitions(const std::vector<Vec>& protos, const Matrix& w) {
  if (protos.size() < 2) throw ValidationError("pa_transitions: need prototypes for every type and N.A.");
  const std::size_t K = protos.size(), n_types = K - 1, dim = protos[0].size();
  if (w.rows != dim || w.cols != dim) throw ShapeError("pa_transitions: W must be dim x dim");
  Matrix pair(K, K);
  Vec wp(dim);
  for (std::size_t b = 0; b < K; ++b) {
    if (protos[b].size() != dim) throw ShapeError("pa_transitions: prototype dimension mismatch");
    for (std::size_t r = 0; r < dim; ++r) wp[r] = dot(w.row(r), protos[b]);
    for (std::size_t a = 0; a < K; ++a) pair(a, b) = dot(protos[a], wp);
  }
  const std::size_t T = bio::tag_count(n_types);
  TransitionTable tb(T);
  const auto idx = pa_index_map(n_types);
  for (std::size_t i = 0; i < T * T; ++i) tb.trans.data[i] = pair.data[idx[i]];
  return tb;
}

}  // namespace protoed
