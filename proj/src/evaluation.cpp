#include "protoed/evaluation.hpp"

#include <cmath>
#include <set>

#include "protoed/error.hpp"

namespace protoed {

MentionsById mentions_by_id(const std::vector<Sentence>& sentences) {
  MentionsById out;
  for (const auto& s : sentences) {
    if (!out.emplace(s.id, s.mentions).second) throw ValidationError("duplicate sentence id '" + s.id + "'");
  }
  return out;
}

Prf micro_f1(const MentionsById& predictions, const MentionsById& gold) {
  for (const auto& [id, _] : predictions) {
    if (!gold.count(id)) throw ValidationError("prediction for unknown sentence id '" + id + "'");
  }
  Prf r;
  for (const auto& [id, gm] : gold) {
    const std::set<Mention> g(gm.begin(), gm.end());
    std::set<Mention> p;
    if (auto it = predictions.find(id); it != predictions.end()) p.insert(it->second.begin(), it->second.end());
    r.n_gold += g.size();
    r.n_predicted += p.size();
    for (const auto& m : p) r.true_positives += g.count(m);
  }
  const double tp = static_cast<double>(r.true_positives);
  if (r.n_predicted > 0) {
    r.precision = tp / static_cast<double>(r.n_predicted);
  } else {
    r.precision = r.n_gold == 0 ? 1.0 : 0.0;
  }
  if (r.n_gold > 0) {
    r.recall = tp / static_cast<double>(r.n_gold);
  } else {
    r.recall = r.n_predicted == 0 ? 1.0 : 0.0;
  }
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

Prf micro_f1(const std::vector<Sentence>& predictions, const std::vector<Sentence>& gold) {
  return micro_f1(mentions_by_id(predictions), mentions_by_id(gold));
}

Aggregate aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("aggregate_runs: no values");
  Aggregate a;
  double s = 0.0;
  for (double v : values) s += v;
  const double n = static_cast<double>(values.size());
  a.mean = s / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / (n - 1.0));
  }
  return a;
}

Aggregate RunReport::aggregate() const {
  std::vector<double> f1s;
  for (const auto& r : runs) f1s.push_back(r.f1);
  return aggregate_runs(f1s);
}

}  // namespace protoed
