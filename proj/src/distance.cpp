#include "protoed/distance.hpp"

#include <cmath>

#include "protoed/error.hpp"

namespace protoed {

std::string to_code(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Cosine: return "S";
    case DistanceKind::ScaledCosine: return "SS";
    case DistanceKind::Euclidean: return "EU";
    case DistanceKind::ScaledEuclidean: return "SEU";
    case DistanceKind::GaussianDivergence: return "KL";
  }
  return "?";
}

DistanceKind distance_from_code(const std::string& code) {
  if (code == "S") return DistanceKind::Cosine;
  if (code == "SS") return DistanceKind::ScaledCosine;
  if (code == "EU") return DistanceKind::Euclidean;
  if (code == "SEU") return DistanceKind::ScaledEuclidean;
  if (code == "KL") return DistanceKind::GaussianDivergence;
  throw ConfigError("unknown distance '" + code + "' (expected S, SS, EU, SEU or KL)");
}

namespace {

double euclid(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = u[i] - v[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

void check_dims(std::span<const double> u, std::span<const double> v, const DistanceSpec& d) {
  if (u.size() != v.size()) {
    throw ShapeError("distance: dimension mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  if (d.kind == DistanceKind::GaussianDivergence && u.size() % 2 != 0) {
    throw ShapeError("distance: gaussian inputs must be packed [mean; variance]");
  }
  if (d.scaled() && !(d.tau > 0.0)) throw ConfigError("distance: tau must be > 0");
}

}  // namespace

double symmetric_gaussian_kl(std::span<const double> mp, std::span<const double> vp,
                             std::span<const double> mq, std::span<const double> vq) {
  double s = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i) {
    const double diff = mp[i] - mq[i];
    s += vp[i] / vq[i] + vq[i] / vp[i] + diff * diff * (1.0 / vp[i] + 1.0 / vq[i]) - 2.0;
  }
  return 0.25 * s;
}

double distance(std::span<const double> u, std::span<const double> v, const DistanceSpec& d) {
  check_dims(u, v, d);
  switch (d.kind) {
    case DistanceKind::Cosine: return -dot(u, v);
    case DistanceKind::ScaledCosine: return -dot(u, v) / d.tau;
    case DistanceKind::Euclidean: return euclid(u, v);
    case DistanceKind::ScaledEuclidean: return euclid(u, v) / d.tau;
    case DistanceKind::GaussianDivergence: {
      const std::size_t n = u.size() / 2;
      return symmetric_gaussian_kl(u.first(n), u.subspan(n), v.first(n), v.subspan(n));
    }
  }
  return 0.0;
}

void distance_backward(std::span<const double> u, std::span<const double> v, const DistanceSpec& d,
                       double g, std::span<double> gu, std::span<double> gv) {
  switch (d.kind) {
    case DistanceKind::Cosine:
    case DistanceKind::ScaledCosine: {
      const double c = d.kind == DistanceKind::Cosine ? -g : -g / d.tau;
      for (std::size_t i = 0; i < u.size(); ++i) {
        gu[i] += c * v[i];
        gv[i] += c * u[i];
      }
      return;
    }
    case DistanceKind::Euclidean:
    case DistanceKind::ScaledEuclidean: {
      const double dist = euclid(u, v);
      if (dist == 0.0) return;
      const double c = (d.kind == DistanceKind::Euclidean ? g : g / d.tau) / dist;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double diff = c * (u[i] - v[i]);
        gu[i] += diff;
        gv[i] -= diff;
      }
      return;
    }
    case DistanceKind::GaussianDivergence: {
      const std::size_t n = u.size() / 2;
      for (std::size_t i = 0; i < n; ++i) {
        const double mp = u[i], vp = u[n + i], mq = v[i], vq = v[n + i];
        const double diff = mp - mq;
        const double inv = 1.0 / vp + 1.0 / vq;
        gu[i] += g * 0.5 * diff * inv;
        gv[i] -= g * 0.5 * diff * inv;
        gu[n + i] += g * 0.25 * (1.0 / vq - vq / (vp * vp) - diff * diff / (vp * vp));
        gv[n + i] += g * 0.25 * (1.0 / vp - vp / (vq * vq) - diff * diff / (vq * vq));
      }
      return;
    }
  }
}

}  // namespace protoed
