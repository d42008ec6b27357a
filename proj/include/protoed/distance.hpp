#pragma once

#include <span>
#include <string>

#include "protoed/matrix.hpp"

namespace protoed {

// Distance functions over transferred representations. Logits are always the
// negated distance, so "cosine" here is -u.v (a dissimilarity).
enum class DistanceKind { Cosine, ScaledCosine, Euclidean, ScaledEuclidean, GaussianDivergence };

struct DistanceSpec {
  DistanceKind kind = DistanceKind::Euclidean;
  double tau = 1.0;

  bool scaled() const {
    return kind == DistanceKind::ScaledCosine || kind == DistanceKind::ScaledEuclidean;
  }
  bool operator==(const DistanceSpec&) const = default;
};

// Short codes: S, SS, EU, SEU, KL.
std::string to_code(DistanceKind kind);
DistanceKind distance_from_code(const std::string& code);

// Gaussian inputs are packed as [mean (n); variance (n)].
double distance(std::span<const double> u, std::span<const double> v, const DistanceSpec& d);

// Accumulates upstream * d(distance)/du into gu and likewise for v. Euclidean
// distance at u == v uses the zero subgradient.
void distance_backward(std::span<const double> u, std::span<const double> v, const DistanceSpec& d,
                       double upstream, std::span<double> gu, std::span<double> gv);

// 0.5 * (KL(p||q) + KL(q||p)) for diagonal Gaussians.
double symmetric_gaussian_kl(std::span<const double> mean_p, std::span<const double> var_p,
                             std::span<const double> mean_q, std::span<const double> var_q);

}  // namespace protoed
