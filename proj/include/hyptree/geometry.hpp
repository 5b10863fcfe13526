#pragma once

/**
 * Poincare-ball primitives.
 *
 * Latent states live in the open unit ball D^H. A pooled hidden vector is
 * root-centered, scaled by 1/sqrt(H) and pushed through the exponential map
 * at the origin; distances between latents use the geodesic metric with
 * curvature fixed to 1. All arithmetic is in 64-bit floats: the arcosh near
 * its branch point is far too ill-conditioned for 32-bit.
 */

#include "errors.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace hyptree {

/// Ambient hidden-space vector (pooled representation).
using Vec = std::vector<double>;

/// Numerical safeguards for the ball construction.
struct GeoConfig {
  double stability_delta = 1e-7;    // delta in the exponential map denominator
  double projection_margin = 1e-5;  // clamp norms to 1 - margin
};

/// Point strictly inside the unit ball. Produced by exp_map_origin /
/// project_into_ball, which maintain the norm invariant.
struct BallPoint {
  Vec coords;

  std::size_t dim() const { return coords.size(); }
};

/// Half of the default projection margin; geodesic_distance refuses points
/// whose norm reaches 1 minus this slack.
inline constexpr double kBallBoundarySlack = 1e-5 / 2.0;

inline double squared_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(const Vec& v) { return std::sqrt(squared_norm(v)); }

inline void check_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw DimensionMismatch(std::string(where) + ": dimensions " +
                            std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Masked mean over token rows: sum_t m_t * h_t / sum_t m_t.
/// Padding rows (mask false) contribute nothing.
inline Vec mean_pool(const std::vector<Vec>& hidden, const std::vector<bool>& mask) {
  if (hidden.size() != mask.size()) {
    throw DimensionMismatch("mean_pool: " + std::to_string(hidden.size()) +
                            " rows vs " + std::to_string(mask.size()) + " mask entries");
  }
  std::size_t width = 0;
  bool any = false;
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    if (!mask[t]) continue;
    if (!any) {
      width = hidden[t].size();
      any = true;
    } else {
      check_same_dim(hidden[t].size(), width, "mean_pool");
    }
  }
  if (!any) throw AllMasked("mean_pool: every row is masked out");

  Vec sum(width, 0.0);
  double count = 0.0;
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t j = 0; j < width; ++j) sum[j] += hidden[t][j];
    count += 1.0;
  }
  for (double& x : sum) x /= count;
  return sum;
}

/// Rescale y onto norm 1 - margin when it is on or outside that shell;
/// interior points pass through unchanged.
inline BallPoint project_into_ball(Vec y, const GeoConfig& cfg = {}) {
  const double limit = 1.0 - cfg.projection_margin;
  const double n = norm(y);
  if (n >= limit) {
    const double scale = limit / n;
    for (double& x : y) x *= scale;
  }
  return BallPoint{std::move(y)};
}

/// Exponential map at the origin: tanh(|v|) * v / (|v| + delta).
/// Direction-preserving; the zero vector maps to the exact origin.
inline BallPoint exp_map_origin(const Vec& v, const GeoConfig& cfg = {}) {
  const double n = norm(v);
  Vec out(v.size(), 0.0);
  if (n > 0.0) {
    const double scale = std::tanh(n) / (n + cfg.stability_delta);
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = scale * v[j];
  }
  return project_into_ball(std::move(out), cfg);
}

/// Root-centered latent: exp_0((pooled - root_pooled) / sqrt(H)).
/// When pooled equals root_pooled the result is exactly the origin.
inline BallPoint to_latent(const Vec& pooled, const Vec& root_pooled,
                           const GeoConfig& cfg = {}) {
  check_same_dim(pooled.size(), root_pooled.size(), "to_latent");
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(pooled.size()));
  Vec v(pooled.size());
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    v[j] = (pooled[j] - root_pooled[j]) * inv_sqrt_h;
  }
  return exp_map_origin(v, cfg);
}

/// Geodesic distance on the ball:
///   arcosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2))).
/// Evaluated as log1p(x + sqrt(x*(x+2))) so coincident points give exactly 0.
inline double geodesic_distance(const BallPoint& u, const BallPoint& v) {
  check_same_dim(u.dim(), v.dim(), "geodesic_distance");
  const double nu2 = squared_norm(u.coords);
  const double nv2 = squared_norm(v.coords);
  const double bound = 1.0 - kBallBoundarySlack;
  if (nu2 >= bound * bound || nv2 >= bound * bound) {
    throw OutsideBall("geodesic_distance: point norm at or beyond 1 - margin/2");
  }
  double diff2 = 0.0;
  for (std::size_t j = 0; j < u.coords.size(); ++j) {
    const double d = u.coords[j] - v.coords[j];
    diff2 += d * d;
  }
  const double x = 2.0 * diff2 / ((1.0 - nu2) * (1.0 - nv2));
  return std::log1p(x + std::sqrt(x * (x + 2.0)));
}

/// Plain ambient distance |u - v|, used by the Euclidean shaping arm.
inline double euclidean_distance(const BallPoint& u, const BallPoint& v) {
  check_same_dim(u.dim(), v.dim(), "euclidean_distance");
  double s = 0.0;
  for (std::size_t j = 0; j < u.coords.size(); ++j) {
    const double d = u.coords[j] - v.coords[j];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Origin of the ball in dimension h.
inline BallPoint ball_origin(std::size_t h) { return BallPoint{Vec(h, 0.0)}; }

}  // namespace hyptree
