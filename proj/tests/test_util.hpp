#pragma once

// Shared helpers for the unit and acceptance suites.

#include <hyptree/geometry.hpp>
#include <hyptree/rng.hpp>

#include <cmath>
#include <vector>

namespace testutil {

using hyptree::BallPoint;
using hyptree::Rng;
using hyptree::Vec;

inline Vec random_vec(Rng& rng, std::size_t dim, double lo = -1.0, double hi = 1.0) {
  Vec v(dim);
  for (double& x : v) x = hyptree::next_double(rng, lo, hi);
  return v;
}

/// Random point with norm at most max_radius, uniform direction.
inline BallPoint random_ball_point(Rng& rng, std::size_t dim, double max_radius = 0.99) {
  Vec v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = hyptree::next_double(rng, -1.0, 1.0);
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  const double target = hyptree::next_double(rng) * max_radius;
  if (n > 0.0) {
    for (double& x : v) x *= target / n;
  }
  return BallPoint{std::move(v)};
}

/// Closed-form geodesic distance from the origin: 2 artanh(|v|).
inline double origin_distance_oracle(const BallPoint& p) {
  return 2.0 * std::atanh(hyptree::norm(p.coords));
}

}  // namespace testutil
