#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fusetrack/core.hpp"

namespace fusetrack::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline PointMatrix random_points(std::mt19937_64& rng, Eigen::Index n, double scale = 10.0) {
  PointMatrix p(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) << uniform(rng, -scale, scale), uniform(rng, -scale, scale);
  return p;
}

inline Trajectory line_track(const std::string& id, double t0, double t1, int n, Eigen::Vector2d p0,
                             Eigen::Vector2d v) {
  Trajectory tr{id, {}, Source::Simulated};
  for (int k = 0; k < n; ++k) {
    const double t = t0 + (t1 - t0) * k / (n - 1);
    const Eigen::Vector2d p = p0 + v * (t - t0);
    tr.points.push_back(TimedPoint::cartesian(t, p.x(), p.y()));
  }
  return tr;
}

}  // namespace fusetrack::test
