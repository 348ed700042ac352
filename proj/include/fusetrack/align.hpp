#pragma once

#include <span>
#include <vector>

#include "fusetrack/core.hpp"

namespace fusetrack::align {

inline constexpr int kDefaultSamples = 100;

struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const noexcept { return end - start; }
};

/// Piecewise cubic interpolant with not-a-knot end conditions. Two knots give
/// the linear interpolant and three knots the interpolating parabola.
class CubicSpline {
 public:
  CubicSpline(std::vector<double> knots, std::vector<double> values);

  double operator()(double t) const;
  std::size_t size() const noexcept { return knots_.size(); }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> second_;  // second derivatives at the knots
};

/// Shared time span of two trajectories: [max(starts), min(ends)].
Interval overlap_interval(const Trajectory& cam, const Trajectory& rfid);

/// n uniform timestamps spanning the interval, endpoints included exactly.
std::vector<double> uniform_grid(const Interval& interval, int n);

/// Resamples onto n uniform timestamps across `interval` by per-coordinate
/// cubic-spline interpolation in the Cartesian frame.
Trajectory resample(const Trajectory& traj, const Interval& interval, int n);

/// Evaluates a set of samples (one column per scalar channel) at given times.
/// Used for quantities riding along a trajectory, such as covariance entries.
std::vector<std::vector<double>> resample_channels(std::span<const double> knots,
                                                   const std::vector<std::vector<double>>& channels,
                                                   std::span<const double> at);

struct AlignedPair {
  Trajectory cam;
  Trajectory rfid;
  int n_samples = 0;
  Interval interval;
};

AlignedPair align_pair(const Trajectory& cam, const Trajectory& rfid, int n = kDefaultSamples);

}  // namespace fusetrack::align
