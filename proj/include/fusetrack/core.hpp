#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/error.hpp"

namespace fusetrack {

constexpr double kPi = 3.14159265358979323846;

enum class Frame { Polar, Cartesian };
enum class Source { Camera, RFID, Simulated };

/// A timestamped planar point. For Polar, coords = (r, theta); for
/// Cartesian, coords = (x, y). Meters, radians and seconds throughout.
struct TimedPoint {
  double t = 0.0;
  Eigen::Vector2d coords = Eigen::Vector2d::Zero();
  Frame frame = Frame::Cartesian;

  static TimedPoint polar(double t, double r, double theta) { return {t, {r, theta}, Frame::Polar}; }
  static TimedPoint cartesian(double t, double x, double y) { return {t, {x, y}, Frame::Cartesian}; }
};

struct Trajectory {
  std::string id;
  std::vector<TimedPoint> points;
  Source source = Source::Simulated;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  double t_front() const { return points.front().t; }
  double t_back() const { return points.back().t; }
};

/// Point-to-point matrix view of a trajectory (one row per point, Cartesian).
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar two_pi = Scalar(2 * kPi);
  a = std::fmod(a, two_pi);
  if (a <= -Scalar(kPi)) a += two_pi;
  if (a > Scalar(kPi)) a -= two_pi;
  return a;
}

TimedPoint polar_to_cartesian(const TimedPoint& p);

/// Origin maps to (0, 0): theta is defined as 0 when x = y = 0.
TimedPoint cartesian_to_polar(const TimedPoint& p);

/// Returns the first invariant violation, or nullopt when the trajectory is valid.
std::optional<Error> validate_trajectory(const Trajectory& traj);

/// Throws the first violation found by validate_trajectory.
void require_valid(const Trajectory& traj);

/// Copy of the trajectory with every point in the Cartesian frame.
Trajectory to_cartesian(const Trajectory& traj);

/// Cartesian positions as an n x 2 matrix; polar points are converted.
PointMatrix positions(const Trajectory& traj);

std::vector<double> timestamps(const Trajectory& traj);

std::string to_string(Source s);
Source source_from_string(const std::string& s);

/// splitmix64 finalizer; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

}  // namespace fusetrack
