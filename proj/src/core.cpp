#include "fusetrack/core.hpp"

#include <cmath>

namespace fusetrack {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::MixedFrames: return "MixedFrames";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::SingularKernel: return "SingularKernel";
    case ErrorCode::OriginSingularity: return "OriginSingularity";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::OutOfGrid: return "OutOfGrid";
    case ErrorCode::ZeroDisparity: return "ZeroDisparity";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CountMismatch: return "CountMismatch";
  }
  return "Unknown";
}

TimedPoint polar_to_cartesian(const TimedPoint& p) {
  if (p.frame != Frame::Polar) throw Error(ErrorCode::ContractViolation, "polar_to_cartesian expects a polar point");
  const double r = p.coords.x();
  const double th = p.coords.y();
  return TimedPoint::cartesian(p.t, r * std::cos(th), r * std::sin(th));
}

TimedPoint cartesian_to_polar(const TimedPoint& p) {
  if (p.frame != Frame::Cartesian) throw Error(ErrorCode::ContractViolation, "cartesian_to_polar expects a cartesian point");
  const double x = p.coords.x();
  const double y = p.coords.y();
  if (x == 0.0 && y == 0.0) return TimedPoint::polar(p.t, 0.0, 0.0);
  // atan2 returns [-pi, pi]; fold -pi onto pi to keep (-pi, pi].
  return TimedPoint::polar(p.t, std::hypot(x, y), wrap_angle(std::atan2(y, x)));
}

std::optional<Error> validate_trajectory(const Trajectory& traj) {
  if (traj.points.empty()) return Error(ErrorCode::Empty, "trajectory '" + traj.id + "' has no points");
  const Frame frame = traj.points.front().frame;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    if (!std::isfinite(p.t)) {
      return Error(ErrorCode::NonMonotoneTime, "non-finite timestamp at index " + std::to_string(i));
    }
    if (p.frame != frame) {
      return Error(ErrorCode::MixedFrames, "frame changes at index " + std::to_string(i));
    }
    if (i > 0 && !(p.t > traj.points[i - 1].t)) {
      return Error(ErrorCode::NonMonotoneTime, "timestamp not increasing at index " + std::to_string(i));
    }
  }
  return std::nullopt;
}

void require_valid(const Trajectory& traj) {
  if (auto err = validate_trajectory(traj)) throw *err;
}

Trajectory to_cartesian(const Trajectory& traj) {
  Trajectory out{traj.id, {}, traj.source};
  out.points.reserve(traj.points.size());
  for (const auto& p : traj.points) out.points.push_back(p.frame == Frame::Polar ? polar_to_cartesian(p) : p);
  return out;
}

PointMatrix positions(const Trajectory& traj) {
  PointMatrix m(static_cast<Eigen::Index>(traj.points.size()), 2);
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    m.row(static_cast<Eigen::Index>(i)) = (p.frame == Frame::Polar ? polar_to_cartesian(p) : p).coords.transpose();
  }
  return m;
}

std::vector<double> timestamps(const Trajectory& traj) {
  std::vector<double> ts;
  ts.reserve(traj.points.size());
  for (const auto& p : traj.points) ts.push_back(p.t);
  return ts;
}

std::string to_string(Source s) {
  switch (s) {
    case Source::Camera: return "camera";
    case Source::RFID: return "rfid";
    case Source::Simulated: return "simulated";
  }
  return "simulated";
}

Source source_from_string(const std::string& s) {
  if (s == "camera") return Source::Camera;
  if (s == "rfid") return Source::RFID;
  if (s == "simulated") return Source::Simulated;
  throw Error(ErrorCode::SchemaError, "unknown trajectory source '" + s + "'");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fusetrack
