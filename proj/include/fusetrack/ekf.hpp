#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "fusetrack/core.hpp"

namespace fusetrack::ekf {

template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar>
using Matrix24 = Eigen::Matrix<Scalar, 2, 4>;

/// Planar constant-velocity state (x, y, vx, vy) with covariance.
template <typename Scalar>
struct TagState {
  Vector4<Scalar> mean = Vector4<Scalar>::Zero();
  Matrix4<Scalar> cov = Matrix4<Scalar>::Identity();
  Scalar t = Scalar(0);

  Eigen::Matrix<Scalar, 2, 1> position() const { return mean.template head<2>(); }
  Eigen::Matrix<Scalar, 2, 2> position_cov() const { return cov.template topLeftCorner<2, 2>(); }
};

/// Range/bearing observation with its per-measurement variances.
template <typename Scalar>
struct PolarMeasurement {
  Scalar r = Scalar(0);
  Scalar theta = Scalar(0);
  Scalar var_r = Scalar(1);
  Scalar var_theta = Scalar(1);
  Scalar t = Scalar(0);
};

using TagStated = TagState<double>;
using Measurement = PolarMeasurement<double>;

inline constexpr double kOriginGuard = 1e-9;
inline constexpr double kMaxInnovationCondition = 1e12;
inline constexpr double kPsdTolerance = 1e-9;
inline constexpr double kDefaultQScale = 0.1;

template <typename Scalar>
Matrix4<Scalar> cv_transition(Scalar dt) {
  if (!(dt >= Scalar(0))) throw Error(ErrorCode::ContractViolation, "cv_transition needs dt >= 0");
  Matrix4<Scalar> phi = Matrix4<Scalar>::Identity();
  phi(0, 2) = dt;
  phi(1, 3) = dt;
  return phi;
}

/// Discretized white-noise-acceleration process noise with intensity q (m^2/s^3).
template <typename Scalar>
Matrix4<Scalar> white_noise_acceleration(Scalar dt, Scalar q) {
  const Scalar dt2 = dt * dt;
  const Scalar dt3 = dt2 * dt;
  Matrix4<Scalar> Q = Matrix4<Scalar>::Zero();
  for (int axis = 0; axis < 2; ++axis) {
    Q(axis, axis) = q * dt3 / Scalar(3);
    Q(axis, axis + 2) = Q(axis + 2, axis) = q * dt2 / Scalar(2);
    Q(axis + 2, axis + 2) = q * dt;
  }
  return Q;
}

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

/// Throws NumericalFailure when the covariance has an eigenvalue below -kPsdTolerance.
template <typename Scalar>
void check_psd(const Matrix4<Scalar>& m, const char* where) {
  Eigen::SelfAdjointEigenSolver<Matrix4<Scalar>> es(m, Eigen::EigenvaluesOnly);
  const Scalar scale = std::max(Scalar(1), es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -Scalar(kPsdTolerance) * scale) {
    throw Error(ErrorCode::NumericalFailure, std::string("state covariance lost positive semidefiniteness in ") + where);
  }
}

template <typename Scalar>
TagState<Scalar> predict(const TagState<Scalar>& s, Scalar dt, const Matrix4<Scalar>& Q) {
  const Matrix4<Scalar> phi = cv_transition(dt);
  TagState<Scalar> out;
  out.mean = phi * s.mean;
  out.cov = phi * s.cov * phi.transpose() + Q;
  symmetrize(out.cov);
  out.t = s.t + dt;
  return out;
}

template <typename Scalar>
TagState<Scalar> predict(const TagState<Scalar>& s, Scalar dt, Scalar q_scale) {
  return predict(s, dt, white_noise_acceleration(dt, q_scale));
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> observe(const TagState<Scalar>& s) {
  const Scalar x = s.mean(0), y = s.mean(1);
  const Scalar rho = std::hypot(x, y);
  if (rho < Scalar(kOriginGuard)) throw Error(ErrorCode::OriginSingularity, "state is at the sensor origin");
  return {rho, std::atan2(y, x)};
}

template <typename Scalar>
Matrix24<Scalar> jacobian(const TagState<Scalar>& s) {
  const Scalar x = s.mean(0), y = s.mean(1);
  const Scalar rho = std::hypot(x, y);
  if (rho < Scalar(kOriginGuard)) throw Error(ErrorCode::OriginSingularity, "jacobian undefined at the sensor origin");
  const Scalar rho2 = rho * rho;
  Matrix24<Scalar> H = Matrix24<Scalar>::Zero();
  H(0, 0) = x / rho;
  H(0, 1) = y / rho;
  H(1, 0) = -y / rho2;
  H(1, 1) = x / rho2;
  return H;
}

/// Polar-to-Cartesian covariance propagation for a single measurement.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> cartesian_covariance(const PolarMeasurement<Scalar>& z) {
  Eigen::Matrix<Scalar, 2, 2> J;
  const Scalar c = std::cos(z.theta), s = std::sin(z.theta);
  J << c, -z.r * s, s, z.r * c;
  return J * Eigen::Matrix<Scalar, 2, 1>(z.var_r, z.var_theta).asDiagonal() * J.transpose();
}

/// EKF measurement update with the simple (I - K H) M covariance form.
template <typename Scalar>
TagState<Scalar> update(const TagState<Scalar>& s, const PolarMeasurement<Scalar>& z) {
  if (!(z.var_r > Scalar(0)) || !(z.var_theta > Scalar(0)) || z.r < Scalar(0)) {
    throw Error(ErrorCode::ContractViolation, "measurement needs r >= 0 and positive variances");
  }
  const Matrix24<Scalar> H = jacobian(s);
  const Eigen::Matrix<Scalar, 2, 1> z_pred = observe(s);
  const Eigen::Matrix<Scalar, 2, 2> V = Eigen::Matrix<Scalar, 2, 1>(z.var_r, z.var_theta).asDiagonal();
  Eigen::Matrix<Scalar, 2, 2> S = H * s.cov * H.transpose() + V;
  symmetrize(S);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 2, 2>> es(S, Eigen::EigenvaluesOnly);
  const Scalar lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  if (!(lo > Scalar(0)) || hi / lo > Scalar(kMaxInnovationCondition)) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is not invertible");
  }

  const Eigen::Matrix<Scalar, 4, 2> K = s.cov * H.transpose() * S.inverse();
  Eigen::Matrix<Scalar, 2, 1> innovation(z.r - z_pred(0), wrap_angle(z.theta - z_pred(1)));

  TagState<Scalar> out;
  out.t = z.t;
  out.mean = s.mean + K * innovation;
  out.cov = (Matrix4<Scalar>::Identity() - K * H) * s.cov;
  symmetrize(out.cov);
  check_psd(out.cov, "update");
  return out;
}

/// Initial state from the first measurement. Velocity is zero; velocity standard
/// deviations are the Cartesian position standard deviations divided by dt.
template <typename Scalar>
TagState<Scalar> init_state(const PolarMeasurement<Scalar>& z0, Scalar dt) {
  if (!(dt > Scalar(0))) throw Error(ErrorCode::ContractViolation, "init_state needs dt > 0");
  TagState<Scalar> s;
  s.t = z0.t;
  s.mean << z0.r * std::cos(z0.theta), z0.r * std::sin(z0.theta), Scalar(0), Scalar(0);
  s.cov.setZero();
  const Eigen::Matrix<Scalar, 2, 2> P = cartesian_covariance(z0);
  s.cov.template topLeftCorner<2, 2>() = P;
  s.cov(2, 2) = P(0, 0) / (dt * dt);
  s.cov(3, 3) = P(1, 1) / (dt * dt);
  return s;
}

struct FilterOptions {
  double q_scale = kDefaultQScale;
  /// Sampling interval used to seed the velocity variances.
  double nominal_dt = 0.1;
};

/// One filtered sample: the posterior after incorporating a measurement.
struct FilteredPoint {
  double t = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Matrix2d position_cov = Eigen::Matrix2d::Zero();
};

/// Incremental single-tag filter. Measurements must arrive in strictly
/// increasing time; out-of-order input is rejected.
class TagFilter {
 public:
  explicit TagFilter(FilterOptions options = {}) : options_(options) {}

  const FilteredPoint& push(const Measurement& z) {
    if (!history_.empty() && !(z.t > state_.t)) {
      throw Error(ErrorCode::OutOfOrder, "measurement at t=" + std::to_string(z.t) + " is not after t=" +
                                             std::to_string(state_.t));
    }
    if (history_.empty()) {
      state_ = init_state(z, options_.nominal_dt);
    } else {
      state_ = update(predict(state_, z.t - state_.t, options_.q_scale), z);
    }
    history_.push_back({state_.t, state_.position(), state_.position_cov()});
    return history_.back();
  }

  const TagStated& state() const noexcept { return state_; }
  const std::vector<FilteredPoint>& history() const noexcept { return history_; }
  bool empty() const noexcept { return history_.empty(); }

 private:
  FilterOptions options_;
  TagStated state_;
  std::vector<FilteredPoint> history_;
};

/// Runs the filter over a time-ordered measurement sequence. Errors are
/// rethrown with the offending measurement index.
inline std::vector<FilteredPoint> filter_track(const std::vector<Measurement>& zs, FilterOptions options = {}) {
  if (zs.size() >= 2 && zs[1].t > zs[0].t) options.nominal_dt = zs[1].t - zs[0].t;
  TagFilter filter(options);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    try {
      filter.push(zs[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "measurement " + std::to_string(i) + ": " + e.what());
    }
  }
  return filter.history();
}

/// Cartesian position track of the filtered measurements (velocities dropped).
inline Trajectory filter_trajectory(const std::vector<Measurement>& zs, double q_scale = kDefaultQScale,
                                    const std::string& id = {}) {
  Trajectory out{id, {}, Source::RFID};
  for (const auto& fp : filter_track(zs, {q_scale, 0.1})) {
    out.points.push_back(TimedPoint::cartesian(fp.t, fp.position.x(), fp.position.y()));
  }
  return out;
}

}  // namespace fusetrack::ekf
