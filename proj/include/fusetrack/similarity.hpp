#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/core.hpp"

namespace fusetrack::similarity {

inline constexpr double kDefaultKappa2 = 5.991;  // chi-square, 2 dof, 95%
inline constexpr int kDefaultRealizations = 25;
inline constexpr double kVarianceFloor = 1e-6;

/// Discrete Frechet distance between two point sequences (one point per row).
/// Standard O(nm) coupling DP with a single rolling row; squared distances
/// are compared and the root taken once at the end.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar discrete_frechet(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Index n = a.rows(), m = b.rows();
  if (n == 0 || m == 0) throw Error(ErrorCode::Empty, "discrete_frechet needs non-empty inputs");
  thread_local std::vector<Scalar> row;
  row.assign(static_cast<std::size_t>(m), Scalar(0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar diag = Scalar(0);  // row[j-1] of the previous row
    for (Eigen::Index j = 0; j < m; ++j) {
      const Scalar d = (a.row(i) - b.row(j)).squaredNorm();
      const std::size_t js = static_cast<std::size_t>(j);
      const Scalar up = row[js];
      Scalar best;
      if (i == 0 && j == 0) {
        best = d;
      } else if (i == 0) {
        best = std::max(d, row[js - 1]);
      } else if (j == 0) {
        best = std::max(d, up);
      } else {
        best = std::max(d, std::min({up, diag, row[js - 1]}));
      }
      diag = up;
      row[js] = best;
    }
  }
  return std::sqrt(row.back());
}

double discrete_frechet(const Trajectory& a, const Trajectory& b);

/// Dynamic time warping with squared Euclidean local cost; returns D(n, m).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dtw_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Index n = a.rows(), m = b.rows();
  if (n == 0 || m == 0) throw Error(ErrorCode::Empty, "dtw_distance needs non-empty inputs");
  thread_local std::vector<Scalar> row;
  row.assign(static_cast<std::size_t>(m), Scalar(0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar diag = Scalar(0);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Scalar d = (a.row(i) - b.row(j)).squaredNorm();
      const std::size_t js = static_cast<std::size_t>(j);
      const Scalar up = row[js];
      Scalar prev;
      if (i == 0 && j == 0) {
        prev = Scalar(0);
      } else if (i == 0) {
        prev = row[js - 1];
      } else if (j == 0) {
        prev = up;
      } else {
        prev = std::min({up, row[js - 1], diag});
      }
      diag = up;
      row[js] = d + prev;
    }
  }
  return row.back();
}

double dtw_distance(const Trajectory& a, const Trajectory& b);

/// L2 norm over synchronized samples, sqrt(sum_i |a_i - b_i|^2).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::LengthMismatch, "euclidean_distance needs equal lengths");
  return (a - b).norm();
}

double euclidean_distance(const Trajectory& a, const Trajectory& b);

/// Mean path with a per-point 2x2 covariance and a confidence threshold.
struct UncertainTrajectory {
  Trajectory mean;
  std::vector<Eigen::Matrix2d> covariances;
  double kappa2 = kDefaultKappa2;
};

struct SamplingOptions {
  int realizations = kDefaultRealizations;
  std::uint64_t seed = 0;
  /// Adds variance_floor * I to each covariance before factorization.
  bool use_variance_floor = true;
  double variance_floor = kVarianceFloor;
};

struct FrechetBounds {
  double d_min = 0.0;
  double d_max = 0.0;
  int k_realizations = 0;
};

/// Realization 0 is the mean path; realization k >= 1 draws each point from
/// N(p_i, Sigma_i) truncated to the kappa^2 ellipse, using a seed derived from
/// (seed, k) so results do not depend on evaluation order.
std::vector<Trajectory> sample_realizations(const UncertainTrajectory& u, const SamplingOptions& opts);

/// Same draws as sample_realizations, as point matrices.
std::vector<PointMatrix> sample_realization_points(const UncertainTrajectory& u, const SamplingOptions& opts);

/// d_min / d_max of the Frechet distance from the fixed camera path to each
/// realization of the uncertain RFID path.
FrechetBounds uncertain_frechet(const Trajectory& cam, const UncertainTrajectory& rfid, const SamplingOptions& opts);

}  // namespace fusetrack::similarity
