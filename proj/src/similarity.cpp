#include "fusetrack/similarity.hpp"

#include <random>
#include <string>

#include <Eigen/Eigenvalues>

namespace fusetrack::similarity {

double discrete_frechet(const Trajectory& a, const Trajectory& b) { return discrete_frechet(positions(a), positions(b)); }

double dtw_distance(const Trajectory& a, const Trajectory& b) { return dtw_distance(positions(a), positions(b)); }

double euclidean_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "euclidean_distance: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " points");
  }
  return euclidean_distance(positions(a), positions(b));
}

namespace {

// Square-root factor L with L L^T = Sigma for a PSD 2x2 covariance.
std::vector<Eigen::Matrix2d> ellipse_factors(const UncertainTrajectory& u, const SamplingOptions& opts) {
  if (u.covariances.size() != u.mean.size()) {
    throw Error(ErrorCode::ContractViolation, "one covariance per mean point is required");
  }
  if (!(u.kappa2 > 0.0)) throw Error(ErrorCode::ContractViolation, "kappa^2 must be positive");
  std::vector<Eigen::Matrix2d> factors;
  factors.reserve(u.covariances.size());
  for (std::size_t i = 0; i < u.covariances.size(); ++i) {
    Eigen::Matrix2d sigma = 0.5 * (u.covariances[i] + u.covariances[i].transpose());
    if (opts.use_variance_floor) sigma.diagonal().array() += opts.variance_floor;
    if (!sigma.allFinite()) {
      throw Error(ErrorCode::SingularCovariance, "non-finite covariance at point " + std::to_string(i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma);
    const Eigen::Vector2d lambda = es.eigenvalues();
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (es.info() != Eigen::Success || lambda.minCoeff() < -1e-12 * scale) {
      throw Error(ErrorCode::SingularCovariance, "covariance at point " + std::to_string(i) + " is not PSD");
    }
    factors.push_back(es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  return factors;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard bivariate normal truncated to |z|^2 <= kappa2: |z|^2 is chi-square
// with 2 dof (exponential with mean 2), so its truncated law inverts in
// closed form and no draws are rejected.
Eigen::Vector2d truncated_normal_2d(std::mt19937_64& rng, double kappa2) {
  const double mass = -std::expm1(-0.5 * kappa2);
  const double s = -2.0 * std::log1p(-unit_uniform(rng) * mass);
  const double phi = 2.0 * kPi * unit_uniform(rng);
  const double rad = std::sqrt(std::min(s, kappa2));
  return {rad * std::cos(phi), rad * std::sin(phi)};
}

void draw_realization(const PointMatrix& mean, const std::vector<Eigen::Matrix2d>& factors, double kappa2,
                      std::uint64_t seed, int k, PointMatrix& out) {
  out = mean;
  if (k == 0) return;
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    out.row(i) += (factors[static_cast<std::size_t>(i)] * truncated_normal_2d(rng, kappa2)).transpose();
  }
}

}  // namespace

std::vector<PointMatrix> sample_realization_points(const UncertainTrajectory& u, const SamplingOptions& opts) {
  if (opts.realizations < 1) throw Error(ErrorCode::ContractViolation, "need at least one realization");
  const auto factors = ellipse_factors(u, opts);
  const PointMatrix mean = positions(u.mean);
  std::vector<PointMatrix> out(static_cast<std::size_t>(opts.realizations));
  for (int k = 0; k < opts.realizations; ++k) draw_realization(mean, factors, u.kappa2, opts.seed, k, out[k]);
  return out;
}

std::vector<Trajectory> sample_realizations(const UncertainTrajectory& u, const SamplingOptions& opts) {
  const auto pts = sample_realization_points(u, opts);
  std::vector<Trajectory> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    Trajectory t{u.mean.id, {}, u.mean.source};
    t.points.reserve(u.mean.size());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      t.points.push_back(TimedPoint::cartesian(u.mean.points[static_cast<std::size_t>(i)].t, p(i, 0), p(i, 1)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

FrechetBounds uncertain_frechet(const Trajectory& cam, const UncertainTrajectory& rfid, const SamplingOptions& opts) {
  if (opts.realizations < 1) throw Error(ErrorCode::ContractViolation, "need at least one realization");
  if (cam.size() != rfid.mean.size()) {
    throw Error(ErrorCode::LengthMismatch, "camera and RFID paths must be resampled to the same length");
  }
  const auto factors = ellipse_factors(rfid, opts);
  const PointMatrix cam_pts = positions(cam);
  const PointMatrix mean = positions(rfid.mean);
  FrechetBounds bounds{std::numeric_limits<double>::infinity(), 0.0, opts.realizations};
  PointMatrix realization;
  for (int k = 0; k < opts.realizations; ++k) {
    draw_realization(mean, factors, rfid.kappa2, opts.seed, k, realization);
    const double d = discrete_frechet(cam_pts, realization);
    bounds.d_min = std::min(bounds.d_min, d);
    bounds.d_max = std::max(bounds.d_max, d);
  }
  return bounds;
}

}  // namespace fusetrack::similarity
