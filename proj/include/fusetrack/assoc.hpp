#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fusetrack/error.hpp"

namespace fusetrack::assoc {

inline constexpr double kSigmaRegularization = 1e-9;

/// sqrt((x - mu)^T Sigma^{-1} (x - mu)). `regularization` is added to the
/// diagonal of Sigma before the Cholesky solve.
template <typename DerivedX, typename DerivedMu, typename DerivedSigma>
typename DerivedX::Scalar mahalanobis(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedMu>& mu,
                                      const Eigen::MatrixBase<DerivedSigma>& sigma,
                                      typename DerivedX::Scalar regularization = 0) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, DerivedSigma::RowsAtCompileTime, DerivedSigma::ColsAtCompileTime>;
  Matrix s = sigma;
  s.diagonal().array() += regularization;
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    throw Error(ErrorCode::SingularSigma, "covariance is not positive definite after regularization");
  }
  const auto diff = (x - mu).eval();
  return std::sqrt(std::max(Scalar(0), diff.dot(llt.solve(diff))));
}

/// Accumulated (d_min, d_max) observations for one object/tag pair.
class PairStats {
 public:
  void add(double d_min, double d_max) { samples_.emplace_back(d_min, d_max); }
  const std::vector<Eigen::Vector2d>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

  Eigen::Vector2d mean() const;
  /// Unbiased sample covariance; needs at least two samples.
  Eigen::Matrix2d covariance() const;

 private:
  std::vector<Eigen::Vector2d> samples_;
};

/// Mahalanobis distance of the perfect-match point (0, 0) from N(E, Sigma)
/// fitted to the pair's samples.
double pair_score(const PairStats& stats, double regularization = kSigmaRegularization);

/// Same score with an externally supplied Sigma (e.g. pooled over pairs).
double pair_score(const PairStats& stats, const Eigen::Matrix2d& sigma,
                  double regularization = kSigmaRegularization);

/// Which samples Sigma is estimated from when building the cost matrix.
enum class CovarianceModel {
  PerPair,    ///< each pair's own sample covariance
  PerObject,  ///< mean of the sample covariances along an object's row
  Pooled,     ///< mean over all pairs
};

std::string to_string(CovarianceModel m);
CovarianceModel covariance_model_from_string(const std::string& s);

/// Rows are objects (camera tracks), columns are tags.
struct CostMatrix {
  Eigen::MatrixXd entries;
  std::vector<std::string> object_ids;
  std::vector<std::string> tag_ids;

  Eigen::Index size() const noexcept { return entries.rows(); }
};

CostMatrix build_cost_matrix(const std::vector<std::vector<PairStats>>& stats,
                             CovarianceModel model = CovarianceModel::PerObject,
                             std::vector<std::string> object_ids = {}, std::vector<std::string> tag_ids = {});

enum class AssignMethod { Greedy, Optimal };

std::string to_string(AssignMethod m);
AssignMethod assign_method_from_string(const std::string& s);

struct AssociationResult {
  /// tag_of_object[i] = column assigned to row i.
  std::vector<int> tag_of_object;
  std::vector<double> costs;
  AssignMethod method = AssignMethod::Greedy;

  double total() const;
};

/// Rows in ascending order each take their cheapest remaining column (lowest
/// index on ties); the chosen column is then removed.
AssociationResult greedy_assign(const CostMatrix& m);

/// Minimum-total-cost perfect matching (Hungarian method with potentials).
AssociationResult optimal_assign(const CostMatrix& m);

AssociationResult assign(const CostMatrix& m, AssignMethod method);

}  // namespace fusetrack::assoc
