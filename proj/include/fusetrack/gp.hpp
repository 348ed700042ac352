#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fusetrack/error.hpp"

namespace fusetrack::gp {

/// Radial basis function kernel, exp(-|x1 - x2|^2 / (2 sigma^2)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rbf_kernel(const Eigen::MatrixBase<DerivedA>& x1, const Eigen::MatrixBase<DerivedB>& x2,
                                     typename DerivedA::Scalar length_scale) {
  using Scalar = typename DerivedA::Scalar;
  if (!(length_scale > Scalar(0))) throw Error(ErrorCode::ContractViolation, "rbf length scale must be positive");
  return std::exp(-(x1 - x2).squaredNorm() / (Scalar(2) * length_scale * length_scale));
}

template <typename Scalar>
struct Hyperparameters {
  Scalar length_scale = Scalar(1);
  Scalar jitter = Scalar(1e-6);  // sigma_n; the kernel diagonal gets jitter^2
  /// Constant prior mean m(x). When unset, the mean of the training targets is used.
  std::optional<Scalar> prior_mean;
};

/// Exact GP regression with an RBF kernel and a constant prior mean.
///
/// Training inputs are stored one sample per row. The jittered kernel is
/// factored once at fit time; the fitted model is immutable, so concurrent
/// predictions are safe.
template <typename Scalar>
class GaussianProcess {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  static GaussianProcess fit(Matrix inputs, Vector targets, Hyperparameters<Scalar> hp) {
    if (inputs.rows() < 1 || inputs.rows() != targets.size()) {
      throw Error(ErrorCode::ContractViolation, "GP fit needs |X| = |Y| >= 1");
    }
    if (!(hp.length_scale > Scalar(0)) || hp.jitter < Scalar(0)) {
      throw Error(ErrorCode::ContractViolation, "GP hyperparameters must satisfy sigma > 0, sigma_n >= 0");
    }
    GaussianProcess gp;
    gp.inputs_ = std::move(inputs);
    gp.targets_ = std::move(targets);
    gp.hp_ = hp;
    gp.mean_ = hp.prior_mean ? *hp.prior_mean : gp.targets_.mean();

    const Eigen::Index n = gp.inputs_.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k(i, i) = Scalar(1) + hp.jitter * hp.jitter;
      for (Eigen::Index j = 0; j < i; ++j) {
        k(i, j) = k(j, i) = rbf_kernel(gp.inputs_.row(i), gp.inputs_.row(j), hp.length_scale);
      }
    }
    gp.factor_.compute(k);
    if (gp.factor_.info() != Eigen::Success || gp.factor_.rcond() < kMinRcond) {
      throw Error(ErrorCode::SingularKernel, "jittered kernel is not numerically positive definite (increase sigma_n)");
    }
    gp.alpha_ = gp.factor_.solve(gp.targets_ - Vector::Constant(n, gp.mean_));
    return gp;
  }

  template <typename Derived>
  Scalar predict_mean(const Eigen::MatrixBase<Derived>& x) const {
    return mean_ + cross_kernel(x).dot(alpha_);
  }

  template <typename Derived>
  Scalar predict_variance(const Eigen::MatrixBase<Derived>& x) const {
    const Vector v = factor_.matrixL().solve(cross_kernel(x));
    return std::max(Scalar(0), Scalar(1) - v.squaredNorm());
  }

  const Matrix& inputs() const noexcept { return inputs_; }
  const Vector& targets() const noexcept { return targets_; }
  const Hyperparameters<Scalar>& hyperparameters() const noexcept { return hp_; }
  Scalar prior_mean() const noexcept { return mean_; }
  Eigen::Index input_dim() const noexcept { return inputs_.cols(); }

 private:
  static constexpr Scalar kMinRcond = Scalar(1e-14);

  template <typename Derived>
  Vector cross_kernel(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != inputs_.cols()) throw Error(ErrorCode::ContractViolation, "GP test point has wrong dimension");
    const RowVector xr = x.derived().reshaped().transpose().template cast<Scalar>();
    Vector k(inputs_.rows());
    for (Eigen::Index i = 0; i < inputs_.rows(); ++i) k(i) = rbf_kernel(inputs_.row(i), xr, hp_.length_scale);
    return k;
  }

  Matrix inputs_;
  Vector targets_;
  Hyperparameters<Scalar> hp_;
  Scalar mean_ = Scalar(0);
  Eigen::LLT<Matrix> factor_;
  Vector alpha_;
};

using GpModel = GaussianProcess<double>;

struct SplitScore {
  double length_scale = 0.0;
  double rmse = 0.0;
};

/// Picks the length scale with the lowest held-out RMSE on a seeded
/// train/test split (train fraction `split`). Returns every grid score, best first.
inline std::vector<SplitScore> grid_search_length_scale(const GpModel::Matrix& inputs, const GpModel::Vector& targets,
                                                        const std::vector<double>& grid, double split,
                                                        double jitter, std::uint64_t seed) {
  const Eigen::Index n = inputs.rows();
  if (n < 2) throw Error(ErrorCode::ContractViolation, "grid search needs at least two samples");
  if (!(split > 0.0 && split < 1.0)) throw Error(ErrorCode::ContractViolation, "split must lie in (0, 1)");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index n_train = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(split * n)), 1, n - 1);

  GpModel::Matrix x_train(n_train, inputs.cols()), x_test(n - n_train, inputs.cols());
  GpModel::Vector y_train(n_train), y_test(n - n_train);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    if (i < n_train) {
      x_train.row(i) = inputs.row(src);
      y_train(i) = targets(src);
    } else {
      x_test.row(i - n_train) = inputs.row(src);
      y_test(i - n_train) = targets(src);
    }
  }

  std::vector<SplitScore> scores;
  for (double ls : grid) {
    Hyperparameters<double> hp{ls, jitter, std::nullopt};
    double sse = 0.0;
    try {
      const auto model = GpModel::fit(x_train, y_train, hp);
      for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
        const double e = model.predict_mean(x_test.row(i)) - y_test(i);
        sse += e * e;
      }
    } catch (const Error&) {
      sse = std::numeric_limits<double>::infinity();
    }
    scores.push_back({ls, std::sqrt(sse / static_cast<double>(x_test.rows()))});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.rmse < b.rmse; });
  return scores;
}

/// Range and angle-of-arrival models for one frequency bin.
struct BinModels {
  GpModel range;
  GpModel angle;
};

/// Frequency bin label -> per-output models.
using Registry = std::map<std::string, BinModels>;

}  // namespace fusetrack::gp
