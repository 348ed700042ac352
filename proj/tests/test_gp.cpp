#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/LU>

#include "fusetrack/gp.hpp"

using namespace fusetrack;
using gp::GpModel;

namespace {

// Brute-force predictor: forms the jittered kernel and inverts it explicitly.
struct DirectGp {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double sigma, sigma_n, mean;
  Eigen::MatrixXd kinv;

  DirectGp(Eigen::MatrixXd xs, Eigen::VectorXd ys, double s, double sn, double m)
      : x(std::move(xs)), y(std::move(ys)), sigma(s), sigma_n(sn), mean(m) {
    const auto n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d2 = (x.row(i) - x.row(j)).squaredNorm();
        k(i, j) = std::exp(-d2 / (2 * sigma * sigma)) + (i == j ? sigma_n * sigma_n : 0.0);
      }
    kinv = k.fullPivLu().inverse();
  }
  Eigen::VectorXd kstar(const Eigen::RowVectorXd& xs) const {
    Eigen::VectorXd k(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) k(i) = std::exp(-(x.row(i) - xs).squaredNorm() / (2 * sigma * sigma));
    return k;
  }
  double mean_at(const Eigen::RowVectorXd& xs) const {
    return mean + kstar(xs).dot(kinv * (y - Eigen::VectorXd::Constant(y.size(), mean)));
  }
  double var_at(const Eigen::RowVectorXd& xs) const {
    const auto k = kstar(xs);
    return 1.0 - k.dot(kinv * k);
  }
};

// Inputs with a minimum pairwise separation so sigma_n = 0 stays well conditioned.
Eigen::MatrixXd spread_inputs(std::mt19937_64& rng, int n, int dim, double lo, double hi, double min_sep) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(n, dim);
  int filled = 0;
  while (filled < n) {
    Eigen::RowVectorXd c(dim);
    for (int k = 0; k < dim; ++k) c(k) = u(rng);
    bool ok = true;
    for (int i = 0; i < filled && ok; ++i) ok = (x.row(i) - c).norm() >= min_sep;
    if (ok) x.row(filled++) = c;
  }
  return x;
}

}  // namespace

TEST_CASE("rbf kernel examples") {
  const Eigen::Vector2d a(0.3, -1.0);
  CHECK(gp::rbf_kernel(a, a, 0.7) == 1.0);
  const double sigma = 0.8;
  const Eigen::Vector2d b = a + Eigen::Vector2d(sigma * std::sqrt(2.0), 0.0);
  CHECK(gp::rbf_kernel(a, b, sigma) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(gp::rbf_kernel(a, Eigen::Vector2d(a + Eigen::Vector2d(1e3, 0)), 1.0) < 1e-300);
  CHECK_THROWS_AS(gp::rbf_kernel(a, b, 0.0), Error);
}

TEST_CASE("fit edge cases") {
  Eigen::MatrixXd x1(1, 1);
  x1 << 2.0;
  Eigen::VectorXd y1(1);
  y1 << 3.5;
  const auto single = GpModel::fit(x1, y1, {1.0, 0.0, std::nullopt});
  CHECK(single.predict_mean(x1.row(0)) == doctest::Approx(3.5));
  CHECK(single.predict_variance(x1.row(0)) <= 1e-10);

  Eigen::MatrixXd dup(2, 1);
  dup << 1.0, 1.0;
  Eigen::VectorXd ydup(2);
  ydup << 0.0, 1.0;
  try {
    GpModel::fit(dup, ydup, {1.0, 0.0, std::nullopt});
    FAIL("expected SingularKernel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularKernel);
  }
  const auto jittered = GpModel::fit(dup, ydup, {1.0, 1e-6, std::nullopt});
  const DirectGp direct(dup, ydup, 1.0, 1e-6, 0.5);
  Eigen::RowVectorXd q(1);
  q << 1.3;
  CHECK(jittered.predict_mean(q) == doctest::Approx(direct.mean_at(q)).epsilon(1e-9));

  CHECK_THROWS_AS(GpModel::fit(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), {}), Error);
  CHECK_THROWS_AS(GpModel::fit(x1, y1, {-1.0, 0.0, std::nullopt}), Error);
}

TEST_CASE("prediction examples") {
  Eigen::MatrixXd x(2, 1);
  x << -1.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  const auto m = GpModel::fit(x, y, {1.0, 0.0, 0.0});
  Eigen::RowVectorXd mid(1);
  mid << 0.0;
  // alpha = K^{-1} y with K = [[1, c], [c, 1]], c = e^{-2}; both training
  // points sit at equal distance from 0, so the mean is k (alpha0 + alpha1) = k / (1 + c).
  const double c = std::exp(-2.0), k = std::exp(-0.5);
  CHECK(m.predict_mean(mid) == doctest::Approx(k / (1.0 + c)).epsilon(1e-12));

  Eigen::RowVectorXd far(1);
  far << 1e3;
  CHECK(m.predict_mean(far) == doctest::Approx(0.0));
  CHECK(m.predict_variance(far) == doctest::Approx(1.0).epsilon(1e-12));

  const auto default_mean = GpModel::fit(x, y, {1.0, 0.0, std::nullopt});
  CHECK(default_mean.prior_mean() == 0.5);
  CHECK(default_mean.predict_mean(far) == doctest::Approx(0.5));
}

TEST_CASE("interpolation with zero jitter and variance range") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 19;
    const Eigen::MatrixXd x = spread_inputs(rng, n, 2, 0.0, 10.0, 1.5);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = std::sin(x(i, 0)) + 0.3 * x(i, 1);
    const auto m = GpModel::fit(x, y, {1.0, 0.0, std::nullopt});
    for (int i = 0; i < n; ++i) {
      REQUIRE(std::abs(m.predict_mean(x.row(i)) - y(i)) <= 1e-8);
      REQUIRE(m.predict_variance(x.row(i)) <= 1e-10);
    }
    std::uniform_real_distribution<double> u(-5.0, 15.0);
    for (int k = 0; k < 200; ++k) {
      Eigen::RowVector2d q(u(rng), u(rng));
      const double v = m.predict_variance(q);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= gp::rbf_kernel(q, q, 1.0));
    }
  }
}

TEST_CASE("cached solve agrees with the explicit-inverse oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 20;
    const int dim = 1 + trial % 3;
    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = u(rng);
    const double sigma = 0.5 + 0.1 * (trial % 10), sigma_n = 0.1;
    const auto m = GpModel::fit(x, y, {sigma, sigma_n, std::nullopt});
    const DirectGp d(x, y, sigma, sigma_n, y.mean());
    for (int k = 0; k < 20; ++k) {
      Eigen::RowVectorXd q(dim);
      for (int c = 0; c < dim; ++c) q(c) = u(rng);
      REQUIRE(std::abs(m.predict_mean(q) - d.mean_at(q)) <= 1e-9);
      REQUIRE(std::abs(m.predict_variance(q) - std::max(0.0, d.var_at(q))) <= 1e-9);
    }
  }
}

TEST_CASE("prediction is invariant under permutation of the training set") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int n = 12;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) << u(rng), u(rng);
    y(i) = u(rng);
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd xp(n, 2);
  Eigen::VectorXd yp(n);
  for (int i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[i]);
    yp(i) = y(perm[i]);
  }
  const auto a = GpModel::fit(x, y, {0.7, 0.05, std::nullopt});
  const auto b = GpModel::fit(xp, yp, {0.7, 0.05, std::nullopt});
  for (int k = 0; k < 50; ++k) {
    Eigen::RowVector2d q(u(rng), u(rng));
    CHECK(a.predict_mean(q) == doctest::Approx(b.predict_mean(q)).epsilon(1e-10));
    CHECK(a.predict_variance(q) == doctest::Approx(b.predict_variance(q)).epsilon(1e-8));
  }
}

TEST_CASE("grid search ranks length scales by held-out error") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const int n = 80;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    y(i) = std::sin(x(i, 0));
  }
  const std::vector<double> grid{0.01, 0.1, 1.0, 100.0};
  const auto scores = gp::grid_search_length_scale(x, y, grid, 0.8, 1e-3, 4);
  REQUIRE(scores.size() == grid.size());
  CHECK(scores.front().length_scale == 1.0);
  for (std::size_t k = 1; k < scores.size(); ++k) CHECK(scores[k - 1].rmse <= scores[k].rmse);
  // Same seed, same split: identical scores.
  const auto again = gp::grid_search_length_scale(x, y, grid, 0.8, 1e-3, 4);
  for (std::size_t k = 0; k < scores.size(); ++k) CHECK(scores[k].rmse == again[k].rmse);
  CHECK_THROWS_AS(gp::grid_search_length_scale(x, y, grid, 1.0, 1e-3, 4), Error);
}

TEST_CASE("float instantiation") {
  Eigen::MatrixXf x(3, 1);
  x << 0.0f, 1.0f, 2.0f;
  Eigen::VectorXf y(3);
  y << 1.0f, 2.0f, 0.5f;
  const auto m = gp::GaussianProcess<float>::fit(x, y, {1.0f, 1e-3f, std::nullopt});
  CHECK(m.predict_mean(x.row(1)) == doctest::Approx(2.0f).epsilon(1e-3));
}
