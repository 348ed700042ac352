#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <Eigen/LU>

#include "fusetrack/assoc.hpp"
#include "fusetrack/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fusetrack;
using namespace fusetrack::assoc;

namespace {

CostMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  CostMatrix m;
  m.entries.resize(n, n);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m.entries(i, j++) = v;
    ++i;
  }
  return m;
}

PairStats stats_of(std::initializer_list<Eigen::Vector2d> samples) {
  PairStats s;
  for (const auto& v : samples) s.add(v.x(), v.y());
  return s;
}

bool is_bijection(const AssociationResult& r, std::size_t n) {
  std::set<int> seen(r.tag_of_object.begin(), r.tag_of_object.end());
  return r.tag_of_object.size() == n && seen.size() == n && *seen.begin() == 0 &&
         *seen.rbegin() == static_cast<int>(n) - 1;
}

}  // namespace

TEST_CASE("mahalanobis examples") {
  const Eigen::Vector2d mu(1.5, -2.0);
  CHECK(mahalanobis(mu, mu, Eigen::Matrix2d::Identity().eval()) == 0.0);
  CHECK(mahalanobis(Eigen::Vector2d(mu + Eigen::Vector2d(3, 4)), mu, Eigen::Matrix2d::Identity().eval()) ==
        doctest::Approx(5.0));
  const Eigen::Matrix2d d = Eigen::Vector2d(4, 1).asDiagonal();
  CHECK(mahalanobis(Eigen::Vector2d(2, 0), Eigen::Vector2d::Zero().eval(), d) == doctest::Approx(1.0));
  try {
    mahalanobis(Eigen::Vector2d(1, 0), Eigen::Vector2d::Zero().eval(), Eigen::Matrix2d::Zero().eval());
    FAIL("expected SingularSigma");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSigma);
  }
  CHECK(mahalanobis(Eigen::Vector2d(1, 0), Eigen::Vector2d::Zero().eval(), Eigen::Matrix2d::Zero().eval(), 1.0) ==
        doctest::Approx(1.0));
}

TEST_CASE("mahalanobis properties") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Vector2d x(test::uniform(rng, -10, 10), test::uniform(rng, -10, 10));
    const Eigen::Vector2d mu(test::uniform(rng, -10, 10), test::uniform(rng, -10, 10));
    REQUIRE(mahalanobis(x, mu, Eigen::Matrix2d::Identity().eval()) == doctest::Approx((x - mu).norm()).epsilon(1e-12));

    Eigen::Matrix2d b;
    b << test::uniform(rng, -2, 2), test::uniform(rng, -2, 2), test::uniform(rng, -2, 2), test::uniform(rng, -2, 2);
    const Eigen::Matrix2d sigma = b * b.transpose() + 0.1 * Eigen::Matrix2d::Identity();
    Eigen::Matrix2d a;
    do {
      a << test::uniform(rng, -3, 3), test::uniform(rng, -3, 3), test::uniform(rng, -3, 3), test::uniform(rng, -3, 3);
    } while (std::abs(a.determinant()) < 0.1);
    const double d0 = mahalanobis(x, mu, sigma);
    const double d1 = mahalanobis(Eigen::Vector2d(a * x), Eigen::Vector2d(a * mu), Eigen::Matrix2d(a * sigma * a.transpose()));
    REQUIRE(std::abs(d0 - d1) <= 1e-8 * std::max(1.0, d0));
  }
}

TEST_CASE("pair statistics and score") {
  const PairStats zero = stats_of({{0, 0}, {0, 0}, {0, 0}});
  CHECK(zero.mean() == Eigen::Vector2d::Zero());
  CHECK(pair_score(zero) == 0.0);

  // Unbiased covariance of +/-a offsets on each axis is diag(2a^2/3); a^2 = 1.5 gives I.
  const double a = std::sqrt(1.5);
  const PairStats s = stats_of({{3 + a, 4}, {3 - a, 4}, {3, 4 + a}, {3, 4 - a}});
  CHECK(s.mean().isApprox(Eigen::Vector2d(3, 4)));
  CHECK(s.covariance().isApprox(Eigen::Matrix2d::Identity()));
  CHECK(pair_score(s) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(pair_score(s, Eigen::Matrix2d(Eigen::Vector2d(9, 16).asDiagonal())) == doctest::Approx(std::sqrt(2.0)));

  try {
    pair_score(stats_of({{1, 2}}));
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSamples);
  }
}

TEST_CASE("build_cost_matrix") {
  SUBCASE("N = 1") {
    const auto m = build_cost_matrix({{stats_of({{1, 2}, {2, 3}, {1, 3}})}}, CovarianceModel::PerPair, {"o"}, {"t"});
    CHECK(m.size() == 1);
    CHECK(m.object_ids == std::vector<std::string>{"o"});
    CHECK(m.tag_ids == std::vector<std::string>{"t"});
  }
  SUBCASE("symmetric stats give a symmetric matrix") {
    std::mt19937_64 rng(4);
    const int n = 4;
    std::vector<std::vector<PairStats>> st(n, std::vector<PairStats>(n));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        for (int k = 0; k < 6; ++k) {
          const double lo = test::uniform(rng, 0, 3);
          st[i][j].add(lo, lo + test::uniform(rng, 0, 2));
        }
        st[j][i] = st[i][j];
      }
    for (auto model : {CovarianceModel::PerPair, CovarianceModel::Pooled}) {
      const auto m = build_cost_matrix(st, model);
      CHECK((m.entries - m.entries.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(m.entries.minCoeff() >= 0.0);
      CHECK(m.object_ids.size() == n);
    }
  }
  SUBCASE("pair indices are reported for short statistics") {
    std::vector<std::vector<PairStats>> st(2, std::vector<PairStats>(2, stats_of({{1, 1}, {2, 2}})));
    st[1][0] = stats_of({{1, 1}});
    try {
      build_cost_matrix(st);
      FAIL("expected InsufficientSamples");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientSamples);
      CHECK(std::string(e.what()).find("(1, 0)") != std::string::npos);
    }
  }
  SUBCASE("covariance models") {
    for (const char* name : {"per_pair", "per_object", "pooled"})
      CHECK(to_string(covariance_model_from_string(name)) == name);
    CHECK_THROWS_AS(covariance_model_from_string("diag"), Error);
  }
}

TEST_CASE("well-separated pairs score lower on the true pairing") {
  // Two people walking parallel lines 6 m apart; each tag's filtered track
  // follows its own person.
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Trajectory> cams{test::line_track("a", 0, 20, 601, {8, -3}, {0.2, 0.3}),
                               test::line_track("b", 0, 20, 601, {8, 3}, {0.2, 0.3})};
  for (auto& c : cams)
    for (auto& p : c.points) p.coords += 0.02 * Eigen::Vector2d(n01(rng), n01(rng));
  std::vector<std::vector<ekf::Measurement>> rfid(2);
  const double sr = 0.3, sth = 1.0 * kPi / 180;
  for (int k = 0; k <= 200; ++k) {
    const double t = 0.1 * k;
    for (int j = 0; j < 2; ++j) {
      const Eigen::Vector2d p = Eigen::Vector2d(8, j == 0 ? -3 : 3) + t * Eigen::Vector2d(0.2, 0.3);
      rfid[j].push_back({p.norm() + sr * n01(rng), std::atan2(p.y(), p.x()) + sth * n01(rng), sr * sr, sth * sth, t});
    }
  }
  const auto run = pipeline::analyze(cams, {"ta", "tb"}, rfid, {});
  REQUIRE(run.steps.back().costs.has_value());
  const auto& e = run.steps.back().costs->entries;
  CHECK(e(0, 0) < e(0, 1));
  CHECK(e(1, 1) < e(1, 0));
  CHECK(e(0, 0) < e(1, 0));
  CHECK(e(1, 1) < e(0, 1));
}

TEST_CASE("greedy and optimal assignment examples") {
  const auto diag = matrix({{0.1, 5, 6}, {4, 0.2, 7}, {9, 8, 0.3}});
  CHECK(greedy_assign(diag).tag_of_object == std::vector<int>{0, 1, 2});
  CHECK(optimal_assign(diag).tag_of_object == std::vector<int>{0, 1, 2});

  const auto g = greedy_assign(matrix({{1, 5}, {4, 2}}));
  CHECK(g.tag_of_object == std::vector<int>{0, 1});
  CHECK(g.total() == 3.0);

  const auto trap = matrix({{1, 2}, {1.1, 100}});
  const auto gr = greedy_assign(trap);
  CHECK(gr.tag_of_object == std::vector<int>{0, 1});
  CHECK(gr.total() == doctest::Approx(101.0));
  CHECK(gr.method == AssignMethod::Greedy);
  const auto op = optimal_assign(trap);
  CHECK(op.tag_of_object == std::vector<int>{1, 0});
  CHECK(op.total() == doctest::Approx(3.1));
  CHECK(op.method == AssignMethod::Optimal);
  CHECK(assign(trap, AssignMethod::Optimal).tag_of_object == op.tag_of_object);

  // Ties go to the lowest column.
  CHECK(greedy_assign(matrix({{1, 1}, {1, 1}})).tag_of_object == std::vector<int>{0, 1});
  for (const char* name : {"greedy", "optimal"}) CHECK(to_string(assign_method_from_string(name)) == name);
}

TEST_CASE("assignment agrees with exhaustive enumeration") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 6;
    CostMatrix m;
    m.entries.resize(n, n);
    for (Eigen::Index k = 0; k < m.entries.size(); ++k)
      m.entries.data()[k] = trial % 3 == 0 ? std::floor(test::uniform(rng, 0, 4)) : test::uniform(rng, 0, 10);
    const auto g = greedy_assign(m);
    const auto o = optimal_assign(m);
    REQUIRE(is_bijection(g, n));
    REQUIRE(is_bijection(o, n));
    const double best = test::assignment_bruteforce(m.entries);
    REQUIRE(o.total() == doctest::Approx(best).epsilon(1e-12));
    REQUIRE(g.total() >= o.total() - 1e-12);
    for (int i = 0; i < n; ++i) REQUIRE(o.costs[i] == m.entries(i, o.tag_of_object[i]));
  }
}
