#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fusetrack/align.hpp"
#include "support.hpp"

using namespace fusetrack;
using namespace fusetrack::align;
using test::line_track;

namespace {

Trajectory sampled(const std::string& id, double t0, double t1, int n, double (*fx)(double), double (*fy)(double)) {
  Trajectory tr{id, {}, Source::Simulated};
  for (int k = 0; k < n; ++k) {
    const double t = t0 + (t1 - t0) * k / (n - 1);
    tr.points.push_back(TimedPoint::cartesian(t, fx(t), fy(t)));
  }
  return tr;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ContractViolation;
}

}  // namespace

TEST_CASE("overlap_interval examples") {
  const auto cam = line_track("c", 0, 100, 11, {0, 0}, {1, 0});
  const auto rfid = line_track("r", 10, 130, 13, {0, 0}, {1, 0});
  const auto iv = overlap_interval(cam, rfid);
  CHECK(iv.start == 10.0);
  CHECK(iv.end == 100.0);

  const auto same = overlap_interval(cam, cam);
  CHECK(same.start == 0.0);
  CHECK(same.end == 100.0);

  const auto early = line_track("c", 0, 5, 6, {0, 0}, {1, 0});
  const auto late = line_track("r", 6, 10, 5, {0, 0}, {1, 0});
  CHECK(code_of([&] { overlap_interval(early, late); }) == ErrorCode::NoOverlap);
  CHECK(code_of([&] { overlap_interval(early, Trajectory{}); }) == ErrorCode::Empty);
}

TEST_CASE("resample examples") {
  SUBCASE("straight line at its own timestamps") {
    const auto tr = line_track("a", 0, 9, 10, {1, -2}, {0.5, 1.5});
    const auto out = resample(tr, {0, 9}, 10);
    REQUIRE(out.size() == 10);
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(out.points[k].t == tr.points[k].t);
      CHECK((out.points[k].coords - tr.points[k].coords).norm() <= 1e-9);
    }
  }
  SUBCASE("two points interpolate linearly") {
    Trajectory tr{"b", {TimedPoint::cartesian(0, 0, 0), TimedPoint::cartesian(2, 4, -2)}};
    const auto out = resample(tr, {0, 2}, 5);
    for (int k = 0; k < 5; ++k) {
      const double t = 0.5 * k;
      CHECK(out.points[k].coords.x() == doctest::Approx(2 * t));
      CHECK(out.points[k].coords.y() == doctest::Approx(-t));
    }
  }
  SUBCASE("y = t^2 at midpoints") {
    const auto tr = sampled("q", 0, 4, 5, [](double t) { return t; }, [](double t) { return t * t; });
    const auto out = resample(tr, {0.5, 3.5}, 4);
    for (const auto& p : out.points) {
      CHECK(std::abs(p.coords.y() - p.t * p.t) <= 1e-6);
      CHECK(std::abs(p.coords.x() - p.t) <= 1e-9);
    }
  }
  SUBCASE("insufficient support") {
    Trajectory one{"s", {TimedPoint::cartesian(0, 0, 0)}};
    CHECK(code_of([&] { resample(one, {0, 0}, 3); }) == ErrorCode::InsufficientSupport);
    const auto tr = line_track("a", 0, 1, 3, {0, 0}, {1, 0});
    CHECK(code_of([&] { resample(tr, {0, 2}, 3); }) == ErrorCode::InsufficientSupport);
  }
  SUBCASE("polar input is resampled in the cartesian frame") {
    Trajectory tr{"p", {TimedPoint::polar(0, 1, 0), TimedPoint::polar(1, 1, kPi / 2)}};
    const auto out = resample(tr, {0, 1}, 3);
    CHECK(out.points[1].frame == Frame::Cartesian);
    CHECK(out.points[1].coords.isApprox(Eigen::Vector2d(0.5, 0.5)));
  }
}

TEST_CASE("spline reproduces cubics with not-a-knot ends") {
  std::vector<double> knots{0.0, 0.7, 1.1, 2.0, 3.4, 4.0};
  std::vector<double> vals;
  auto f = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t; };
  for (double t : knots) vals.push_back(f(t));
  const CubicSpline s(knots, vals);
  for (double t = 0.0; t <= 4.0; t += 0.05) CHECK(s(t) == doctest::Approx(f(t)).epsilon(1e-10));
}

TEST_CASE("align_pair examples") {
  SUBCASE("synchronized inputs") {
    const auto cam = line_track("c", 0, 5, 6, {0, 0}, {1, 0});
    const auto rfid = line_track("r", 0, 5, 6, {0, 1}, {1, 0});
    const auto ap = align_pair(cam, rfid, 6);
    CHECK(ap.n_samples == 6);
    CHECK(timestamps(ap.cam) == timestamps(ap.rfid));
    CHECK(timestamps(ap.cam) == timestamps(cam));
  }
  SUBCASE("30 Hz camera and 10 Hz rfid") {
    const auto cam = line_track("c", 0.0, 12.0, 361, {0, 0}, {0.3, 0.1});
    const auto rfid = line_track("r", 1.0, 15.0, 141, {0.3, 0.1}, {0.3, 0.1});
    const auto ap = align_pair(cam, rfid, 50);
    REQUIRE(ap.cam.size() == 50);
    REQUIRE(ap.rfid.size() == 50);
    CHECK(ap.interval.start == 1.0);
    CHECK(ap.interval.end == 12.0);
    CHECK(ap.cam.t_front() == 1.0);
    CHECK(ap.cam.t_back() == 12.0);
    for (std::size_t k = 0; k < 50; ++k) {
      REQUIRE(ap.cam.points[k].t == ap.rfid.points[k].t);
      REQUIRE((ap.cam.points[k].coords - ap.rfid.points[k].coords).norm() <= 1e-9);
    }
  }
  SUBCASE("rfid entirely before camera") {
    const auto cam = line_track("c", 10, 20, 5, {0, 0}, {1, 0});
    const auto rfid = line_track("r", 0, 5, 5, {0, 0}, {1, 0});
    CHECK(code_of([&] { align_pair(cam, rfid); }) == ErrorCode::NoOverlap);
  }
}

TEST_CASE("resampled grid is uniform and resampling is idempotent") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory tr{"w", {}};
    double t = test::uniform(rng, -5, 5);
    const int n = 4 + trial % 30;
    for (int k = 0; k < n; ++k) {
      tr.points.push_back(TimedPoint::cartesian(t, test::uniform(rng, -3, 3), test::uniform(rng, -3, 3)));
      t += test::uniform(rng, 0.05, 0.5);
    }
    const Interval iv{tr.t_front(), tr.t_back()};
    const int m = 2 + trial % 40;
    const auto once = resample(tr, iv, m);
    const auto grid = uniform_grid(iv, m);
    REQUIRE(timestamps(once) == grid);
    const double step = iv.length() / (m - 1);
    for (int k = 1; k < m; ++k) REQUIRE(grid[k] - grid[k - 1] == doctest::Approx(step).epsilon(1e-9));
    const auto twice = resample(once, iv, m);
    for (int k = 0; k < m; ++k) REQUIRE((twice.points[k].coords - once.points[k].coords).norm() <= 1e-9);
  }
}

TEST_CASE("resample_channels interpolates linearly and clamps") {
  const std::vector<double> knots{0.0, 1.0, 3.0};
  const std::vector<std::vector<double>> ch{{0.0, 2.0, 6.0}, {1.0, 1.0, 0.0}};
  const std::vector<double> at{0.5, 2.0, 3.0, 4.0};
  const auto out = resample_channels(knots, ch, at);
  CHECK(out[0] == std::vector<double>{1.0, 4.0, 6.0, 6.0});
  CHECK(out[1][1] == doctest::Approx(0.5));
}
