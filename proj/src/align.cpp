#include "fusetrack/align.hpp"

#include <algorithm>
#include <string>

namespace fusetrack::align {

namespace {

// Second derivatives of the not-a-knot spline (n >= 4 knots). The two end
// conditions are folded into the first/last interior rows so the remaining
// system is tridiagonal in M_1 .. M_{n-2}.
std::vector<double> not_a_knot_second_derivatives(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  std::vector<double> h(n - 1), slope(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = t[i + 1] - t[i];
    slope[i] = (y[i + 1] - y[i]) / h[i];
  }
  const std::size_t m = n - 2;  // unknowns M_1 .. M_{n-2}
  std::vector<double> sub(m, 0.0), diag(m, 0.0), sup(m, 0.0), rhs(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 1;
    sub[k] = h[i - 1];
    diag[k] = 2.0 * (h[i - 1] + h[i]);
    sup[k] = h[i];
    rhs[k] = 6.0 * (slope[i] - slope[i - 1]);
  }
  // M_0 = ((h0 + h1) M_1 - h0 M_2) / h1
  {
    const double a = (h[0] + h[1]) / h[1], b = -h[0] / h[1];
    diag[0] += sub[0] * a;
    sup[0] += sub[0] * b;
    sub[0] = 0.0;
  }
  // M_{n-1} = ((h_{n-2} + h_{n-3}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}
  {
    const double hl = h[n - 2], hp = h[n - 3];
    const double a = (hl + hp) / hp, b = -hl / hp;
    diag[m - 1] += sup[m - 1] * a;
    sub[m - 1] += sup[m - 1] * b;
    sup[m - 1] = 0.0;
  }
  // Thomas algorithm.
  for (std::size_t k = 1; k < m; ++k) {
    const double w = sub[k] / diag[k - 1];
    diag[k] -= w * sup[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  std::vector<double> M(n, 0.0);
  M[m] = rhs[m - 1] / diag[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) M[k + 1] = (rhs[k] - sup[k] * M[k + 2]) / diag[k];
  M[0] = ((h[0] + h[1]) * M[1] - h[0] * M[2]) / h[1];
  M[n - 1] = ((h[n - 2] + h[n - 3]) * M[n - 2] - h[n - 2] * M[n - 3]) / h[n - 3];
  return M;
}

}  // namespace

CubicSpline::CubicSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size() || knots_.size() < 2) {
    throw Error(ErrorCode::InsufficientSupport, "spline needs at least two knots");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1])) throw Error(ErrorCode::NonMonotoneTime, "spline knots must increase");
  }
  const std::size_t n = knots_.size();
  if (n == 2) {
    second_.assign(2, 0.0);
  } else if (n == 3) {
    const double d0 = (values_[1] - values_[0]) / (knots_[1] - knots_[0]);
    const double d1 = (values_[2] - values_[1]) / (knots_[2] - knots_[1]);
    second_.assign(3, 2.0 * (d1 - d0) / (knots_[2] - knots_[0]));
  } else {
    second_ = not_a_knot_second_derivatives(knots_, values_);
  }
}

double CubicSpline::operator()(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  std::size_t i = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
  i = std::min(i, knots_.size() - 2);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - t) / h;
  const double b = (t - knots_[i]) / h;
  return a * values_[i] + b * values_[i + 1] +
         ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * (h * h) / 6.0;
}

Interval overlap_interval(const Trajectory& cam, const Trajectory& rfid) {
  if (cam.empty() || rfid.empty()) throw Error(ErrorCode::Empty, "overlap needs non-empty trajectories");
  Interval iv{std::max(cam.t_front(), rfid.t_front()), std::min(cam.t_back(), rfid.t_back())};
  if (!(iv.start < iv.end)) {
    throw Error(ErrorCode::NoOverlap, "trajectories '" + cam.id + "' and '" + rfid.id + "' do not overlap in time");
  }
  return iv;
}

std::vector<double> uniform_grid(const Interval& interval, int n) {
  if (n < 2) throw Error(ErrorCode::ContractViolation, "resampling needs n >= 2");
  std::vector<double> ts(static_cast<std::size_t>(n));
  const double step = interval.length() / (n - 1);
  for (int k = 0; k < n; ++k) ts[static_cast<std::size_t>(k)] = interval.start + step * k;
  ts.back() = interval.end;
  return ts;
}

Trajectory resample(const Trajectory& traj, const Interval& interval, int n) {
  if (traj.size() < 2 || traj.t_front() > interval.start || traj.t_back() < interval.end) {
    throw Error(ErrorCode::InsufficientSupport,
                "trajectory '" + traj.id + "' does not cover the interval with at least two points");
  }
  require_valid(traj);
  const auto grid = uniform_grid(interval, n);
  const PointMatrix xy = positions(traj);
  auto knots = timestamps(traj);
  std::vector<double> xs(xy.col(0).begin(), xy.col(0).end()), ys(xy.col(1).begin(), xy.col(1).end());
  const CubicSpline sx(knots, std::move(xs));
  const CubicSpline sy(std::move(knots), std::move(ys));

  Trajectory out{traj.id, {}, traj.source};
  out.points.reserve(grid.size());
  for (double t : grid) out.points.push_back(TimedPoint::cartesian(t, sx(t), sy(t)));
  return out;
}

std::vector<std::vector<double>> resample_channels(std::span<const double> knots,
                                                   const std::vector<std::vector<double>>& channels,
                                                   std::span<const double> at) {
  // Piecewise-linear so convex quantities (covariances) stay convex.
  std::vector<std::vector<double>> out(channels.size(), std::vector<double>(at.size(), 0.0));
  for (std::size_t k = 0; k < at.size(); ++k) {
    const double t = at[k];
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - knots.begin());
    if (hi == 0) hi = 1;
    if (hi >= knots.size()) hi = knots.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = std::clamp((t - knots[lo]) / (knots[hi] - knots[lo]), 0.0, 1.0);
    for (std::size_t c = 0; c < channels.size(); ++c) {
      out[c][k] = (1.0 - w) * channels[c][lo] + w * channels[c][hi];
    }
  }
  return out;
}

AlignedPair align_pair(const Trajectory& cam, const Trajectory& rfid, int n) {
  const Interval iv = overlap_interval(cam, rfid);
  return {resample(cam, iv, n), resample(rfid, iv, n), n, iv};
}

}  // namespace fusetrack::align
