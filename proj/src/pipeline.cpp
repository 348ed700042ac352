#include "fusetrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace fusetrack::pipeline {

std::string to_string(Method m) {
  switch (m) {
    case Method::UncertainFrechet: return "frechet";
    case Method::Dtw: return "dtw";
    case Method::Euclid: return "euclid";
  }
  return "frechet";
}

Method method_from_string(const std::string& s) {
  if (s == "frechet" || s == "uncertain_frechet") return Method::UncertainFrechet;
  if (s == "dtw") return Method::Dtw;
  if (s == "euclid" || s == "euclidean") return Method::Euclid;
  throw Error(ErrorCode::SchemaError, "unknown similarity method '" + s + "'");
}

namespace {

Trajectory mean_path(const TagTrack& tag) {
  Trajectory out{tag.id, {}, Source::RFID};
  out.points.reserve(tag.points.size());
  for (const auto& p : tag.points) out.points.push_back(TimedPoint::cartesian(p.t, p.position.x(), p.position.y()));
  return out;
}

}  // namespace

similarity::UncertainTrajectory uncertain_track(const TagTrack& tag, const align::Interval& interval, int n,
                                                double kappa2) {
  const Trajectory path = mean_path(tag);
  similarity::UncertainTrajectory u;
  u.mean = align::resample(path, interval, n);
  u.kappa2 = kappa2;
  std::vector<double> knots;
  std::vector<std::vector<double>> channels(3);
  knots.reserve(tag.points.size());
  for (const auto& p : tag.points) {
    knots.push_back(p.t);
    channels[0].push_back(p.position_cov(0, 0));
    channels[1].push_back(p.position_cov(0, 1));
    channels[2].push_back(p.position_cov(1, 1));
  }
  const auto grid = timestamps(u.mean);
  const auto cov = align::resample_channels(knots, channels, grid);
  u.covariances.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) u.covariances[k] << cov[0][k], cov[1][k], cov[1][k], cov[2][k];
  return u;
}

Associator::Associator(PipelineOptions options, std::size_t n_objects, std::size_t n_tags)
    : options_(options), n_(n_objects) {
  if (n_objects != n_tags) {
    throw Error(ErrorCode::CountMismatch, std::to_string(n_tags) + " tags vs " + std::to_string(n_objects) + " objects");
  }
  if (n_objects == 0) throw Error(ErrorCode::Empty, "no objects to associate");
  stats_.assign(n_, std::vector<assoc::PairStats>(n_));
}

StepResult Associator::step(double t, std::span<const Trajectory> cameras, std::span<const TagTrack> tags) {
  if (cameras.size() != n_ || tags.size() != n_) {
    throw Error(ErrorCode::CountMismatch, "step received a different number of tracks");
  }
  StepResult out;
  out.t = t;
  out.step = step_;
  out.bounds.assign(n_, std::vector<std::optional<similarity::FrechetBounds>>(n_));
  if (options_.keep_aligned) out.aligned.assign(n_, std::vector<std::optional<align::AlignedPair>>(n_));

  const std::uint64_t step_seed = mix_seed(options_.seed, static_cast<std::uint64_t>(step_));
  Eigen::MatrixXd direct(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  bool complete = true;

  // Resampled camera paths keyed by object and interval.
  std::vector<std::map<std::pair<double, double>, Trajectory>> cam_cache(n_);

  for (std::size_t j = 0; j < n_; ++j) {
    const TagTrack& tag = tags[j];
    const Trajectory tag_path = mean_path(tag);
    // Realizations for a tag are shared by every object whose overlap interval matches.
    std::map<std::pair<double, double>, std::pair<similarity::UncertainTrajectory, std::vector<PointMatrix>>> cache;
    for (std::size_t i = 0; i < n_; ++i) {
      const Trajectory& cam = cameras[i];
      if (cam.size() < 2 || tag.points.size() < 2) {
        complete = false;
        continue;
      }
      align::Interval iv;
      try {
        iv = align::overlap_interval(cam, tag_path);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoOverlap) throw;
        complete = false;
        continue;
      }
      auto key = std::make_pair(iv.start, iv.end);
      auto it = cache.find(key);
      if (it == cache.end()) {
        auto u = uncertain_track(tag, iv, options_.samples, options_.kappa2);
        std::vector<PointMatrix> reals;
        if (options_.method == Method::UncertainFrechet) {
          similarity::SamplingOptions so;
          so.realizations = options_.realizations;
          so.seed = mix_seed(step_seed, j);
          so.use_variance_floor = options_.variance_floor;
          reals = similarity::sample_realization_points(u, so);
        }
        it = cache.emplace(key, std::make_pair(std::move(u), std::move(reals))).first;
      }
      const auto& [u, reals] = it->second;
      auto cit = cam_cache[i].find(key);
      if (cit == cam_cache[i].end()) cit = cam_cache[i].emplace(key, align::resample(cam, iv, options_.samples)).first;
      const Trajectory& cam_rs = cit->second;
      const PointMatrix cam_pts = positions(cam_rs);
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);

      switch (options_.method) {
        case Method::UncertainFrechet: {
          similarity::FrechetBounds b{std::numeric_limits<double>::infinity(), 0.0, options_.realizations};
          for (const auto& r : reals) {
            const double d = similarity::discrete_frechet(cam_pts, r);
            b.d_min = std::min(b.d_min, d);
            b.d_max = std::max(b.d_max, d);
          }
          stats_[i][j].add(b.d_min, b.d_max);
          out.bounds[i][j] = b;
          break;
        }
        case Method::Dtw: direct(ii, jj) = similarity::dtw_distance(cam_pts, positions(u.mean)); break;
        case Method::Euclid: direct(ii, jj) = similarity::euclidean_distance(cam_pts, positions(u.mean)); break;
      }
      if (options_.keep_aligned) out.aligned[i][j] = align::AlignedPair{cam_rs, u.mean, options_.samples, iv};
    }
  }
  ++step_;

  if (options_.method == Method::UncertainFrechet) {
    bool scorable = true;
    for (const auto& row : stats_)
      for (const auto& s : row) scorable = scorable && s.size() >= 2;
    if (!scorable) return out;
    out.costs = assoc::build_cost_matrix(stats_, options_.covariance);
  } else {
    if (!complete) return out;
    out.costs = assoc::CostMatrix{direct, {}, {}};
  }
  out.costs->object_ids.clear();
  out.costs->tag_ids.clear();
  for (std::size_t i = 0; i < n_; ++i) {
    out.costs->object_ids.push_back(cameras[i].id);
    out.costs->tag_ids.push_back(tags[i].id);
  }
  out.mapping = assoc::assign(*out.costs, options_.assign);
  return out;
}

std::optional<std::size_t> stable_mapping_start(std::span<const StepResult> steps, int streak) {
  int run = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (!steps[k].mapping) {
      run = 0;
      continue;
    }
    if (run > 0 && steps[k - 1].mapping && steps[k - 1].mapping->tag_of_object == steps[k].mapping->tag_of_object) {
      ++run;
    } else {
      run = 1;
    }
    if (run >= streak) return k + 1 - static_cast<std::size_t>(streak);
  }
  return std::nullopt;
}

namespace {

bool in_window(double t, const AnalysisOptions& a) {
  return (!a.t_min || t >= *a.t_min) && (!a.t_max || t <= *a.t_max);
}

}  // namespace

AnalysisRun analyze(std::vector<Trajectory> cameras, std::vector<std::string> tag_ids,
                    std::vector<std::vector<ekf::Measurement>> rfid, const PipelineOptions& options,
                    const AnalysisOptions& analysis) {
  if (tag_ids.size() != rfid.size()) throw Error(ErrorCode::ContractViolation, "one measurement sequence per tag id");
  if (cameras.size() != tag_ids.size()) {
    throw Error(ErrorCode::CountMismatch,
                std::to_string(tag_ids.size()) + " tags vs " + std::to_string(cameras.size()) + " camera tracks");
  }
  if (!(analysis.period > 0)) throw Error(ErrorCode::ContractViolation, "analysis period must be positive");
  const std::size_t n = cameras.size();
  AnalysisRun run;
  run.tag_ids = tag_ids;

  double t0 = std::numeric_limits<double>::infinity(), t_end = -t0;
  for (auto& cam : cameras) {
    std::erase_if(cam.points, [&](const TimedPoint& p) { return !in_window(p.t, analysis); });
    cam = to_cartesian(cam);
    run.object_ids.push_back(cam.id);
    if (!cam.empty()) {
      t0 = std::min(t0, cam.t_front());
      t_end = std::max(t_end, cam.t_back());
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    auto& zs = rfid[j];
    std::erase_if(zs, [&](const ekf::Measurement& z) { return !in_window(z.t, analysis); });
    ekf::FilterOptions fo{analysis.q_scale, zs.size() >= 2 ? zs[1].t - zs[0].t : 0.1};
    ekf::TagFilter filter(fo);
    TagTrack track{tag_ids[j], {}};
    for (const auto& z : zs) {
      try {
        track.points.push_back(filter.push(z));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OriginSingularity && e.code() != ErrorCode::SingularInnovation) throw;
        ++run.skipped_measurements;
      }
    }
    if (!track.points.empty()) {
      t0 = std::min(t0, track.points.front().t);
      t_end = std::max(t_end, track.points.back().t);
    }
    run.tracks.push_back(std::move(track));
  }
  if (!std::isfinite(t0)) throw Error(ErrorCode::Empty, "no data inside the analysis window");

  Associator associator(options, n, n);
  std::vector<Trajectory> cam_prefix(n);
  std::vector<TagTrack> tag_prefix(n);
  for (int k = 1;; ++k) {
    const double tk = t0 + k * analysis.period;
    if (tk > t_end + 1e-9) break;
    for (std::size_t i = 0; i < n; ++i) {
      cam_prefix[i] = Trajectory{cameras[i].id, {}, cameras[i].source};
      for (const auto& p : cameras[i].points)
        if (p.t <= tk + 1e-9) cam_prefix[i].points.push_back(p);
      tag_prefix[i] = TagTrack{run.tracks[i].id, {}};
      for (const auto& p : run.tracks[i].points)
        if (p.t <= tk + 1e-9) tag_prefix[i].points.push_back(p);
    }
    run.steps.push_back(associator.step(tk, cam_prefix, tag_prefix));
  }
  run.stable_from = stable_mapping_start(run.steps, analysis.streak);

  for (auto it = run.steps.rbegin(); it != run.steps.rend(); ++it) {
    if (!it->mapping) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(it->mapping->tag_of_object[i]);
      run.overlays.push_back(align::align_pair(cameras[i], mean_path(run.tracks[j]), options.samples));
    }
    break;
  }
  return run;
}

}  // namespace fusetrack::pipeline
