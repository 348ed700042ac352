#include "fusetrack/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace fusetrack::sim {

namespace {

constexpr int kTable[7][5] = {
    {1, 2, 3, 4, 5},       {3, 5, 7, 9, 12},      {4, 8, 12, 16, 20},    {7, 13, 19, 25, 32},
    {9, 18, 27, 36, 45},   {13, 25, 37, 49, 62},  {16, 32, 48, 64, 80},
};

constexpr double kSectorInner = 1.0;
constexpr double kSectorOuter = 10.0;
constexpr double kSectorHalfAngle = 30.0 * kPi / 180.0;
constexpr double kArrivalTolerance = 1e-9;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

// Box-Muller on the portable uniform so draws are identical across standard libraries.
double normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::vector<int> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(p[i - 1], p[std::min(j, i - 1)]);
  }
  return p;
}

bool camera_sees(const SimConfig& cfg, const Eigen::Vector2d& p) {
  return !cfg.fov || p.norm() <= cfg.camera_max_range;
}

bool rfid_sees(const SimConfig& cfg, const Eigen::Vector2d& p) {
  if (!cfg.fov) return true;
  return p.norm() <= cfg.rfid_max_range && std::abs(std::atan2(p.y(), p.x())) <= cfg.rfid_half_angle;
}

}  // namespace

int table_lookup(double radius, double density) {
  for (int i = 0; i < 7; ++i) {
    if (std::abs(radius - kTableRadii[i]) > 1e-9) continue;
    for (int j = 0; j < 5; ++j) {
      if (std::abs(density - kTableDensities[j]) <= 1e-3 * kTableDensities[j]) return kTable[i][j];
    }
  }
  throw Error(ErrorCode::OutOfGrid, "no table entry for R=" + std::to_string(radius) +
                                        " density=" + std::to_string(density));
}

std::string to_string(Region r) { return r == Region::Disk ? "disk" : "field_sector"; }

Region region_from_string(const std::string& s) {
  if (s == "disk") return Region::Disk;
  if (s == "field_sector" || s == "field") return Region::FieldSector;
  throw Error(ErrorCode::SchemaError, "unknown region '" + s + "'");
}

void SimConfig::finalize() {
  if (table_mode) n_tags = table_lookup(radius, density);
  if (n_tags < 1) throw Error(ErrorCode::ContractViolation, "n_tags must be positive");
  if (trial_count < 1) throw Error(ErrorCode::ContractViolation, "trial_count must be positive");
  if (!(max_sim_time > 0.0) || max_sim_time > kMaxSimTime) {
    throw Error(ErrorCode::ContractViolation, "max_sim_time must lie in (0, 3600] s");
  }
  if (camera_rate < 1 || rfid_rate < 1 || camera_rate % rfid_rate != 0) {
    throw Error(ErrorCode::ContractViolation, "rfid_rate must divide camera_rate");
  }
  if (!(analysis_period > 0.0)) throw Error(ErrorCode::ContractViolation, "analysis_period must be positive");
  if (!(speed_min > 0.0) || speed_max < speed_min) throw Error(ErrorCode::ContractViolation, "bad speed range");
  if (region == Region::Disk && !(radius > 0.0)) throw Error(ErrorCode::ContractViolation, "radius must be positive");
  if (density <= 0.0) density = n_tags / area();
}

double SimConfig::area() const {
  if (region == Region::Disk) return kPi * radius * radius;
  return kSectorHalfAngle * (kSectorOuter * kSectorOuter - kSectorInner * kSectorInner);
}

Eigen::Vector2d sample_region(const SimConfig& cfg, std::mt19937_64& rng) {
  if (cfg.region == Region::Disk) {
    const double r = cfg.radius * std::sqrt(unit_uniform(rng));
    const double a = uniform(rng, -kPi, kPi);
    return {r * std::cos(a), r * std::sin(a)};
  }
  const double r2 = uniform(rng, kSectorInner * kSectorInner, kSectorOuter * kSectorOuter);
  const double a = uniform(rng, -kSectorHalfAngle, kSectorHalfAngle);
  return {std::sqrt(r2) * std::cos(a), std::sqrt(r2) * std::sin(a)};
}

bool in_region(const SimConfig& cfg, const Eigen::Vector2d& p, double tol) {
  if (cfg.region == Region::Disk) return p.norm() <= cfg.radius + tol;
  // Straight legs between sector waypoints stay in the convex +/-30 deg cone
  // but may cut inside the 1 m inner arc, so only the cone and outer arc are hard bounds.
  return p.norm() <= kSectorOuter + tol && std::abs(std::atan2(p.y(), p.x())) <= kSectorHalfAngle + tol;
}

World spawn(const SimConfig& cfg, std::mt19937_64& rng) {
  World w;
  w.agents.resize(static_cast<std::size_t>(cfg.n_tags));
  for (auto& a : w.agents) {
    a.position = sample_region(cfg, rng);
    a.waypoint = sample_region(cfg, rng);
    a.speed = uniform(rng, cfg.speed_min, cfg.speed_max);
  }
  return w;
}

void step_agents(World& world, const SimConfig& cfg, double dt, std::mt19937_64& rng) {
  for (auto& a : world.agents) {
    const Eigen::Vector2d to_go = a.waypoint - a.position;
    const double dist = to_go.norm();
    if (dist <= kArrivalTolerance) {
      a.waypoint = sample_region(cfg, rng);
      a.speed = uniform(rng, cfg.speed_min, cfg.speed_max);
      continue;
    }
    const double stride = a.speed * dt;
    a.position = stride >= dist ? a.waypoint : Eigen::Vector2d(a.position + to_go * (stride / dist));
  }
}

Readings sense(const World& world, double t, const SimConfig& cfg, bool rfid_tick, std::mt19937_64& camera_rng,
               std::mt19937_64& rfid_rng) {
  Readings out;
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    const Eigen::Vector2d& p = world.agents[i].position;
    // Noise is drawn whether or not the sensor sees the agent so streams stay aligned.
    const Eigen::Vector2d cam_noise(normal(camera_rng), normal(camera_rng));
    if (camera_sees(cfg, p)) out.camera.push_back({i, p + cfg.camera_noise_sigma * cam_noise});
    if (!rfid_tick) continue;
    const double nr = normal(rfid_rng), nth = normal(rfid_rng);
    if (!rfid_sees(cfg, p)) continue;
    double r = p.norm() + cfg.rfid_range_sigma * nr;
    double th = std::atan2(p.y(), p.x()) + cfg.rfid_angle_sigma * nth;
    if (r < 0.0) {
      r = -r;
      th += kPi;
    }
    ekf::Measurement z;
    z.t = t;
    z.r = r;
    z.theta = wrap_angle(th);
    z.var_r = std::max(cfg.rfid_range_sigma * cfg.rfid_range_sigma, 1e-10);
    z.var_theta = std::max(cfg.rfid_angle_sigma * cfg.rfid_angle_sigma, 1e-10);
    out.rfid.emplace_back(i, z);
  }
  return out;
}

namespace {

// Per-trial simulation state shared by scenario export and trial evaluation.
class Simulation {
 public:
  Simulation(const SimConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        motion_rng_(mix_seed(seed, 1)),
        camera_rng_(mix_seed(seed, 2)),
        rfid_rng_(mix_seed(seed, 3)) {
    cfg_.finalize();
    std::mt19937_64 label_rng(mix_seed(seed, 4));
    world_ = spawn(cfg_, motion_rng_);
    const std::size_t n = world_.agents.size();
    // Agent k is camera object object_of_agent[k] and carries tag tag_of_agent[k].
    object_of_agent_ = random_permutation(n, label_rng);
    tag_of_agent_ = random_permutation(n, label_rng);
    truth_tag_of_object_.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) truth_tag_of_object_[object_of_agent_[k]] = tag_of_agent_[k];
    cameras_.resize(n);
    tags_.resize(n);
    rfid_log_.resize(n);
    filters_.assign(n, ekf::TagFilter({cfg_.q_scale, 1.0 / cfg_.rfid_rate}));
    for (std::size_t i = 0; i < n; ++i) {
      cameras_[i] = Trajectory{"obj" + std::to_string(i), {}, Source::Camera};
      tags_[i].id = "tag" + std::to_string(i);
    }
    rfid_every_ = cfg_.camera_rate / cfg_.rfid_rate;
  }

  /// Advances one truth tick (1 / camera_rate seconds).
  void tick() {
    ++tick_;
    const double dt = 1.0 / cfg_.camera_rate;
    step_agents(world_, cfg_, dt, motion_rng_);
    const double t = tick_ * dt;
    const bool rfid_tick = tick_ % rfid_every_ == 0;
    const Readings rd = sense(world_, t, cfg_, rfid_tick, camera_rng_, rfid_rng_);
    for (const auto& fix : rd.camera) {
      cameras_[object_of_agent_[fix.agent]].points.push_back(TimedPoint::cartesian(t, fix.position.x(), fix.position.y()));
    }
    for (const auto& [agent, z] : rd.rfid) {
      const auto tag = static_cast<std::size_t>(tag_of_agent_[agent]);
      rfid_log_[tag].push_back(z);
      try {
        tags_[tag].points.push_back(filters_[tag].push(z));
      } catch (const Error& e) {
        // A measurement on top of the reader is unusable; the filter keeps its prior.
        if (e.code() != ErrorCode::OriginSingularity && e.code() != ErrorCode::SingularInnovation) throw;
      }
    }
  }

  double time() const { return tick_ / static_cast<double>(cfg_.camera_rate); }
  const SimConfig& config() const { return cfg_; }
  const std::vector<Trajectory>& cameras() const { return cameras_; }
  const std::vector<pipeline::TagTrack>& tags() const { return tags_; }
  const std::vector<std::vector<ekf::Measurement>>& rfid_log() const { return rfid_log_; }
  const std::vector<int>& truth() const { return truth_tag_of_object_; }

 private:
  SimConfig cfg_;
  std::mt19937_64 motion_rng_, camera_rng_, rfid_rng_;
  World world_;
  std::vector<int> object_of_agent_, tag_of_agent_, truth_tag_of_object_;
  std::vector<Trajectory> cameras_;
  std::vector<pipeline::TagTrack> tags_;
  std::vector<std::vector<ekf::Measurement>> rfid_log_;
  std::vector<ekf::TagFilter> filters_;
  long tick_ = 0;
  int rfid_every_ = 1;
};

double mapping_accuracy(const std::optional<assoc::AssociationResult>& mapping, const std::vector<int>& truth) {
  if (!mapping) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += mapping->tag_of_object[i] == truth[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

}  // namespace

Scenario generate_scenario(const SimConfig& cfg, double duration, std::uint64_t seed) {
  Simulation s(cfg, seed);
  while (s.time() < duration - 1e-9) s.tick();
  Scenario sc;
  sc.cameras = s.cameras();
  for (const auto& t : s.tags()) sc.tag_ids.push_back(t.id);
  sc.rfid = s.rfid_log();
  sc.truth_tag_of_object = s.truth();
  return sc;
}

TrialResult run_trial(const SimConfig& cfg_in, const std::vector<pipeline::Method>& methods, std::uint64_t seed) {
  if (methods.empty()) throw Error(ErrorCode::ContractViolation, "run_trial needs at least one method");
  Simulation sim(cfg_in, seed);
  const SimConfig& cfg = sim.config();
  const std::size_t n = static_cast<std::size_t>(cfg.n_tags);

  struct Lane {
    pipeline::Associator associator;
    MethodOutcome outcome;
    int streak = 0;
    double last_accuracy = 0.0;
    bool done = false;
  };
  std::vector<Lane> lanes;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    pipeline::PipelineOptions po = cfg.pipeline;
    po.method = methods[k];
    po.keep_aligned = false;
    po.seed = mix_seed(seed, 100 + static_cast<std::uint64_t>(methods[k]));
    lanes.push_back({pipeline::Associator(po, n, n), MethodOutcome{methods[k]}, 0, 0.0, false});
  }

  const long ticks_per_analysis = std::max(1L, std::lround(cfg.analysis_period * cfg.camera_rate));
  const long max_ticks = std::lround(cfg.max_sim_time * cfg.camera_rate);
  for (long tick = 1; tick <= max_ticks; ++tick) {
    sim.tick();
    if (tick % ticks_per_analysis != 0) continue;
    bool all_done = true;
    for (auto& lane : lanes) {
      if (lane.done) continue;
      const auto res = lane.associator.step(sim.time(), sim.cameras(), sim.tags());
      ++lane.outcome.steps;
      lane.last_accuracy = mapping_accuracy(res.mapping, sim.truth());
      lane.streak = lane.last_accuracy == 1.0 ? lane.streak + 1 : 0;
      if (lane.streak >= 3) {
        lane.done = true;
        lane.outcome.converged = true;
        lane.outcome.time_to_association = sim.time();
        lane.outcome.final_accuracy = 1.0;
      }
      all_done = all_done && lane.done;
    }
    if (all_done) break;
  }

  TrialResult out;
  for (auto& lane : lanes) {
    if (!lane.done) {
      lane.outcome.converged = false;
      lane.outcome.time_to_association = cfg.max_sim_time;
      lane.outcome.final_accuracy = lane.last_accuracy;
    }
    out.per_method.push_back(lane.outcome);
  }
  out.converged = out.per_method.front().converged;
  out.time_to_association = out.per_method.front().time_to_association;
  out.final_accuracy = out.per_method.front().final_accuracy;
  return out;
}

TrialResult run_trial(const SimConfig& cfg, pipeline::Method method, std::uint64_t seed) {
  return run_trial(cfg, std::vector<pipeline::Method>{method}, seed);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::Empty, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<GroupSummary> summarize(const std::vector<TrialRecord>& trials,
                                    const std::vector<pipeline::Method>& methods) {
  std::size_t n_configs = 0;
  for (const auto& t : trials) n_configs = std::max(n_configs, t.config_index + 1);
  std::vector<GroupSummary> out;
  for (std::size_t c = 0; c < n_configs; ++c) {
    for (const auto m : methods) {
      GroupSummary g;
      g.config_index = c;
      g.method = m;
      std::vector<double> acc, tta;
      double acc_sum = 0.0;
      for (const auto& t : trials) {
        if (t.config_index != c || t.outcome.method != m) continue;
        g.radius = t.radius;
        g.density = t.density;
        g.n_tags = t.n_tags;
        acc.push_back(t.outcome.final_accuracy);
        if (t.outcome.converged) tta.push_back(t.outcome.time_to_association);
      }
      if (acc.empty()) continue;
      // Sort before summing so the mean does not depend on trial order.
      std::sort(acc.begin(), acc.end());
      for (double a : acc) acc_sum += a;
      g.trials = static_cast<int>(acc.size());
      g.mean_accuracy = acc_sum / static_cast<double>(acc.size());
      g.accuracy_p05 = percentile(acc, 0.05);
      g.accuracy_p50 = percentile(acc, 0.5);
      g.converged_fraction = static_cast<double>(tta.size()) / static_cast<double>(acc.size());
      if (!tta.empty()) {
        g.tta_p50 = percentile(tta, 0.5);
        g.tta_p95 = percentile(tta, 0.95);
        g.tta_max = *std::max_element(tta.begin(), tta.end());
      }
      out.push_back(g);
    }
  }
  return out;
}

CampaignReport run_campaign(std::vector<SimConfig> cfgs, const std::vector<pipeline::Method>& methods,
                            unsigned threads) {
  for (auto& c : cfgs) c.finalize();
  struct Task {
    std::size_t config;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cfgs.size(); ++c)
    for (int k = 0; k < cfgs[c].trial_count; ++k) tasks.push_back({c, k});

  std::vector<TrialResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& task = tasks[i];
      const auto& cfg = cfgs[task.config];
      results[i] = run_trial(cfg, methods, mix_seed(cfg.seed, static_cast<std::uint64_t>(task.trial)));
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < std::min<std::size_t>(threads, tasks.size()); ++k) pool.emplace_back(worker);
  }

  CampaignReport report;
  report.seed = cfgs.empty() ? 0 : cfgs.front().seed;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& cfg = cfgs[tasks[i].config];
    for (const auto& o : results[i].per_method) {
      report.trials.push_back({tasks[i].config, tasks[i].trial, cfg.radius, cfg.density, cfg.n_tags, o});
    }
  }
  report.summary = summarize(report.trials, methods);
  return report;
}

}  // namespace fusetrack::sim
