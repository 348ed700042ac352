#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/pipeline.hpp"

namespace fusetrack::sim {

inline constexpr double kMaxSimTime = 3600.0;

/// Testbed radii (m) and occupancy densities (persons/m^2) of the tag-count table.
inline constexpr double kTableRadii[] = {20, 30, 40, 50, 60, 70, 80};
inline constexpr double kTableDensities[] = {8.0e-4, 15.9e-4, 23.9e-4, 31.8e-4, 39.8e-4};

/// Maximum tag count for a (radius, density) grid cell. Throws OutOfGrid.
int table_lookup(double radius, double density);

enum class Region {
  Disk,         ///< disk of radius R centred on the reader
  FieldSector,  ///< camera/RFID overlap: 1..10 m range, +/-30 deg bearing (~52 m^2)
};

std::string to_string(Region r);
Region region_from_string(const std::string& s);

struct SimConfig {
  double radius = 20.0;
  int n_tags = 1;
  /// Persons per m^2; informational unless table_mode is set.
  double density = 0.0;
  bool table_mode = false;
  int trial_count = 1;
  double camera_noise_sigma = 0.02;
  double rfid_range_sigma = 1.0;
  double rfid_angle_sigma = 3.0 * kPi / 180.0;
  double max_sim_time = 120.0;
  std::uint64_t seed = 1;
  double speed_min = 0.5;
  double speed_max = 1.5;

  int camera_rate = 30;  // Hz; also the truth integration rate
  int rfid_rate = 10;    // Hz; must divide camera_rate
  double analysis_period = 1.0;
  double q_scale = ekf::kDefaultQScale;

  Region region = Region::Disk;
  bool fov = false;
  double rfid_max_range = 20.0;
  double rfid_half_angle = 30.0 * kPi / 180.0;
  double camera_max_range = 10.0;

  pipeline::PipelineOptions pipeline;

  /// Validates and fills derived fields (table-mode tag count). Throws on misuse.
  void finalize();
  double area() const;
};

struct Agent {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d waypoint = Eigen::Vector2d::Zero();
  double speed = 1.0;
};

struct World {
  std::vector<Agent> agents;
};

/// Uniform point in the configured region.
Eigen::Vector2d sample_region(const SimConfig& cfg, std::mt19937_64& rng);
bool in_region(const SimConfig& cfg, const Eigen::Vector2d& p, double tol = 1e-9);

World spawn(const SimConfig& cfg, std::mt19937_64& rng);

/// Moves every agent toward its waypoint at its speed. An agent already on
/// its waypoint draws a new one (and a new speed) and does not move this step.
void step_agents(World& world, const SimConfig& cfg, double dt, std::mt19937_64& rng);

struct CameraFix {
  std::size_t agent = 0;
  Eigen::Vector2d position;
};

struct Readings {
  std::vector<CameraFix> camera;
  std::vector<std::pair<std::size_t, ekf::Measurement>> rfid;
};

/// Synthetic sensing at time t: isotropic Gaussian camera noise and polar
/// Gaussian RFID noise with the configured variances reported alongside.
Readings sense(const World& world, double t, const SimConfig& cfg, bool rfid_tick, std::mt19937_64& camera_rng,
               std::mt19937_64& rfid_rng);

struct MethodOutcome {
  pipeline::Method method = pipeline::Method::UncertainFrechet;
  bool converged = false;
  double time_to_association = 0.0;
  double final_accuracy = 0.0;
  int steps = 0;
};

struct TrialResult {
  bool converged = false;
  double time_to_association = 0.0;
  double final_accuracy = 0.0;
  std::vector<MethodOutcome> per_method;
};

/// Camera tracks, RFID logs and ground truth of one simulated scenario.
struct Scenario {
  std::vector<Trajectory> cameras;
  std::vector<std::string> tag_ids;
  std::vector<std::vector<ekf::Measurement>> rfid;
  /// truth_tag_of_object[i] = tag carried by camera object i.
  std::vector<int> truth_tag_of_object;
};

/// Simulates the world for `duration` seconds and records sensor logs only.
Scenario generate_scenario(const SimConfig& cfg, double duration, std::uint64_t seed);

/// One trial: all requested methods see the same simulated world. Each
/// method converges on its third consecutive fully correct mapping or stops
/// at max_sim_time. The top-level fields mirror the first method.
TrialResult run_trial(const SimConfig& cfg, const std::vector<pipeline::Method>& methods, std::uint64_t seed);
TrialResult run_trial(const SimConfig& cfg, pipeline::Method method, std::uint64_t seed);

struct TrialRecord {
  std::size_t config_index = 0;
  int trial = 0;
  double radius = 0.0;
  double density = 0.0;
  int n_tags = 0;
  MethodOutcome outcome;
};

struct GroupSummary {
  std::size_t config_index = 0;
  double radius = 0.0;
  double density = 0.0;
  int n_tags = 0;
  pipeline::Method method = pipeline::Method::UncertainFrechet;
  int trials = 0;
  double mean_accuracy = 0.0;
  double accuracy_p05 = 0.0;
  double accuracy_p50 = 0.0;
  double converged_fraction = 0.0;
  /// Time-to-association percentiles over converged trials (nullopt if none).
  std::optional<double> tta_p50;
  std::optional<double> tta_p95;
  std::optional<double> tta_max;
};

struct CampaignReport {
  std::uint64_t seed = 0;
  std::vector<TrialRecord> trials;
  std::vector<GroupSummary> summary;
};

/// Linear-interpolated percentile of an unsorted sample, q in [0, 1].
double percentile(std::vector<double> values, double q);

std::vector<GroupSummary> summarize(const std::vector<TrialRecord>& trials,
                                    const std::vector<pipeline::Method>& methods);

/// Runs trial_count trials of every config. Trial k of config c uses seed
/// mix_seed(config.seed, k); the report is independent of `threads`.
CampaignReport run_campaign(std::vector<SimConfig> cfgs, const std::vector<pipeline::Method>& methods,
                            unsigned threads = 1);

}  // namespace fusetrack::sim
