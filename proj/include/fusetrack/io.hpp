#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusetrack/core.hpp"
#include "fusetrack/ekf.hpp"
#include "fusetrack/gp.hpp"
#include "fusetrack/pipeline.hpp"
#include "fusetrack/sim.hpp"

namespace fusetrack::io {

using json = nlohmann::json;

inline constexpr double kMinReportedVariance = 1e-9;

// ---- CSV logs ---------------------------------------------------------------

/// Per-tag RFID measurement sequences, tags ordered by id.
struct RfidLog {
  std::vector<std::string> tag_ids;
  std::vector<std::vector<ekf::Measurement>> measurements;
};

/// Header: t,tag_id,freq_bin,r,theta,var_r,var_theta[,f0,f1,...]
/// A row carries either all four estimates or none; rows without estimates
/// are mapped through the bin's GP models (features f0.. as input, predictive
/// variance as the reported variance). Without a registry such rows are a
/// SchemaError. Rows are sorted by time per tag; repeated timestamps raise
/// NonMonotoneTime.
RfidLog read_rfid(const std::filesystem::path& path, const gp::Registry* registry = nullptr);
RfidLog parse_rfid(const std::string& text, const gp::Registry* registry = nullptr);
void write_rfid(const std::filesystem::path& path, const RfidLog& log);

/// 2-D rigid transform p' = R(theta) p + t from the camera to the reader frame.
struct RigidTransform {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
};

/// Header: t,track_id,x,y[,frame] with frame in {cartesian, polar}. One
/// Cartesian trajectory per track id (ordered by id). Duplicate (t, track_id)
/// rows are a SchemaError; a track mixing frames raises MixedFrames.
std::vector<Trajectory> read_camera(const std::filesystem::path& path,
                                    const std::optional<RigidTransform>& extrinsics = std::nullopt);
std::vector<Trajectory> parse_camera(const std::string& text,
                                     const std::optional<RigidTransform>& extrinsics = std::nullopt);
void write_camera(const std::filesystem::path& path, const std::vector<Trajectory>& tracks);

/// Header: freq_bin,r,theta,f0[,f1,...]
struct GpTrainingBin {
  gp::GpModel::Matrix features;
  gp::GpModel::Vector range;
  gp::GpModel::Vector angle;
};
std::map<std::string, GpTrainingBin> read_gp_training(const std::filesystem::path& path);

struct GpTrainOptions {
  double split = 0.8;
  double jitter = 1e-6;
  std::vector<double> grid = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::uint64_t seed = 1;
};

/// Length scale per bin and output by held-out RMSE, then a fit on all samples.
gp::Registry train_registry(const std::map<std::string, GpTrainingBin>& data, const GpTrainOptions& options);

// ---- JSON ------------------------------------------------------------------

json registry_to_json(const gp::Registry& registry);
gp::Registry registry_from_json(const json& j);

/// Overlays the keys present in `j` onto `base`. Unknown keys are a SchemaError.
sim::SimConfig sim_config_from_json(const json& j, sim::SimConfig base = {});
json sim_config_to_json(const sim::SimConfig& cfg);
pipeline::PipelineOptions pipeline_options_from_json(const json& j, pipeline::PipelineOptions base = {});

/// Named scenario sets: "table_r20", "large_r80", "field".
std::vector<sim::SimConfig> preset(const std::string& name);

struct CampaignSpec {
  std::vector<sim::SimConfig> configs;
  std::vector<pipeline::Method> methods = {pipeline::Method::UncertainFrechet};
};

/// {"methods": [...], "preset": name, "base": {...}, "configs": [{...}, ...]}.
/// Each entry of "configs" overlays "base"; a preset supplies the list instead.
CampaignSpec campaign_spec_from_json(const json& j);

json campaign_to_json(const sim::CampaignReport& report);
sim::CampaignReport campaign_from_json(const json& j);
/// One row per (trial, method).
std::string campaign_csv(const sim::CampaignReport& report);

json analysis_to_json(const pipeline::AnalysisRun& run, const pipeline::PipelineOptions& options);

// ---- plot data ---------------------------------------------------------------

/// accuracy_vs_density.csv (one row per summary group) and
/// tta_histogram.csv (one row per non-empty 1 s bin of converged trials).
std::vector<std::filesystem::path> export_campaign_plotdata(const sim::CampaignReport& report,
                                                            const std::filesystem::path& dir);

/// overlays.csv (n resampled points per object/tag pair) and
/// generalized_variance.csv (det of the tag position covariance over time).
std::vector<std::filesystem::path> export_analysis_plotdata(const json& analysis, const std::filesystem::path& dir);

json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fusetrack::io
