#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusetrack/align.hpp"
#include "fusetrack/assoc.hpp"
#include "fusetrack/core.hpp"
#include "fusetrack/ekf.hpp"
#include "fusetrack/similarity.hpp"

namespace fusetrack::pipeline {

enum class Method { UncertainFrechet, Dtw, Euclid };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct PipelineOptions {
  Method method = Method::UncertainFrechet;
  assoc::AssignMethod assign = assoc::AssignMethod::Greedy;
  assoc::CovarianceModel covariance = assoc::CovarianceModel::PerObject;
  int samples = align::kDefaultSamples;
  int realizations = similarity::kDefaultRealizations;
  double kappa2 = similarity::kDefaultKappa2;
  bool variance_floor = true;
  std::uint64_t seed = 0;
  /// Keep the resampled pair geometry of each step (for trajectory overlays).
  bool keep_aligned = false;
};

/// Filtered RFID track of one tag: EKF posteriors in the Cartesian frame.
struct TagTrack {
  std::string id;
  std::vector<ekf::FilteredPoint> points;
};

/// Mean path and per-point covariance of a tag track resampled onto `grid`.
similarity::UncertainTrajectory uncertain_track(const TagTrack& tag, const align::Interval& interval, int n,
                                                double kappa2);

struct StepResult {
  double t = 0.0;
  int step = 0;
  /// Pairwise scores (rows objects, columns tags); empty until every pair is scorable.
  std::optional<assoc::CostMatrix> costs;
  std::optional<assoc::AssociationResult> mapping;
  /// Latest (d_min, d_max) per pair for the uncertain-Frechet method.
  std::vector<std::vector<std::optional<similarity::FrechetBounds>>> bounds;
  /// Resampled pairs, filled when keep_aligned is set.
  std::vector<std::vector<std::optional<align::AlignedPair>>> aligned;
};

/// Re-evaluates every object/tag pair on the full history so far and
/// assigns tags to objects. One instance per scenario; accumulates the
/// per-pair (d_min, d_max) statistics across steps.
class Associator {
 public:
  Associator(PipelineOptions options, std::size_t n_objects, std::size_t n_tags);

  StepResult step(double t, std::span<const Trajectory> cameras, std::span<const TagTrack> tags);

  const PipelineOptions& options() const noexcept { return options_; }
  const std::vector<std::vector<assoc::PairStats>>& stats() const noexcept { return stats_; }
  int steps_taken() const noexcept { return step_; }

 private:
  PipelineOptions options_;
  std::size_t n_;
  int step_ = 0;
  std::vector<std::vector<assoc::PairStats>> stats_;
};

struct AnalysisOptions {
  double period = 1.0;
  double q_scale = ekf::kDefaultQScale;
  /// Data outside [t_min, t_max] is dropped before filtering.
  std::optional<double> t_min;
  std::optional<double> t_max;
  int streak = 3;
};

struct AnalysisRun {
  std::vector<std::string> object_ids;
  std::vector<std::string> tag_ids;
  std::vector<TagTrack> tracks;
  std::vector<StepResult> steps;
  /// First step of the first run of `streak` identical mappings.
  std::optional<std::size_t> stable_from;
  /// Measurements rejected by the filter (on top of the reader, singular innovation).
  std::size_t skipped_measurements = 0;
  /// Final-step mapping resampled onto the common grid, one entry per object.
  std::vector<align::AlignedPair> overlays;
};

/// Offline association of logged data: filters every tag, then re-evaluates
/// all pairs every `period` seconds from the earliest sample onward.
/// Throws CountMismatch when the numbers of tags and tracks differ.
AnalysisRun analyze(std::vector<Trajectory> cameras, std::vector<std::string> tag_ids,
                    std::vector<std::vector<ekf::Measurement>> rfid, const PipelineOptions& options,
                    const AnalysisOptions& analysis = {});

/// Index of the first step from which the mapping stayed identical for
/// `streak` consecutive steps, if any.
std::optional<std::size_t> stable_mapping_start(std::span<const StepResult> steps, int streak = 3);

}  // namespace fusetrack::pipeline
