// fusetrack: command-line front end for GP training, offline association,
// simulation campaigns, stereo matching and plot-data export.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fusetrack/io.hpp"
#include "fusetrack/stereo.hpp"

using namespace fusetrack;
using io::json;

namespace {

enum Exit { kOk = 0, kSchema = 2, kCount = 3, kNumerical = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::CountMismatch: return kCount;
    case ErrorCode::SingularKernel:
    case ErrorCode::OriginSingularity:
    case ErrorCode::SingularInnovation:
    case ErrorCode::NumericalFailure:
    case ErrorCode::SingularCovariance:
    case ErrorCode::SingularSigma:
    case ErrorCode::ZeroDisparity: return kNumerical;
    default: return kSchema;
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("FUSETRACK_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::SchemaError, std::string("FUSETRACK_SEED is not an unsigned integer: ") + s);
  }
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_text(path, j.dump(2) + "\n");
  }
}

struct GpTrainArgs {
  std::string input, out;
  double split = 0.8;
  double jitter = 1e-6;
  std::uint64_t seed = 1;
};

int run_gp_train(const GpTrainArgs& a) {
  io::GpTrainOptions o;
  o.split = a.split;
  o.jitter = a.jitter;
  o.seed = env_seed().value_or(a.seed);
  const auto reg = io::train_registry(io::read_gp_training(a.input), o);
  write_json(a.out, io::registry_to_json(reg));
  for (const auto& [bin, m] : reg) {
    std::cerr << "bin " << bin << ": range sigma=" << m.range.hyperparameters().length_scale
              << " angle sigma=" << m.angle.hyperparameters().length_scale << '\n';
  }
  return kOk;
}

struct AssociateArgs {
  std::string rfid, camera, registry, config, method, assign, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_min, t_max;
};

int run_associate(const AssociateArgs& a) {
  pipeline::PipelineOptions po;
  pipeline::AnalysisOptions ao;
  std::optional<io::RigidTransform> extrinsics;
  if (!a.config.empty()) {
    const json cfg = io::read_json(a.config);
    if (!cfg.is_object()) throw Error(ErrorCode::SchemaError, "associate config must be an object");
    for (const auto& [key, v] : cfg.items()) {
      try {
        if (key == "pipeline") po = io::pipeline_options_from_json(v, po);
        else if (key == "analysis_period") ao.period = v.get<double>();
        else if (key == "q_scale") ao.q_scale = v.get<double>();
        else if (key == "t_min") ao.t_min = v.get<double>();
        else if (key == "t_max") ao.t_max = v.get<double>();
        else if (key == "seed") po.seed = v.get<std::uint64_t>();
        else if (key == "extrinsics")
          extrinsics = io::RigidTransform{v.value("theta", 0.0), v.value("tx", 0.0), v.value("ty", 0.0)};
        else throw Error(ErrorCode::SchemaError, "unknown associate config key '" + key + "'");
      } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, "config." + key + ": " + e.what());
      }
    }
  }
  if (!a.method.empty()) po.method = pipeline::method_from_string(a.method);
  if (!a.assign.empty()) po.assign = assoc::assign_method_from_string(a.assign);
  if (a.seed) po.seed = *a.seed;
  if (const auto s = env_seed()) po.seed = *s;
  if (a.t_min) ao.t_min = a.t_min;
  if (a.t_max) ao.t_max = a.t_max;

  std::optional<gp::Registry> reg;
  if (!a.registry.empty()) reg = io::registry_from_json(io::read_json(a.registry));
  auto log = io::read_rfid(a.rfid, reg ? &*reg : nullptr);
  auto cams = io::read_camera(a.camera, extrinsics);
  const auto run = pipeline::analyze(std::move(cams), log.tag_ids, std::move(log.measurements), po, ao);
  const json report = io::analysis_to_json(run, po);
  write_json(a.out, report);
  std::cerr << run.steps.size() << " analysis steps, converged: " << (run.stable_from ? "yes" : "no") << '\n';
  return kOk;
}

struct SimArgs {
  std::string config, preset, out_json, out_csv, export_scenario;
  unsigned threads = 1;
  double duration = 10.0;
};

int run_sim(const SimArgs& a) {
  io::CampaignSpec spec;
  if (!a.config.empty()) {
    json j = io::read_json(a.config);
    if (!a.preset.empty()) j["preset"] = a.preset;
    spec = io::campaign_spec_from_json(j);
  } else if (!a.preset.empty()) {
    spec = io::campaign_spec_from_json({{"preset", a.preset}});
  } else {
    spec = io::campaign_spec_from_json(json::object());
  }
  if (const auto s = env_seed()) {
    for (auto& c : spec.configs) c.seed = *s;
  }

  if (!a.export_scenario.empty()) {
    const auto& cfg = spec.configs.front();
    const auto sc = sim::generate_scenario(cfg, a.duration, cfg.seed);
    const std::filesystem::path dir = a.export_scenario;
    io::write_rfid(dir / "rfid.csv", {sc.tag_ids, sc.rfid});
    io::write_camera(dir / "camera.csv", sc.cameras);
    json truth = json::object();
    for (std::size_t i = 0; i < sc.cameras.size(); ++i) {
      truth[sc.cameras[i].id] = sc.tag_ids[static_cast<std::size_t>(sc.truth_tag_of_object[i])];
    }
    io::write_text(dir / "truth.json", json{{"mapping", truth}, {"config", io::sim_config_to_json(cfg)}}.dump(2) + "\n");
    std::cerr << "scenario written to " << dir.string() << '\n';
    return kOk;
  }

  const auto report = sim::run_campaign(spec.configs, spec.methods, a.threads);
  write_json(a.out_json, io::campaign_to_json(report));
  if (!a.out_csv.empty()) io::write_text(a.out_csv, io::campaign_csv(report));
  for (const auto& g : report.summary) {
    std::cerr << "R=" << g.radius << " n=" << g.n_tags << ' ' << pipeline::to_string(g.method)
              << ": accuracy " << g.mean_accuracy << ", converged " << g.converged_fraction;
    if (g.tta_p50) std::cerr << ", tta p50 " << *g.tta_p50 << " s";
    std::cerr << '\n';
  }
  return kOk;
}

struct StereoArgs {
  std::string left, right, out_pgm, out_csv, out_depth;
  int max_disp = 16;
  int p1 = stereo::kDefaultP1;
  int p2 = stereo::kDefaultP2;
  double fx = 700.0, fy = 0.0, cx = -1.0, cy = -1.0, baseline = 0.12;
};

int run_stereo(const StereoArgs& a) {
  stereo::StereoPair pair{stereo::read_pgm(a.left), stereo::read_pgm(a.right), a.max_disp};
  pair.validate();
  const auto map = stereo::semi_global_matching(pair, a.p1, a.p2);
  if (!a.out_pgm.empty()) stereo::write_pgm(a.out_pgm, stereo::visualize(map, a.max_disp));
  if (!a.out_csv.empty()) {
    std::ostringstream out;
    for (Eigen::Index y = 0; y < map.d.rows(); ++y) {
      for (Eigen::Index x = 0; x < map.d.cols(); ++x) out << (x ? "," : "") << map.d(y, x);
      out << '\n';
    }
    io::write_text(a.out_csv, out.str());
  }
  if (!a.out_depth.empty()) {
    stereo::CameraIntrinsics intr{a.fx, a.fy > 0 ? a.fy : a.fx, a.cx >= 0 ? a.cx : (pair.left.cols() - 1) / 2.0,
                                  a.cy >= 0 ? a.cy : (pair.left.rows() - 1) / 2.0, a.baseline};
    const auto depth = stereo::depth_from_disparity(map, intr);
    std::ostringstream out;
    out.precision(17);
    for (Eigen::Index y = 0; y < depth.z.rows(); ++y) {
      for (Eigen::Index x = 0; x < depth.z.cols(); ++x) {
        out << (x ? "," : "");
        if (depth.valid(y, x)) out << depth.z(y, x);
      }
      out << '\n';
    }
    io::write_text(a.out_depth, out.str());
  }
  std::cerr << "disparity " << map.d.cols() << "x" << map.d.rows() << ", range [" << map.d.minCoeff() << ", "
            << map.d.maxCoeff() << "]\n";
  return kOk;
}

struct ExportArgs {
  std::string campaign, association, out = "plotdata";
};

int run_export(const ExportArgs& a) {
  if (a.campaign.empty() && a.association.empty()) {
    throw Error(ErrorCode::SchemaError, "export needs --campaign and/or --association");
  }
  std::vector<std::filesystem::path> files;
  if (!a.campaign.empty()) files = io::export_campaign_plotdata(io::campaign_from_json(io::read_json(a.campaign)), a.out);
  if (!a.association.empty()) {
    for (auto& f : io::export_analysis_plotdata(io::read_json(a.association), a.out)) files.push_back(f);
  }
  for (const auto& f : files) std::cout << f.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera/RFID trajectory association toolkit"};
  app.require_subcommand(1);

  GpTrainArgs gpa;
  auto* gp_cmd = app.add_subcommand("gp-train", "Fit per-bin GP range/angle models from a training CSV");
  gp_cmd->add_option("--input", gpa.input, "CSV with freq_bin,r,theta,f0,...")->required();
  gp_cmd->add_option("--split", gpa.split, "Train fraction for length-scale selection")->capture_default_str();
  gp_cmd->add_option("--jitter", gpa.jitter, "Observation noise sigma_n")->capture_default_str();
  gp_cmd->add_option("--seed", gpa.seed, "Split seed")->capture_default_str();
  gp_cmd->add_option("--out", gpa.out, "Registry JSON (stdout if omitted)");

  AssociateArgs aa;
  auto* as_cmd = app.add_subcommand("associate", "Associate logged RFID tags with camera tracks");
  as_cmd->add_option("--rfid", aa.rfid, "RFID CSV")->required();
  as_cmd->add_option("--camera", aa.camera, "Camera CSV")->required();
  as_cmd->add_option("--gp-registry", aa.registry, "GP registry JSON for feature-only rows");
  as_cmd->add_option("--config", aa.config, "JSON with pipeline/analysis options");
  as_cmd->add_option("--method", aa.method, "Similarity")->check(CLI::IsMember({"frechet", "dtw", "euclid"}));
  as_cmd->add_option("--assign", aa.assign, "Assignment")->check(CLI::IsMember({"greedy", "optimal"}));
  as_cmd->add_option("--seed", aa.seed, "Sampling seed");
  as_cmd->add_option("--t-min", aa.t_min, "Drop data before this time");
  as_cmd->add_option("--t-max", aa.t_max, "Drop data after this time");
  as_cmd->add_option("--out", aa.out, "Report JSON (stdout if omitted)");

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("sim", "Run a simulation campaign or export a scenario");
  sim_cmd->add_option("--config", sa.config, "Campaign JSON");
  sim_cmd->add_option("--preset", sa.preset, "table_r20, large_r80 or field");
  sim_cmd->add_option("--threads", sa.threads, "Worker threads")->capture_default_str();
  sim_cmd->add_option("--out", sa.out_json, "Report JSON (stdout if omitted)");
  sim_cmd->add_option("--csv", sa.out_csv, "Per-trial CSV");
  sim_cmd->add_option("--export-scenario", sa.export_scenario, "Write rfid.csv, camera.csv and truth.json here");
  sim_cmd->add_option("--duration", sa.duration, "Scenario length in seconds")->capture_default_str();

  StereoArgs st;
  auto* st_cmd = app.add_subcommand("stereo", "Semi-global matching on a rectified PGM pair");
  st_cmd->add_option("--left", st.left)->required();
  st_cmd->add_option("--right", st.right)->required();
  st_cmd->add_option("--max-disp", st.max_disp, "Number of disparities")->capture_default_str();
  st_cmd->add_option("--p1", st.p1)->capture_default_str();
  st_cmd->add_option("--p2", st.p2)->capture_default_str();
  st_cmd->add_option("--out", st.out_pgm, "Disparity PGM");
  st_cmd->add_option("--out-csv", st.out_csv, "Disparity CSV grid");
  st_cmd->add_option("--out-depth", st.out_depth, "Depth CSV grid (meters, blank where invalid)");
  st_cmd->add_option("--fx", st.fx)->capture_default_str();
  st_cmd->add_option("--fy", st.fy, "Defaults to fx");
  st_cmd->add_option("--cx", st.cx, "Defaults to the image centre");
  st_cmd->add_option("--cy", st.cy, "Defaults to the image centre");
  st_cmd->add_option("--baseline", st.baseline)->capture_default_str();

  ExportArgs ea;
  auto* ex_cmd = app.add_subcommand("export", "Write plot-ready CSVs from reports");
  ex_cmd->add_option("--campaign", ea.campaign, "Campaign report JSON");
  ex_cmd->add_option("--association", ea.association, "Association report JSON");
  ex_cmd->add_option("--out", ea.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kSchema;
  }

  try {
    if (*gp_cmd) return run_gp_train(gpa);
    if (*as_cmd) return run_associate(aa);
    if (*sim_cmd) return run_sim(sa);
    if (*st_cmd) return run_stereo(st);
    if (*ex_cmd) return run_export(ea);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  }
  return kOk;
}
