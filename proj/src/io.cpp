#include "fusetrack/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fusetrack::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? comma : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void schema(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    schema(line, "column '" + column + "': expected a finite number, got '" + s + "'");
  }
  return v;
}

/// A parsed CSV table: column index by name plus numbered data rows.
struct Table {
  std::map<std::string, std::size_t> columns;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  std::optional<std::size_t> find(const std::string& name) const {
    const auto it = columns.find(name);
    return it == columns.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }
  std::size_t require(const std::string& name) const {
    const auto c = find(name);
    if (!c) schema(1, "missing required column '" + name + "'");
    return *c;
  }
};

Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      t.header = cells;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!t.columns.emplace(cells[i], i).second) schema(no, "duplicate column '" + cells[i] + "'");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      schema(no, "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    t.rows.emplace_back(no, std::move(cells));
  }
  if (!have_header) throw Error(ErrorCode::SchemaError, "empty file: no header row");
  return t;
}

/// Columns f0, f1, ... in index order.
std::vector<std::size_t> feature_columns(const Table& t) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0;; ++k) {
    const auto c = t.find("f" + std::to_string(k));
    if (!c) break;
    out.push_back(*c);
  }
  return out;
}

}  // namespace

RfidLog parse_rfid(const std::string& text, const gp::Registry* registry) {
  const Table t = parse_table(text);
  const std::size_t c_t = t.require("t"), c_id = t.require("tag_id");
  const auto c_bin = t.find("freq_bin");
  const std::array<std::optional<std::size_t>, 4> c_est{t.find("r"), t.find("theta"), t.find("var_r"),
                                                        t.find("var_theta")};
  const auto c_feat = feature_columns(t);

  std::map<std::string, std::vector<std::pair<std::size_t, ekf::Measurement>>> by_tag;
  for (const auto& [no, cells] : t.rows) {
    ekf::Measurement z;
    z.t = parse_double(cells[c_t], no, "t");
    const std::string& id = cells[c_id];
    if (id.empty()) schema(no, "empty tag_id");
    int present = 0;
    for (const auto& c : c_est) present += c && !cells[*c].empty();
    if (present == 4) {
      z.r = parse_double(cells[*c_est[0]], no, "r");
      z.theta = parse_double(cells[*c_est[1]], no, "theta");
      z.var_r = parse_double(cells[*c_est[2]], no, "var_r");
      z.var_theta = parse_double(cells[*c_est[3]], no, "var_theta");
      if (z.var_r < 0 || z.var_theta < 0) schema(no, "variances must be nonnegative");
    } else if (present == 0) {
      if (!registry) schema(no, "no range/angle estimates and no GP registry to derive them");
      if (c_feat.empty()) schema(no, "no range/angle estimates and no feature columns");
      if (!c_bin) schema(no, "feature rows need a freq_bin column");
      const auto it = registry->find(cells[*c_bin]);
      if (it == registry->end()) schema(no, "no GP models for frequency bin '" + cells[*c_bin] + "'");
      const auto& models = it->second;
      if (models.range.input_dim() != static_cast<Eigen::Index>(c_feat.size())) {
        schema(no, "feature count " + std::to_string(c_feat.size()) + " does not match the bin's model input size " +
                       std::to_string(models.range.input_dim()));
      }
      Eigen::RowVectorXd x(static_cast<Eigen::Index>(c_feat.size()));
      for (std::size_t k = 0; k < c_feat.size(); ++k) {
        x(static_cast<Eigen::Index>(k)) = parse_double(cells[c_feat[k]], no, "f" + std::to_string(k));
      }
      z.r = models.range.predict_mean(x);
      z.theta = models.angle.predict_mean(x);
      z.var_r = models.range.predict_variance(x);
      z.var_theta = models.angle.predict_variance(x);
    } else {
      schema(no, "partial estimates: give all of r, theta, var_r, var_theta or none");
    }
    z.var_r = std::max(z.var_r, kMinReportedVariance);
    z.var_theta = std::max(z.var_theta, kMinReportedVariance);
    by_tag[id].emplace_back(no, z);
  }

  RfidLog log;
  for (auto& [id, rows] : by_tag) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second.t < b.second.t; });
    std::vector<ekf::Measurement> zs;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k > 0 && !(rows[k].second.t > rows[k - 1].second.t)) {
        throw Error(ErrorCode::NonMonotoneTime, "tag '" + id + "': repeated timestamp " + fmt(rows[k].second.t) +
                                                    " (line " + std::to_string(rows[k].first) + ")");
      }
      zs.push_back(rows[k].second);
    }
    log.tag_ids.push_back(id);
    log.measurements.push_back(std::move(zs));
  }
  return log;
}

RfidLog read_rfid(const std::filesystem::path& path, const gp::Registry* registry) {
  return parse_rfid(slurp(path), registry);
}

void write_rfid(const std::filesystem::path& path, const RfidLog& log) {
  std::ostringstream out;
  out << "t,tag_id,freq_bin,r,theta,var_r,var_theta\n";
  for (std::size_t j = 0; j < log.tag_ids.size(); ++j) {
    for (const auto& z : log.measurements[j]) {
      out << fmt(z.t) << ',' << log.tag_ids[j] << ",," << fmt(z.r) << ',' << fmt(z.theta) << ',' << fmt(z.var_r)
          << ',' << fmt(z.var_theta) << '\n';
    }
  }
  write_text(path, out.str());
}

Eigen::Vector2d RigidTransform::apply(const Eigen::Vector2d& p) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty};
}

std::vector<Trajectory> parse_camera(const std::string& text, const std::optional<RigidTransform>& extrinsics) {
  const Table t = parse_table(text);
  const std::size_t c_t = t.require("t"), c_id = t.require("track_id"), c_x = t.require("x"), c_y = t.require("y");
  const auto c_frame = t.find("frame");
  std::map<std::string, Trajectory> tracks;
  std::set<std::pair<std::string, double>> seen;
  for (const auto& [no, cells] : t.rows) {
    const double tt = parse_double(cells[c_t], no, "t");
    const std::string& id = cells[c_id];
    if (id.empty()) schema(no, "empty track_id");
    if (!seen.emplace(id, tt).second) schema(no, "duplicate row for track '" + id + "' at t=" + cells[c_t]);
    Frame frame = Frame::Cartesian;
    if (c_frame && !cells[*c_frame].empty()) {
      if (cells[*c_frame] == "polar") {
        frame = Frame::Polar;
      } else if (cells[*c_frame] != "cartesian") {
        schema(no, "frame must be 'cartesian' or 'polar'");
      }
    }
    auto& tr = tracks[id];
    tr.id = id;
    tr.source = Source::Camera;
    if (!tr.points.empty() && tr.points.front().frame != frame) {
      throw Error(ErrorCode::MixedFrames, "track '" + id + "' mixes frames (line " + std::to_string(no) + ")");
    }
    tr.points.push_back({tt, {parse_double(cells[c_x], no, "x"), parse_double(cells[c_y], no, "y")}, frame});
  }
  std::vector<Trajectory> out;
  for (auto& [id, tr] : tracks) {
    std::stable_sort(tr.points.begin(), tr.points.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    Trajectory c = to_cartesian(tr);
    if (extrinsics) {
      for (auto& p : c.points) p.coords = extrinsics->apply(p.coords);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Trajectory> read_camera(const std::filesystem::path& path, const std::optional<RigidTransform>& extrinsics) {
  return parse_camera(slurp(path), extrinsics);
}

void write_camera(const std::filesystem::path& path, const std::vector<Trajectory>& tracks) {
  std::ostringstream out;
  out << "t,track_id,x,y\n";
  for (const auto& tr : tracks) {
    const Trajectory c = to_cartesian(tr);
    for (const auto& p : c.points) out << fmt(p.t) << ',' << c.id << ',' << fmt(p.coords.x()) << ',' << fmt(p.coords.y()) << '\n';
  }
  write_text(path, out.str());
}

std::map<std::string, GpTrainingBin> read_gp_training(const std::filesystem::path& path) {
  const Table t = parse_table(slurp(path));
  const std::size_t c_bin = t.require("freq_bin"), c_r = t.require("r"), c_th = t.require("theta");
  const auto c_feat = feature_columns(t);
  if (c_feat.empty()) schema(1, "training data needs feature columns f0, f1, ...");
  std::map<std::string, std::vector<std::vector<double>>> rows;
  for (const auto& [no, cells] : t.rows) {
    std::vector<double> v{parse_double(cells[c_r], no, "r"), parse_double(cells[c_th], no, "theta")};
    for (std::size_t k = 0; k < c_feat.size(); ++k) v.push_back(parse_double(cells[c_feat[k]], no, "f" + std::to_string(k)));
    rows[cells[c_bin]].push_back(std::move(v));
  }
  std::map<std::string, GpTrainingBin> out;
  for (const auto& [bin, rs] : rows) {
    const auto n = static_cast<Eigen::Index>(rs.size()), d = static_cast<Eigen::Index>(c_feat.size());
    GpTrainingBin b{gp::GpModel::Matrix(n, d), gp::GpModel::Vector(n), gp::GpModel::Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& v = rs[static_cast<std::size_t>(i)];
      b.range(i) = v[0];
      b.angle(i) = v[1];
      for (Eigen::Index k = 0; k < d; ++k) b.features(i, k) = v[static_cast<std::size_t>(k) + 2];
    }
    out.emplace(bin, std::move(b));
  }
  return out;
}

gp::Registry train_registry(const std::map<std::string, GpTrainingBin>& data, const GpTrainOptions& options) {
  gp::Registry reg;
  for (const auto& [bin, b] : data) {
    auto train = [&](const gp::GpModel::Vector& y, std::uint64_t salt) {
      double ls = options.grid.empty() ? 1.0 : options.grid.front();
      if (b.features.rows() >= 2 && !options.grid.empty()) {
        ls = gp::grid_search_length_scale(b.features, y, options.grid, options.split, options.jitter,
                                          mix_seed(options.seed, salt))
                 .front()
                 .length_scale;
      }
      return gp::GpModel::fit(b.features, y, {ls, options.jitter, std::nullopt});
    };
    const auto salt = std::hash<std::string>{}(bin);
    reg.emplace(bin, gp::BinModels{train(b.range, salt), train(b.angle, salt + 1)});
  }
  return reg;
}

namespace {

json model_to_json(const gp::GpModel& m) {
  json inputs = json::array();
  for (Eigen::Index i = 0; i < m.inputs().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.inputs().cols(); ++k) row.push_back(m.inputs()(i, k));
    inputs.push_back(row);
  }
  json targets = json::array();
  for (Eigen::Index i = 0; i < m.targets().size(); ++i) targets.push_back(m.targets()(i));
  return {{"inputs", inputs},
          {"targets", targets},
          {"length_scale", m.hyperparameters().length_scale},
          {"jitter", m.hyperparameters().jitter},
          {"prior_mean", m.prior_mean()}};
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::SchemaError, where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, where + "." + key + ": " + e.what());
  }
}

gp::GpModel model_from_json(const json& j, const std::string& where) {
  const auto inputs = get<std::vector<std::vector<double>>>(j, "inputs", where);
  const auto targets = get<std::vector<double>>(j, "targets", where);
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw Error(ErrorCode::SchemaError, where + ": inputs and targets must be non-empty and of equal length");
  }
  const auto n = static_cast<Eigen::Index>(inputs.size()), d = static_cast<Eigen::Index>(inputs.front().size());
  gp::GpModel::Matrix x(n, d);
  gp::GpModel::Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = inputs[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != d) throw Error(ErrorCode::SchemaError, where + ": ragged inputs");
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = row[static_cast<std::size_t>(k)];
    y(i) = targets[static_cast<std::size_t>(i)];
  }
  gp::Hyperparameters<double> hp{get<double>(j, "length_scale", where), get<double>(j, "jitter", where), std::nullopt};
  if (j.contains("prior_mean")) hp.prior_mean = get<double>(j, "prior_mean", where);
  try {
    return gp::GpModel::fit(std::move(x), std::move(y), hp);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ContractViolation) throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    throw;
  }
}

}  // namespace

json registry_to_json(const gp::Registry& registry) {
  json bins = json::object();
  for (const auto& [bin, m] : registry) bins[bin] = {{"range", model_to_json(m.range)}, {"angle", model_to_json(m.angle)}};
  return {{"bins", bins}};
}

gp::Registry registry_from_json(const json& j) {
  if (!j.is_object() || !j.contains("bins") || !j.at("bins").is_object()) {
    throw Error(ErrorCode::SchemaError, "GP registry must be an object with a 'bins' object");
  }
  gp::Registry reg;
  for (const auto& [bin, m] : j.at("bins").items()) {
    const std::string where = "bins." + bin;
    if (!m.contains("range") || !m.contains("angle")) {
      throw Error(ErrorCode::SchemaError, where + ": needs 'range' and 'angle' models");
    }
    reg.emplace(bin, gp::BinModels{model_from_json(m.at("range"), where + ".range"),
                                   model_from_json(m.at("angle"), where + ".angle")});
  }
  return reg;
}

pipeline::PipelineOptions pipeline_options_from_json(const json& j, pipeline::PipelineOptions base) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "pipeline options must be an object");
  for (const auto& [key, v] : j.items()) {
    const std::string where = "pipeline";
    if (key == "method") base.method = pipeline::method_from_string(get<std::string>(j, "method", where));
    else if (key == "assign") base.assign = assoc::assign_method_from_string(get<std::string>(j, "assign", where));
    else if (key == "covariance_model")
      base.covariance = assoc::covariance_model_from_string(get<std::string>(j, "covariance_model", where));
    else if (key == "samples") base.samples = get<int>(j, "samples", where);
    else if (key == "realizations") base.realizations = get<int>(j, "realizations", where);
    else if (key == "kappa2") base.kappa2 = get<double>(j, "kappa2", where);
    else if (key == "variance_floor") base.variance_floor = get<bool>(j, "variance_floor", where);
    else if (key == "seed") base.seed = get<std::uint64_t>(j, "seed", where);
    else throw Error(ErrorCode::SchemaError, "unknown pipeline option '" + key + "'");
  }
  if (base.samples < 2) throw Error(ErrorCode::SchemaError, "pipeline.samples must be at least 2");
  if (base.realizations < 1) throw Error(ErrorCode::SchemaError, "pipeline.realizations must be positive");
  if (!(base.kappa2 > 0)) throw Error(ErrorCode::SchemaError, "pipeline.kappa2 must be positive");
  return base;
}

sim::SimConfig sim_config_from_json(const json& j, sim::SimConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "simulation config must be an object");
  const std::string w = "config";
  for (const auto& [key, v] : j.items()) {
    if (key == "radius") c.radius = get<double>(j, "radius", w);
    else if (key == "n_tags") c.n_tags = get<int>(j, "n_tags", w);
    else if (key == "density") c.density = get<double>(j, "density", w);
    else if (key == "table_mode") c.table_mode = get<bool>(j, "table_mode", w);
    else if (key == "trial_count") c.trial_count = get<int>(j, "trial_count", w);
    else if (key == "camera_noise_sigma") c.camera_noise_sigma = get<double>(j, "camera_noise_sigma", w);
    else if (key == "rfid_range_sigma") c.rfid_range_sigma = get<double>(j, "rfid_range_sigma", w);
    else if (key == "rfid_angle_sigma") c.rfid_angle_sigma = get<double>(j, "rfid_angle_sigma", w);
    else if (key == "max_sim_time") c.max_sim_time = get<double>(j, "max_sim_time", w);
    else if (key == "seed") c.seed = get<std::uint64_t>(j, "seed", w);
    else if (key == "speed_range") {
      const auto r = get<std::vector<double>>(j, "speed_range", w);
      if (r.size() != 2) throw Error(ErrorCode::SchemaError, "config.speed_range must be [min, max]");
      c.speed_min = r[0];
      c.speed_max = r[1];
    } else if (key == "camera_rate") c.camera_rate = get<int>(j, "camera_rate", w);
    else if (key == "rfid_rate") c.rfid_rate = get<int>(j, "rfid_rate", w);
    else if (key == "analysis_period") c.analysis_period = get<double>(j, "analysis_period", w);
    else if (key == "q_scale") c.q_scale = get<double>(j, "q_scale", w);
    else if (key == "region") {
      try {
        c.region = sim::region_from_string(get<std::string>(j, "region", w));
      } catch (const Error& e) {
        throw Error(ErrorCode::SchemaError, e.what());
      }
    } else if (key == "fov") c.fov = get<bool>(j, "fov", w);
    else if (key == "rfid_max_range") c.rfid_max_range = get<double>(j, "rfid_max_range", w);
    else if (key == "rfid_half_angle") c.rfid_half_angle = get<double>(j, "rfid_half_angle", w);
    else if (key == "camera_max_range") c.camera_max_range = get<double>(j, "camera_max_range", w);
    else if (key == "pipeline") c.pipeline = pipeline_options_from_json(v, c.pipeline);
    else throw Error(ErrorCode::SchemaError, "unknown config key '" + key + "'");
  }
  return c;
}

json sim_config_to_json(const sim::SimConfig& c) {
  return {{"radius", c.radius},
          {"n_tags", c.n_tags},
          {"density", c.density},
          {"table_mode", c.table_mode},
          {"trial_count", c.trial_count},
          {"camera_noise_sigma", c.camera_noise_sigma},
          {"rfid_range_sigma", c.rfid_range_sigma},
          {"rfid_angle_sigma", c.rfid_angle_sigma},
          {"max_sim_time", c.max_sim_time},
          {"seed", c.seed},
          {"speed_range", {c.speed_min, c.speed_max}},
          {"camera_rate", c.camera_rate},
          {"rfid_rate", c.rfid_rate},
          {"analysis_period", c.analysis_period},
          {"q_scale", c.q_scale},
          {"region", sim::to_string(c.region)},
          {"fov", c.fov},
          {"rfid_max_range", c.rfid_max_range},
          {"rfid_half_angle", c.rfid_half_angle},
          {"camera_max_range", c.camera_max_range},
          {"pipeline",
           {{"assign", assoc::to_string(c.pipeline.assign)},
            {"covariance_model", assoc::to_string(c.pipeline.covariance)},
            {"samples", c.pipeline.samples},
            {"realizations", c.pipeline.realizations},
            {"kappa2", c.pipeline.kappa2},
            {"variance_floor", c.pipeline.variance_floor}}}};
}

std::vector<sim::SimConfig> preset(const std::string& name) {
  std::vector<sim::SimConfig> out;
  if (name == "table_r20") {
    for (double d : sim::kTableDensities) {
      sim::SimConfig c;
      c.radius = 20.0;
      c.density = d;
      c.table_mode = true;
      c.trial_count = 50;
      c.max_sim_time = 60.0;
      out.push_back(c);
    }
  } else if (name == "large_r80") {
    sim::SimConfig c;
    c.radius = 80.0;
    c.n_tags = 20;
    c.trial_count = 20;
    c.max_sim_time = 120.0;
    out.push_back(c);
  } else if (name == "field") {
    sim::SimConfig c;
    c.region = sim::Region::FieldSector;
    c.fov = true;
    c.n_tags = 4;
    c.trial_count = 20;
    c.max_sim_time = 10.0;
    out.push_back(c);
  } else {
    throw Error(ErrorCode::SchemaError, "unknown preset '" + name + "' (table_r20, large_r80, field)");
  }
  return out;
}

CampaignSpec campaign_spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "campaign config must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key != "methods" && key != "preset" && key != "base" && key != "configs") {
      throw Error(ErrorCode::SchemaError, "unknown campaign key '" + key + "'");
    }
  }
  CampaignSpec spec;
  if (j.contains("methods")) {
    spec.methods.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "methods", "campaign"))
      spec.methods.push_back(pipeline::method_from_string(m));
    if (spec.methods.empty()) throw Error(ErrorCode::SchemaError, "campaign.methods must not be empty");
  }
  const json base = j.value("base", json::object());
  if (j.contains("preset")) {
    for (auto c : preset(get<std::string>(j, "preset", "campaign"))) spec.configs.push_back(sim_config_from_json(base, c));
  }
  if (j.contains("configs")) {
    if (!j.at("configs").is_array()) throw Error(ErrorCode::SchemaError, "campaign.configs must be an array");
    for (const auto& c : j.at("configs")) spec.configs.push_back(sim_config_from_json(c, sim_config_from_json(base)));
  }
  if (spec.configs.empty()) spec.configs.push_back(sim_config_from_json(base));
  for (auto& c : spec.configs) {
    try {
      c.finalize();
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, e.what());
    }
  }
  return spec;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json campaign_to_json(const sim::CampaignReport& report) {
  json trials = json::array();
  for (const auto& t : report.trials) {
    trials.push_back({{"config", t.config_index},
                      {"trial", t.trial},
                      {"radius", t.radius},
                      {"density", t.density},
                      {"n_tags", t.n_tags},
                      {"method", pipeline::to_string(t.outcome.method)},
                      {"converged", t.outcome.converged},
                      {"time_to_association", t.outcome.time_to_association},
                      {"final_accuracy", t.outcome.final_accuracy},
                      {"steps", t.outcome.steps}});
  }
  json summary = json::array();
  for (const auto& g : report.summary) {
    summary.push_back({{"config", g.config_index},
                       {"radius", g.radius},
                       {"density", g.density},
                       {"n_tags", g.n_tags},
                       {"method", pipeline::to_string(g.method)},
                       {"trials", g.trials},
                       {"mean_accuracy", g.mean_accuracy},
                       {"accuracy_p05", g.accuracy_p05},
                       {"accuracy_p50", g.accuracy_p50},
                       {"converged_fraction", g.converged_fraction},
                       {"tta_p50", optional_number(g.tta_p50)},
                       {"tta_p95", optional_number(g.tta_p95)},
                       {"tta_max", optional_number(g.tta_max)}});
  }
  return {{"seed", report.seed}, {"trials", trials}, {"summary", summary}};
}

sim::CampaignReport campaign_from_json(const json& j) {
  sim::CampaignReport r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trials")) {
      sim::TrialRecord rec;
      rec.config_index = t.at("config").get<std::size_t>();
      rec.trial = t.at("trial").get<int>();
      rec.radius = t.at("radius").get<double>();
      rec.density = t.at("density").get<double>();
      rec.n_tags = t.at("n_tags").get<int>();
      rec.outcome.method = pipeline::method_from_string(t.at("method").get<std::string>());
      rec.outcome.converged = t.at("converged").get<bool>();
      rec.outcome.time_to_association = t.at("time_to_association").get<double>();
      rec.outcome.final_accuracy = t.at("final_accuracy").get<double>();
      rec.outcome.steps = t.at("steps").get<int>();
      r.trials.push_back(rec);
    }
    for (const auto& s : j.at("summary")) {
      sim::GroupSummary g;
      g.config_index = s.at("config").get<std::size_t>();
      g.radius = s.at("radius").get<double>();
      g.density = s.at("density").get<double>();
      g.n_tags = s.at("n_tags").get<int>();
      g.method = pipeline::method_from_string(s.at("method").get<std::string>());
      g.trials = s.at("trials").get<int>();
      g.mean_accuracy = s.at("mean_accuracy").get<double>();
      g.accuracy_p05 = s.at("accuracy_p05").get<double>();
      g.accuracy_p50 = s.at("accuracy_p50").get<double>();
      g.converged_fraction = s.at("converged_fraction").get<double>();
      g.tta_p50 = optional_from(s, "tta_p50");
      g.tta_p95 = optional_from(s, "tta_p95");
      g.tta_max = optional_from(s, "tta_max");
      r.summary.push_back(g);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("campaign report: ") + e.what());
  }
  return r;
}

std::string campaign_csv(const sim::CampaignReport& report) {
  std::ostringstream out;
  out << "config,trial,radius,density,n_tags,method,converged,time_to_association,final_accuracy,steps\n";
  for (const auto& t : report.trials) {
    out << t.config_index << ',' << t.trial << ',' << fmt(t.radius) << ',' << fmt(t.density) << ',' << t.n_tags << ','
        << pipeline::to_string(t.outcome.method) << ',' << (t.outcome.converged ? 1 : 0) << ','
        << fmt(t.outcome.time_to_association) << ',' << fmt(t.outcome.final_accuracy) << ',' << t.outcome.steps
        << '\n';
  }
  return out.str();
}

json analysis_to_json(const pipeline::AnalysisRun& run, const pipeline::PipelineOptions& options) {
  json steps = json::array();
  for (const auto& s : run.steps) {
    json step = {{"step", s.step}, {"t", s.t}};
    if (s.mapping) {
      json mapping = json::object();
      for (std::size_t i = 0; i < s.mapping->tag_of_object.size(); ++i) {
        mapping[run.object_ids[i]] = run.tag_ids[static_cast<std::size_t>(s.mapping->tag_of_object[i])];
      }
      step["mapping"] = mapping;
      step["total_cost"] = s.mapping->total();
    } else {
      step["mapping"] = nullptr;
    }
    if (s.costs) {
      json scores = json::array();
      for (Eigen::Index i = 0; i < s.costs->entries.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < s.costs->entries.cols(); ++k) row.push_back(s.costs->entries(i, k));
        scores.push_back(row);
      }
      step["scores"] = scores;
    } else {
      step["scores"] = nullptr;
    }
    steps.push_back(step);
  }

  json overlays = json::array();
  for (const auto& a : run.overlays) {
    json cam = json::array(), tag = json::array();
    for (const auto& p : a.cam.points) cam.push_back({p.t, p.coords.x(), p.coords.y()});
    for (const auto& p : a.rfid.points) tag.push_back({p.t, p.coords.x(), p.coords.y()});
    overlays.push_back({{"object_id", a.cam.id}, {"tag_id", a.rfid.id}, {"camera", cam}, {"tag", tag}});
  }

  json gv = json::array();
  for (const auto& tr : run.tracks) {
    json series = json::array();
    for (const auto& p : tr.points) series.push_back({p.t, p.position_cov.determinant()});
    gv.push_back({{"tag_id", tr.id}, {"series", series}});
  }

  json final_mapping = nullptr;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (!(*it)["mapping"].is_null()) {
      final_mapping = (*it)["mapping"];
      break;
    }
  }
  return {{"method", pipeline::to_string(options.method)},
          {"assign", assoc::to_string(options.assign)},
          {"covariance_model", assoc::to_string(options.covariance)},
          {"seed", options.seed},
          {"samples", options.samples},
          {"object_ids", run.object_ids},
          {"tag_ids", run.tag_ids},
          {"steps", steps},
          {"converged", run.stable_from.has_value()},
          {"converged_at_step", run.stable_from ? json(*run.stable_from) : json(nullptr)},
          {"final_mapping", final_mapping},
          {"skipped_measurements", run.skipped_measurements},
          {"overlays", overlays},
          {"generalized_variance", gv}};
}

std::vector<std::filesystem::path> export_campaign_plotdata(const sim::CampaignReport& report,
                                                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream acc;
  acc << "radius,density,n_tags,method,trials,mean_accuracy,accuracy_p05,accuracy_p50,converged_fraction,tta_p50,"
         "tta_p95\n";
  for (const auto& g : report.summary) {
    acc << fmt(g.radius) << ',' << fmt(g.density) << ',' << g.n_tags << ',' << pipeline::to_string(g.method) << ','
        << g.trials << ',' << fmt(g.mean_accuracy) << ',' << fmt(g.accuracy_p05) << ',' << fmt(g.accuracy_p50) << ','
        << fmt(g.converged_fraction) << ',' << (g.tta_p50 ? fmt(*g.tta_p50) : "") << ','
        << (g.tta_p95 ? fmt(*g.tta_p95) : "") << '\n';
  }
  // (method, config, bin start) -> count
  std::map<std::tuple<std::string, std::size_t, long>, int> bins;
  for (const auto& t : report.trials) {
    if (!t.outcome.converged) continue;
    const long b = static_cast<long>(std::floor(t.outcome.time_to_association));
    ++bins[{pipeline::to_string(t.outcome.method), t.config_index, b}];
  }
  std::ostringstream hist;
  hist << "method,config,bin_start,bin_end,count\n";
  for (const auto& [key, count] : bins) {
    const auto& [method, config, b] = key;
    hist << method << ',' << config << ',' << b << ',' << b + 1 << ',' << count << '\n';
  }
  const auto p1 = dir / "accuracy_vs_density.csv", p2 = dir / "tta_histogram.csv";
  write_text(p1, acc.str());
  write_text(p2, hist.str());
  return {p1, p2};
}

std::vector<std::filesystem::path> export_analysis_plotdata(const json& analysis, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream ov, gv;
  ov << "object_id,tag_id,k,t,camera_x,camera_y,tag_x,tag_y\n";
  gv << "tag_id,t,generalized_variance\n";
  try {
    for (const auto& o : analysis.value("overlays", json::array())) {
      const auto& cam = o.at("camera");
      const auto& tag = o.at("tag");
      if (cam.size() != tag.size()) throw Error(ErrorCode::SchemaError, "overlay camera/tag lengths differ");
      for (std::size_t k = 0; k < cam.size(); ++k) {
        ov << o.at("object_id").get<std::string>() << ',' << o.at("tag_id").get<std::string>() << ',' << k << ','
           << fmt(cam[k][0].get<double>()) << ',' << fmt(cam[k][1].get<double>()) << ','
           << fmt(cam[k][2].get<double>()) << ',' << fmt(tag[k][1].get<double>()) << ','
           << fmt(tag[k][2].get<double>()) << '\n';
      }
    }
    for (const auto& g : analysis.value("generalized_variance", json::array())) {
      for (const auto& p : g.at("series")) {
        gv << g.at("tag_id").get<std::string>() << ',' << fmt(p[0].get<double>()) << ',' << fmt(p[1].get<double>())
           << '\n';
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("association report: ") + e.what());
  }
  const auto p1 = dir / "overlays.csv", p2 = dir / "generalized_variance.csv";
  write_text(p1, ov.str());
  write_text(p2, gv.str());
  return {p1, p2};
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  out << text;
}

}  // namespace fusetrack::io
