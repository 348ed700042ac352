#include "fusetrack/stereo.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>

namespace fusetrack::stereo {

void StereoPair::validate() const {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw Error(ErrorCode::ContractViolation, "left and right images differ in size");
  }
  if (left.size() == 0) throw Error(ErrorCode::Empty, "empty stereo pair");
  if (max_disparity < 1 || max_disparity >= left.cols()) {
    throw Error(ErrorCode::ContractViolation, "max_disparity must lie in [1, width)");
  }
}

CostVolume matching_cost(const StereoPair& pair) {
  pair.validate();
  const int h = static_cast<int>(pair.left.rows()), w = static_cast<int>(pair.left.cols());
  CostVolume c(h, w, pair.max_disparity, kOutOfBoundsCost);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int d = 0; d < pair.max_disparity && x - d >= 0; ++d)
        c(y, x, d) = std::abs(int(pair.left(y, x)) - int(pair.right(y, x - d)));
  return c;
}

CostVolume aggregate_path(const CostVolume& cost, Direction r, std::int32_t p1, std::int32_t p2) {
  if (p1 <= 0 || p2 < p1) throw Error(ErrorCode::ContractViolation, "penalties must satisfy P2 >= P1 > 0");
  if (r.dx < -1 || r.dx > 1 || r.dy < -1 || r.dy > 1 || (r.dx == 0 && r.dy == 0)) {
    throw Error(ErrorCode::ContractViolation, "direction must be a unit grid step");
  }
  const int h = cost.height(), w = cost.width(), nd = cost.disparities();
  CostVolume out(h, w, nd);
  // Scan so that p - r is always visited before p.
  const int y0 = r.dy >= 0 ? 0 : h - 1, y1 = r.dy >= 0 ? h : -1, sy = r.dy >= 0 ? 1 : -1;
  const int x0 = r.dx >= 0 ? 0 : w - 1, x1 = r.dx >= 0 ? w : -1, sx = r.dx >= 0 ? 1 : -1;
  for (int y = y0; y != y1; y += sy) {
    for (int x = x0; x != x1; x += sx) {
      const int py = y - r.dy, px = x - r.dx;
      auto dst = out.at(y, x);
      const auto c = cost.at(y, x);
      if (py < 0 || py >= h || px < 0 || px >= w) {
        std::copy(c.begin(), c.end(), dst.begin());
        continue;
      }
      const auto prev = std::as_const(out).at(py, px);
      const std::int32_t m = *std::min_element(prev.begin(), prev.end());
      for (int d = 0; d < nd; ++d) {
        std::int32_t best = std::min(prev[d], m + p2);
        if (d > 0) best = std::min(best, prev[d - 1] + p1);
        if (d + 1 < nd) best = std::min(best, prev[d + 1] + p1);
        dst[d] = c[d] + best - m;
      }
    }
  }
  return out;
}

CostVolume sum_paths(std::span<const CostVolume> aggregated) {
  if (aggregated.empty()) throw Error(ErrorCode::ContractViolation, "need at least one aggregated volume");
  CostVolume s = aggregated.front();
  for (std::size_t k = 1; k < aggregated.size(); ++k) {
    if (!aggregated[k].same_shape(s)) throw Error(ErrorCode::ContractViolation, "volume shapes differ");
    for (int y = 0; y < s.height(); ++y)
      for (int x = 0; x < s.width(); ++x) {
        auto dst = s.at(y, x);
        const auto src = aggregated[k].at(y, x);
        for (int d = 0; d < s.disparities(); ++d) dst[d] += src[d];
      }
  }
  return s;
}

DisparityMap select_disparity(const CostVolume& s) {
  DisparityMap m{IntGrid::Zero(s.height(), s.width()), MaskGrid::Constant(s.height(), s.width(), true)};
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) {
      const auto v = s.at(y, x);
      m.d(y, x) = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    }
  return m;
}

DisparityMap semi_global_matching(const StereoPair& pair, std::int32_t p1, std::int32_t p2,
                                  std::span<const Direction> directions) {
  const CostVolume c = matching_cost(pair);
  std::vector<CostVolume> paths;
  paths.reserve(directions.size());
  for (const auto& r : directions) paths.push_back(aggregate_path(c, r, p1, p2));
  return select_disparity(sum_paths(paths));
}

double energy(const DisparityMap& map, const CostVolume& cost, std::int32_t p1, std::int32_t p2) {
  const int h = cost.height(), w = cost.width();
  if (map.d.rows() != h || map.d.cols() != w) throw Error(ErrorCode::ContractViolation, "map and volume differ in size");
  auto penalty = [&](int a, int b) -> double {
    const int diff = std::abs(a - b);
    return diff == 0 ? 0.0 : diff == 1 ? double(p1) : double(p2);
  };
  double e = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int d = map.d(y, x);
      if (d < 0 || d >= cost.disparities()) throw Error(ErrorCode::ContractViolation, "disparity out of range");
      e += cost(y, x, d);
      if (x + 1 < w) e += penalty(d, map.d(y, x + 1));
      if (y + 1 < h) e += penalty(d, map.d(y + 1, x));
    }
  return e;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0) || !(baseline > 0)) {
    throw Error(ErrorCode::ContractViolation, "focal lengths and baseline must be positive");
  }
}

Eigen::Matrix4d CameraIntrinsics::q() const {
  validate();
  const double a = fx / fy;
  Eigen::Matrix4d m;
  m << 1, 0, 0, -cx,
       0, a, 0, -cy * a,
       0, 0, 0, fx,
       0, 0, 1.0 / baseline, 0;
  return m;
}

DepthMap depth_from_disparity(const DisparityMap& map, const CameraIntrinsics& intr) {
  intr.validate();
  DepthMap out{RealGrid::Zero(map.d.rows(), map.d.cols()), MaskGrid::Constant(map.d.rows(), map.d.cols(), false)};
  for (Eigen::Index y = 0; y < map.d.rows(); ++y)
    for (Eigen::Index x = 0; x < map.d.cols(); ++x) {
      const int d = map.d(y, x);
      if (d > 0 && map.valid(y, x)) {
        out.z(y, x) = intr.fx * intr.baseline / d;
        out.valid(y, x) = true;
      }
    }
  return out;
}

Eigen::Vector3d reproject(double u, double v, double d, const CameraIntrinsics& intr) {
  if (!(d > 0)) throw Error(ErrorCode::ZeroDisparity, "cannot reproject disparity " + std::to_string(d));
  const Eigen::Vector4d h = intr.q() * Eigen::Vector4d(u, v, d, 1.0);
  return h.head<3>() / h(3);
}

Stereogram random_dot_stereogram(const IntGrid& truth, int max_disparity, std::uint64_t seed) {
  const auto h = truth.rows(), w = truth.cols();
  std::mt19937_64 rng(seed);
  auto dot = [&] { return static_cast<std::uint8_t>(rng() >> 56); };
  Stereogram s;
  s.truth = truth;
  s.pair.max_disparity = max_disparity;
  s.pair.left.resize(h, w);
  s.pair.right.resize(h, w);
  for (Eigen::Index i = 0; i < s.pair.left.size(); ++i) s.pair.left.data()[i] = dot();
  for (Eigen::Index i = 0; i < s.pair.right.size(); ++i) s.pair.right.data()[i] = dot();
  s.visible = MaskGrid::Constant(h, w, false);
  for (Eigen::Index y = 0; y < h; ++y) {
    // owner[xr] = left column currently painted at right column xr
    std::vector<Eigen::Index> owner(static_cast<std::size_t>(w), -1);
    for (Eigen::Index x = 0; x < w; ++x) {
      const int d = truth(y, x);
      if (d < 0 || d >= max_disparity) throw Error(ErrorCode::ContractViolation, "planted disparity out of range");
      const Eigen::Index xr = x - d;
      if (xr < 0) continue;
      const Eigen::Index o = owner[static_cast<std::size_t>(xr)];
      if (o >= 0 && truth(y, o) > d) continue;
      owner[static_cast<std::size_t>(xr)] = x;
    }
    for (Eigen::Index xr = 0; xr < w; ++xr) {
      const Eigen::Index o = owner[static_cast<std::size_t>(xr)];
      if (o < 0) continue;
      s.pair.right(y, xr) = s.pair.left(y, o);
      s.visible(y, o) = true;
    }
  }
  return s;
}

IntGrid layered_disparity(int height, int width, int background, int middle, int front) {
  IntGrid g = IntGrid::Constant(height, width, background);
  g.block(height / 8, width / 8, height * 5 / 8, width * 5 / 8).setConstant(middle);
  g.block(height * 3 / 8, width * 3 / 8, height / 2, width / 2).setConstant(front);
  return g;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path.string());
  if (pgm_token(in) != "P5") throw Error(ErrorCode::SchemaError, path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::SchemaError, path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::SchemaError, path.string() + ": only 8-bit PGM images are supported");
  }
  Image img(h, w);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.size())) {
    throw Error(ErrorCode::SchemaError, path.string() + ": truncated pixel data");
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

Image visualize(const DisparityMap& map, int max_disparity) {
  const double scale = max_disparity > 1 ? 255.0 / (max_disparity - 1) : 0.0;
  return (map.d.cast<double>() * scale).round().min(255.0).max(0.0).cast<std::uint8_t>();
}

}  // namespace fusetrack::stereo
