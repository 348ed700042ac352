#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/error.hpp"

namespace fusetrack::stereo {

/// 8-bit grayscale image, rows = height.
using Image = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntGrid = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealGrid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::int32_t kOutOfBoundsCost = 1000;
inline constexpr std::int32_t kDefaultP1 = 10;
inline constexpr std::int32_t kDefaultP2 = 120;

struct StereoPair {
  Image left;
  Image right;
  int max_disparity = 16;

  /// Throws ContractViolation on mismatched sizes or max_disparity outside [1, W).
  void validate() const;
};

/// H x W x D integer volume stored with disparity fastest.
class CostVolume {
 public:
  CostVolume() = default;
  CostVolume(int height, int width, int disparities, std::int32_t fill = 0)
      : h_(height), w_(width), d_(disparities),
        data_(static_cast<std::size_t>(height) * width * disparities, fill) {}

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int disparities() const noexcept { return d_; }

  std::int32_t& operator()(int y, int x, int d) { return data_[index(y, x, d)]; }
  std::int32_t operator()(int y, int x, int d) const { return data_[index(y, x, d)]; }

  std::span<std::int32_t> at(int y, int x) { return {data_.data() + index(y, x, 0), static_cast<std::size_t>(d_)}; }
  std::span<const std::int32_t> at(int y, int x) const {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(d_)};
  }

  const std::vector<std::int32_t>& data() const noexcept { return data_; }
  bool same_shape(const CostVolume& o) const noexcept { return h_ == o.h_ && w_ == o.w_ && d_ == o.d_; }
  bool operator==(const CostVolume& o) const = default;

 private:
  std::size_t index(int y, int x, int d) const {
    return (static_cast<std::size_t>(y) * w_ + x) * d_ + d;
  }
  int h_ = 0, w_ = 0, d_ = 0;
  std::vector<std::int32_t> data_;
};

/// C(p, d) = |left(p) - right(p - d x-hat)|; kOutOfBoundsCost where x - d < 0.
CostVolume matching_cost(const StereoPair& pair);

/// Scan step between consecutive pixels of a path.
struct Direction {
  int dx = 1;
  int dy = 0;
};

inline constexpr std::array<Direction, 8> kDirections8{{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};

/// L_r(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d+-1) + P1, min_k L(p-r, k) + P2) - min_k L(p-r, k).
/// Pixels whose predecessor lies outside the image start the path with L = C.
CostVolume aggregate_path(const CostVolume& cost, Direction r, std::int32_t p1, std::int32_t p2);

/// S = sum of the given volumes. Throws ContractViolation on an empty set or shape mismatch.
CostVolume sum_paths(std::span<const CostVolume> aggregated);

struct DisparityMap {
  IntGrid d;
  MaskGrid valid;
};

/// Per-pixel argmin over d, ties toward the smaller d.
DisparityMap select_disparity(const CostVolume& s);

/// Full pipeline: cost, aggregation along `directions`, summation, selection.
DisparityMap semi_global_matching(const StereoPair& pair, std::int32_t p1 = kDefaultP1, std::int32_t p2 = kDefaultP2,
                                  std::span<const Direction> directions = kDirections8);

/// E(D) = sum_p C(p, D_p) + sum over unordered 4-neighbour pairs of P1 [|dD| = 1] + P2 [|dD| > 1].
double energy(const DisparityMap& map, const CostVolume& cost, std::int32_t p1, std::int32_t p2);

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 1.0;

  void validate() const;
  /// Reprojection matrix mapping [u, v, d, 1] to homogeneous (X, Y, Z, W).
  Eigen::Matrix4d q() const;
};

struct DepthMap {
  RealGrid z;
  MaskGrid valid;
};

/// Z = f_x B / d where d > 0 and the disparity is valid.
DepthMap depth_from_disparity(const DisparityMap& map, const CameraIntrinsics& intr);

/// Q [u, v, d, 1]^T with perspective division. Throws ZeroDisparity for d <= 0.
Eigen::Vector3d reproject(double u, double v, double d, const CameraIntrinsics& intr);

/// Random-dot pair with a planted left-image disparity field.
struct Stereogram {
  StereoPair pair;
  IntGrid truth;
  /// Left pixels visible in the right image.
  MaskGrid visible;
};

/// Uniform random left image; the right image samples left(x) at x - truth(x),
/// nearer (larger d) pixels winning. Uncovered right pixels get fresh dots.
Stereogram random_dot_stereogram(const IntGrid& truth, int max_disparity, std::uint64_t seed);

/// Piecewise-constant disparity field: background plus nested rectangles.
IntGrid layered_disparity(int height, int width, int background, int middle, int front);

Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

/// Disparity scaled to 0..255 for viewing.
Image visualize(const DisparityMap& map, int max_disparity);

}  // namespace fusetrack::stereo
