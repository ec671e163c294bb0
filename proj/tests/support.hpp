#pragma once

#include "voxelox/frame.hpp"
#include "voxelox/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace vtest {

namespace fs = std::filesystem;

/// Directory removed on scope exit.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("voxelox_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Byte-wise comparison of two directory trees.
inline bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> la;
  std::vector<fs::path> lb;
  for (const auto& e : fs::recursive_directory_iterator(a)) la.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b)) lb.push_back(fs::relative(e.path(), b));
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  if (la != lb) return false;
  for (const auto& rel : la) {
    if (fs::is_regular_file(a / rel) && slurp(a / rel) != slurp(b / rel)) return false;
  }
  return true;
}

// Grid camera: fx = fy = 25 px/m, principal point at the origin and a
// half-voxel offset, so at 1 m depth pixel (u, v) lands in voxel (u, v, 25)
// for resolution 0.04.
inline voxelox::CameraIntrinsics grid_intrinsics(int width, int height) {
  return {25.0, 25.0, 0.0, 0.0, width, height};
}

inline voxelox::Pose grid_pose() {
  voxelox::Pose pose;
  pose.translation = Eigen::Vector3d(0.02, 0.02, 0.02);
  return pose;
}

inline voxelox::FrameBundle grid_frame(int width, int height, std::uint64_t frame_id = 0,
                                       std::uint16_t depth_mm = 1000) {
  voxelox::FrameBundle frame;
  frame.frame_id = frame_id;
  frame.intrinsics = grid_intrinsics(width, height);
  frame.pose = grid_pose();
  frame.depth_mm.assign(static_cast<std::size_t>(width) * height, depth_mm);
  return frame;
}

inline voxelox::MaskObservation observation(std::vector<std::uint32_t> pixels,
                                            std::vector<float> feature, float score = 1.0F) {
  voxelox::MaskObservation obs;
  obs.mask = voxelox::Mask::from_indices(std::move(pixels));
  obs.feature = std::move(feature);
  obs.detection_score = score;
  return obs;
}

inline std::vector<float> unit(std::size_t dim, std::size_t axis) {
  std::vector<float> v(dim, 0.0F);
  v[axis] = 1.0F;
  return v;
}

/// Pixels of the rectangle [u0, u1) x [v0, v1) in a raster of the given width.
inline std::vector<std::uint32_t> rect(int width, int u0, int v0, int u1, int v1) {
  std::vector<std::uint32_t> out;
  for (int v = v0; v < v1; ++v) {
    for (int u = u0; u < u1; ++u) out.push_back(static_cast<std::uint32_t>(v * width + u));
  }
  return out;
}

// Independent pinhole lift and floor quantization used as the test oracle.
inline voxelox::VoxelKey oracle_voxel(int u, int v, double depth_m,
                                      const voxelox::CameraIntrinsics& intr,
                                      const voxelox::Pose& pose, double res) {
  const double xc = (u - intr.cx) * depth_m / intr.fx;
  const double yc = (v - intr.cy) * depth_m / intr.fy;
  const double p[3] = {
      pose.rotation(0, 0) * xc + pose.rotation(0, 1) * yc + pose.rotation(0, 2) * depth_m +
          pose.translation(0),
      pose.rotation(1, 0) * xc + pose.rotation(1, 1) * yc + pose.rotation(1, 2) * depth_m +
          pose.translation(1),
      pose.rotation(2, 0) * xc + pose.rotation(2, 1) * yc + pose.rotation(2, 2) * depth_m +
          pose.translation(2)};
  return {static_cast<std::int32_t>(std::floor(p[0] / res)),
          static_cast<std::int32_t>(std::floor(p[1] / res)),
          static_cast<std::int32_t>(std::floor(p[2] / res))};
}

}  // namespace vtest
