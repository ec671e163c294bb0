#pragma once

#include <Eigen/Core>

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace voxelox {

/// Map resolution used by default, in meters.
inline constexpr double kDefaultResolution = 0.04;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Throws a validation error unless focal lengths are positive and the
/// principal point lies inside the raster.
void validate(const CameraIntrinsics& intr);

/// Rigid transform, world-from-camera: p_world = rotation * p_cam + translation.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

/// Throws a validation error unless the rotation is orthonormal with
/// determinant +1 within `tol` and the translation is finite.
void validate(const Pose& pose, double tol = 1e-9);

struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelKey&) const = default;

  template <typename H>
  friend H AbslHashValue(H h, const VoxelKey& k) {
    return H::combine(std::move(h), k.ix, k.iy, k.iz);
  }
};

/// Camera-frame ray through pixel (u, v) scaled to unit depth.
inline Eigen::Vector3d pixel_ray(int u, int v, const CameraIntrinsics& intr) {
  return {(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
}

/// Lifts pixel (u, v) with metric depth into the world frame.
/// Throws a validation error for non-positive or non-finite depth.
Eigen::Vector3d back_project(int u, int v, double depth, const CameraIntrinsics& intr,
                             const Pose& pose);

/// Component-wise floor(point / resolution).
inline VoxelKey voxelize(const Eigen::Vector3d& point, double resolution) {
  return {static_cast<std::int32_t>(std::floor(point.x() / resolution)),
          static_cast<std::int32_t>(std::floor(point.y() / resolution)),
          static_cast<std::int32_t>(std::floor(point.z() / resolution))};
}

inline Eigen::Vector3d voxel_center(const VoxelKey& key, double resolution) {
  return {(key.ix + 0.5) * resolution, (key.iy + 0.5) * resolution,
          (key.iz + 0.5) * resolution};
}

/// Builds a world-from-camera pose for a camera at `eye` looking at `target`.
/// Camera axes: x right, y down, z forward. `up` is the world up direction.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
             const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

}  // namespace voxelox
