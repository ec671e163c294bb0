#include "voxelox/geometry.hpp"

#include "voxelox/error.hpp"

#include <Eigen/Geometry>

#include <string>

namespace voxelox {

void validate(const CameraIntrinsics& intr) {
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0)) {
    throw_validation("intrinsics: focal lengths must be positive");
  }
  if (intr.width <= 0 || intr.height <= 0) {
    throw_validation("intrinsics: raster size must be positive");
  }
  if (!(intr.cx >= 0.0 && intr.cx < intr.width) || !(intr.cy >= 0.0 && intr.cy < intr.height)) {
    throw_validation("intrinsics: principal point outside raster");
  }
}

void validate(const Pose& pose, double tol) {
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
    throw_validation("pose: non-finite entries");
  }
  const Eigen::Matrix3d gram = pose.rotation.transpose() * pose.rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) {
    throw_validation("pose: rotation is not orthonormal");
  }
  if (std::abs(pose.rotation.determinant() - 1.0) > tol) {
    throw_validation("pose: rotation determinant is not +1");
  }
}

Eigen::Vector3d back_project(int u, int v, double depth, const CameraIntrinsics& intr,
                             const Pose& pose) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw_validation("invalid depth " + std::to_string(depth) + " at pixel (" +
                     std::to_string(u) + "," + std::to_string(v) + ")");
  }
  return pose.apply(depth * pixel_ray(u, v, intr));
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
             const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-12) {
    right = forward.unitOrthogonal();
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);

  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

}  // namespace voxelox
