#pragma once

#include "voxelox/frame.hpp"
#include "voxelox/instance_id.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voxelox {

enum class ShapeKind {
  Box,
  Sphere,
};

/// Axis-aligned box (half_extents) or sphere (radius) with its labels.
struct SceneObject {
  InstanceId id = 0;
  int class_id = 0;
  ShapeKind shape = ShapeKind::Box;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  double radius = 0.0;

  /// Smallest ray parameter t > 0 where origin + t * dir enters the object.
  std::optional<double> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  bool contains(const Eigen::Vector3d& p) const;
  /// Radius of the footprint's bounding circle in the xy plane.
  double footprint_radius() const;

  bool operator==(const SceneObject&) const = default;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  Eigen::Vector3d bounds_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d bounds_max = Eigen::Vector3d::Zero();
  /// Orthonormal class embeddings, indexed by class ID.
  std::vector<std::vector<double>> class_embeddings;
  std::vector<Pose> trajectory;
  CameraIntrinsics intrinsics;

  std::size_t embedding_dim() const {
    return class_embeddings.empty() ? 0 : class_embeddings.front().size();
  }

  bool operator==(const SyntheticScene&) const = default;
};

struct SceneConfig {
  std::uint64_t seed = 0;
  int n_objects = 6;
  std::size_t embedding_dim = 16;
  /// 0 uses one class per object (capped at the embedding dimension).
  int n_classes = 0;
  int n_frames = 60;
  CameraIntrinsics intrinsics{260.0, 260.0, 160.0, 120.0, 320, 240};
  /// Objects are placed with footprints inside [-half, half]^2 on the floor (z = 0).
  /// 0 picks 1.4 m, widened for more than six objects.
  double floor_half_size = 0.0;
  double min_gap = 0.12;
  /// 0 keeps the camera 1.6 m outside the floor edge.
  double orbit_radius = 0.0;
  double camera_height = 1.6;
};

/// Deterministic for a config; throws a validation error when the objects
/// cannot be packed without overlap.
SyntheticScene generate_scene(const SceneConfig& cfg);

struct GroundTruthFrame {
  FrameBundle frame;
  /// Per-pixel GT instance, kNoInstance for background.
  std::vector<InstanceId> labels;
};

/// Ray-casts depth and instance labels; masks are the 4-connected regions
/// of each instance, each carrying its clean class embedding.
GroundTruthFrame render_gt_frame(const SyntheticScene& scene, const Pose& pose,
                                 std::uint64_t frame_id = 0);

struct NoiseConfig {
  double p_drop = 0.0;
  double p_split = 0.0;
  double p_merge = 0.0;
  int boundary_jitter = 0;
  double embedding_noise_sigma = 0.0;
  double depth_noise_sigma = 0.0;
  /// Regions smaller than this many pixels are missed by the detector.
  int min_mask_pixels = 0;
  /// Masks closer than this many pixels count as adjacent for merging.
  int merge_radius = 3;
  std::uint64_t seed = 0;

  bool is_identity() const {
    return p_drop == 0.0 && p_split == 0.0 && p_merge == 0.0 && boundary_jitter == 0 &&
           embedding_noise_sigma == 0.0 && depth_noise_sigma == 0.0 && min_mask_pixels <= 1;
  }
  void validate() const;
};

/// Degrades a frame the way an imperfect segmenter and sensor would. The
/// randomness is a function of (cfg.seed, frame_id) only.
FrameBundle perturb(const FrameBundle& frame, const NoiseConfig& cfg);

/// Splits a mask into two halves across its principal axis.
std::pair<Mask, Mask> split_mask(const Mask& mask, int width);

/// Writes a perturbed sequence, `gt/NNNNNN.labels` rasters and `scene.json`.
void write_simulation(const SyntheticScene& scene, const NoiseConfig& noise, double resolution,
                      const std::filesystem::path& dir);

std::string scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(const std::string& text, const std::string& source);
SyntheticScene load_scene(const std::filesystem::path& sim_dir);

/// "VXGT" u32 width u32 height u32 0, then u32 labels.
void write_label_raster(const std::vector<InstanceId>& labels, int width, int height,
                        const std::filesystem::path& path);
std::vector<InstanceId> read_label_raster(const std::filesystem::path& path, int width, int height);

}  // namespace voxelox
