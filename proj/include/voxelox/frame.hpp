#pragma once

#include "voxelox/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxelox {

/// Run of consecutive pixels in row-major order, starting at linear index `start`.
struct PixelRun {
  std::uint32_t start = 0;
  std::uint32_t length = 0;

  bool operator==(const PixelRun&) const = default;
};

/// Run-length encoded pixel set over a row-major raster.
class Mask {
public:
  Mask() = default;

  /// Builds a canonical mask (sorted, merged runs) from arbitrary linear indices.
  static Mask from_indices(std::vector<std::uint32_t> indices);
  /// Builds from a boolean raster of `width * height` entries.
  static Mask from_raster(std::span<const std::uint8_t> raster);
  /// Adopts runs as stored. Call `check_runs` before trusting them.
  static Mask from_runs(std::vector<PixelRun> runs) {
    Mask m;
    m.runs_ = std::move(runs);
    return m;
  }

  const std::vector<PixelRun>& runs() const { return runs_; }
  std::size_t pixel_count() const;
  bool empty() const { return runs_.empty(); }

  /// Largest linear index + 1, or 0 for an empty mask.
  std::uint64_t extent_end() const;

  /// Empty string when runs are strictly increasing, non-overlapping and
  /// non-empty; otherwise a description of the defect.
  std::string check_runs() const;

  std::vector<std::uint32_t> to_indices() const;

  template <typename F>
  void for_each_pixel(F&& f) const {
    for (const auto& run : runs_) {
      const std::uint32_t end = run.start + run.length;
      for (std::uint32_t i = run.start; i < end; ++i) {
        f(i);
      }
    }
  }

  bool operator==(const Mask&) const = default;

private:
  std::vector<PixelRun> runs_;
};

struct MaskObservation {
  Mask mask;
  std::vector<float> feature;
  std::optional<std::string> caption;
  float detection_score = 1.0F;

  bool operator==(const MaskObservation&) const = default;
};

/// One observation: depth raster, camera pose, intrinsics and the detected masks.
struct FrameBundle {
  std::uint64_t frame_id = 0;
  CameraIntrinsics intrinsics;
  Pose pose;
  /// Row-major depth in millimeters; 0 marks an invalid pixel.
  std::vector<std::uint16_t> depth_mm;
  std::vector<MaskObservation> masks;
  /// When set, masks may share pixels and the last-listed mask owns them.
  bool masks_may_overlap = false;

  double depth_m(std::size_t index) const { return depth_mm[index] * 1e-3; }

  bool operator==(const FrameBundle&) const = default;
};

/// Eagerly checks every frame invariant. `embedding_dim` of 0 accepts any
/// uniform dimension. Errors name the frame and field.
void validate_frame(const FrameBundle& frame, std::size_t embedding_dim = 0);

/// Pixel ownership raster: mask index owning each pixel, or -1. With
/// overlap allowed the last-listed mask wins.
std::vector<std::int32_t> mask_owner_raster(const FrameBundle& frame);

inline std::uint16_t depth_to_mm(double meters) {
  if (!(meters > 0.0)) return 0;
  const double mm = std::round(meters * 1000.0);
  if (mm < 1.0 || mm > 65535.0) return 0;
  return static_cast<std::uint16_t>(mm);
}

}  // namespace voxelox
