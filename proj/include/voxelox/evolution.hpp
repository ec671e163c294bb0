#pragma once

#include "voxelox/association.hpp"
#include "voxelox/codebook.hpp"
#include "voxelox/frame.hpp"
#include "voxelox/voxel_map.hpp"

#include <cstdint>
#include <string>

namespace voxelox {

enum class AssociationBackend {
  Probabilistic,
  Iou,
};

struct IntegrationConfig {
  AssociationConfig association;
  AssociationBackend backend = AssociationBackend::Probabilistic;
  double iou_threshold = 0.5;
  unsigned threads = 1;
};

struct FrameReport {
  std::uint64_t frame_id = 0;
  std::size_t masks_total = 0;
  std::size_t masks_processed = 0;
  std::size_t masks_skipped = 0;
  std::size_t masks_associated = 0;
  std::size_t new_instances = 0;
  std::size_t instance_count = 0;
  std::size_t voxel_count = 0;
  std::uint64_t total_count = 0;
  std::uint64_t counts_added = 0;
  double latency_ms = 0.0;

  std::string to_json() const;
};

/// Adds one count of the assigned instance to every voxel of every mask
/// region, minting the result's provisional new instances first.
void update_voxels(VoxelMap& map, const AssociationResult& result);

/// Fraction of the instance's argmax extent covered by the region, clamped
/// to 1. Brand-new or zero-extent instances see everything (1.0).
double visibility_ratio(std::size_t region_size, const VoxelMap& map, InstanceId id);

/// Fuses each mask feature into its instance record with credibility
/// A * R. New instances start with weight 1. Visibility is measured against
/// `map` as given, which should be the pre-frame state. Records the
/// visibility and credibility of each mask back into `result`.
void update_codebook(Codebook& codebook, AssociationResult& result, const FrameBundle& frame,
                     const VoxelMap& map);

/// Association followed by map evolution for one frame. Validation errors
/// are raised before anything is modified.
FrameReport integrate_frame(VoxelMap& map, Codebook& codebook, const FrameBundle& frame,
                            const IntegrationConfig& cfg, AssociationResult* result_out = nullptr);

}  // namespace voxelox
