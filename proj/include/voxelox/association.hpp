#pragma once

#include "voxelox/codebook.hpp"
#include "voxelox/frame.hpp"
#include "voxelox/voxel_map.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace voxelox {

enum class CandidateScope {
  /// Only instances holding mass inside the mask's voxel region are scored.
  VoxelLocal,
  /// Every instance in the codebook is scored.
  Global,
};

struct AssociationConfig {
  double geo_weight = 0.5;
  double fea_weight = 0.5;
  double similarity_threshold = 0.4;
  /// Minimum fraction of already-observed voxels for a region to count as seen.
  double observed_fraction_floor = 0.05;
  CandidateScope candidate_scope = CandidateScope::VoxelLocal;

  void validate() const;
};

/// Sorted, duplicate-free voxel region of one mask.
using VoxelSet = std::vector<VoxelKey>;

struct CandidateScore {
  InstanceId id = 0;
  double geometric = 0.0;
  double feature = 0.0;
  double association = 0.0;
};

struct MaskAssociation {
  std::size_t mask_index = 0;
  InstanceId instance = kNoInstance;
  double association = 0.0;
  double geometric = 0.0;
  double feature = 0.0;
  bool is_new = false;
  /// No mask pixel had valid depth; the mask contributes nothing.
  bool skipped = false;
  double observed_fraction = 0.0;
  VoxelSet voxels;
  /// Every candidate scored, ascending by ID.
  std::vector<CandidateScore> candidates;
  /// Filled by the codebook update: visibility ratio and credibility weight.
  double visibility = 0.0;
  double credibility = 0.0;
};

struct AssociationResult {
  std::uint64_t frame_id = 0;
  /// New instances are numbered from here in mask processing order.
  InstanceId first_new_id = 0;
  std::size_t new_instance_count = 0;
  /// One entry per frame mask, in the frame's mask order.
  std::vector<MaskAssociation> masks;
  /// Mask indices in processing order (descending detection score).
  std::vector<std::size_t> processing_order;
};

/// Voxels hit by back-projecting every mask pixel with valid depth.
VoxelSet project_mask(const Mask& mask, const FrameBundle& frame, double resolution);

/// Mean of theta[id] over all voxels of the region; unobserved voxels count as 0.
double geometric_similarity(std::span<const VoxelKey> region, const VoxelMap& map, InstanceId id);

/// Cosine similarity clamped to [0, 1]. Throws on zero norm or dimension mismatch.
double feature_similarity(std::span<const double> map_embedding, std::span<const float> observed);

/// Unclamped cosine similarity.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Assigns every mask to an existing instance or a provisional new ID.
/// Read-only on the map and codebook.
AssociationResult associate_frame(const FrameBundle& frame, const VoxelMap& map,
                                  const Codebook& codebook, const AssociationConfig& cfg,
                                  unsigned threads = 1);

/// Reference association by voxel IoU against each instance's argmax region.
AssociationResult baseline_associate_iou(const FrameBundle& frame, const VoxelMap& map,
                                         double iou_threshold, unsigned threads = 1);

/// Appends one JSON object per mask to `out`.
void write_association_log(std::ostream& out, const AssociationResult& result);

}  // namespace voxelox
