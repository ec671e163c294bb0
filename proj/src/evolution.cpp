#include "voxelox/evolution.hpp"

#include "voxelox/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>

namespace voxelox {

std::string FrameReport::to_json() const {
  nlohmann::json j = {{"frame_id", frame_id},
                      {"masks_total", masks_total},
                      {"masks_processed", masks_processed},
                      {"masks_skipped", masks_skipped},
                      {"masks_associated", masks_associated},
                      {"new_instances", new_instances},
                      {"instance_count", instance_count},
                      {"voxel_count", voxel_count},
                      {"total_count", total_count},
                      {"counts_added", counts_added},
                      {"latency_ms", latency_ms}};
  return j.dump();
}

void update_voxels(VoxelMap& map, const AssociationResult& result) {
  if (result.first_new_id != map.next_instance_id()) {
    throw_validation("update_voxels: association result is stale");
  }
  for (std::size_t k = 0; k < result.new_instance_count; ++k) map.mint_instance();
  for (const auto& m : result.masks) {
    if (m.skipped) continue;
    for (const auto& key : m.voxels) map.increment(key, m.instance);
  }
}

double visibility_ratio(std::size_t region_size, const VoxelMap& map, InstanceId id) {
  if (!map.is_live(id)) return 1.0;
  const std::uint64_t extent = map.extent(id);
  if (extent == 0) return 1.0;
  return std::min(1.0, static_cast<double>(region_size) / static_cast<double>(extent));
}

void update_codebook(Codebook& codebook, AssociationResult& result, const FrameBundle& frame,
                     const VoxelMap& map) {
  for (const std::size_t i : result.processing_order) {
    MaskAssociation& m = result.masks[i];
    if (m.skipped) continue;
    const auto& obs = frame.masks[m.mask_index];
    if (m.is_new) {
      m.visibility = 1.0;
      m.credibility = 1.0;
      codebook.create(m.instance, obs.feature, m.credibility, obs.caption);
    } else {
      m.visibility = visibility_ratio(m.voxels.size(), map, m.instance);
      m.credibility = m.association * m.visibility;
      codebook.fuse(m.instance, obs.feature, m.credibility, obs.caption);
    }
  }
}

FrameReport integrate_frame(VoxelMap& map, Codebook& codebook, const FrameBundle& frame,
                            const IntegrationConfig& cfg, AssociationResult* result_out) {
  const auto start = std::chrono::steady_clock::now();
  validate_frame(frame, codebook.embedding_dim());

  AssociationResult result =
      cfg.backend == AssociationBackend::Iou
          ? baseline_associate_iou(frame, map, cfg.iou_threshold, cfg.threads)
          : associate_frame(frame, map, codebook, cfg.association, cfg.threads);

  // The codebook sees the pre-frame extents, so it is updated before the voxels.
  update_codebook(codebook, result, frame, map);
  const std::uint64_t before = map.total_count();
  update_voxels(map, result);

  FrameReport report;
  report.frame_id = frame.frame_id;
  report.masks_total = frame.masks.size();
  for (const auto& m : result.masks) {
    if (m.skipped) {
      ++report.masks_skipped;
    } else {
      ++report.masks_processed;
      if (!m.is_new) ++report.masks_associated;
    }
  }
  report.new_instances = result.new_instance_count;
  report.instance_count = codebook.size();
  report.voxel_count = map.size();
  report.total_count = map.total_count();
  report.counts_added = map.total_count() - before;
  report.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (result_out != nullptr) *result_out = std::move(result);
  return report;
}

}  // namespace voxelox
