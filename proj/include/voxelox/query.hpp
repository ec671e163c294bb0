#pragma once

#include "voxelox/codebook.hpp"
#include "voxelox/frame.hpp"
#include "voxelox/voxel_map.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace voxelox {

/// Map labels re-projected into a camera view.
struct RenderedMask {
  int width = 0;
  int height = 0;
  /// Argmax instance per pixel, kNoInstance for background or unobserved.
  std::vector<InstanceId> labels;
  /// Max-theta per pixel, 0 where the label is kNoInstance.
  std::vector<float> confidence;

  bool operator==(const RenderedMask&) const = default;
};

/// Looks up the voxel under each valid depth pixel. Never modifies the map.
RenderedMask render_mask(const VoxelMap& map, const CameraIntrinsics& intr, const Pose& pose,
                         std::span<const std::uint16_t> depth_mm);

/// "VXRM" u32 width u32 height u32 0, then u32 labels, then f32 confidence.
void write_rendered_mask(const RenderedMask& mask, const std::filesystem::path& path);
RenderedMask read_rendered_mask(const std::filesystem::path& path);

struct RetrievalHit {
  InstanceId id = 0;
  double score = 0.0;
  std::size_t rank = 0;
};

/// Top-k instances by cosine similarity to the query (unclamped), ties by
/// smaller ID. Ranks are 1-based.
std::vector<RetrievalHit> retrieve(const Codebook& codebook, std::span<const double> query,
                                   std::size_t k);

struct ClassEmbedding {
  int class_id = 0;
  std::vector<double> embedding;
};

/// Nearest class embedding (by cosine) for every instance; ties by smaller class ID.
std::map<InstanceId, int> semantic_labels(const Codebook& codebook,
                                          std::span<const ClassEmbedding> classes);

enum class ExportFormat {
  PointList,
  LabeledVoxels,
};

/// Writes `map.ply` (PointList) or `voxels.bin` (LabeledVoxels) plus
/// `codebook.json` into `dir`. Output is byte-deterministic.
void export_map(const VoxelMap& map, const Codebook& codebook, const std::filesystem::path& dir,
                ExportFormat format);

/// Deterministic display color for an instance.
std::array<std::uint8_t, 3> instance_color(InstanceId id);

struct LabeledVoxel {
  VoxelKey key;
  InstanceId label = kNoInstance;
  double confidence = 0.0;
  /// Up to three largest theta entries, padded with (kNoInstance, 0).
  std::array<std::pair<InstanceId, double>, 3> top{};

  bool operator==(const LabeledVoxel&) const = default;
};

struct LabeledVoxelFile {
  double resolution = 0.0;
  std::vector<LabeledVoxel> voxels;
};

LabeledVoxelFile read_labeled_voxels(const std::filesystem::path& path);

/// Embedding file: "VXEM" u32 count u32 dim u32 0, then f32 rows.
void write_embedding_file(const std::vector<std::vector<double>>& rows, std::size_t dim,
                          const std::filesystem::path& path);
std::vector<std::vector<double>> read_embedding_file(const std::filesystem::path& path);

/// Codebook as versioned JSON text.
std::string codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(const std::string& text, const std::string& source);

}  // namespace voxelox
