#pragma once

#include "voxelox/codebook.hpp"
#include "voxelox/simulate.hpp"
#include "voxelox/voxel_map.hpp"

#include <absl/container/flat_hash_map.h>

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace voxelox {

struct GroundTruthVoxel {
  InstanceId instance = kNoInstance;
  int class_id = -1;
};

struct GroundTruthMap {
  double resolution = 0.0;
  absl::flat_hash_map<VoxelKey, GroundTruthVoxel> voxels;
};

/// Voxelizes the surfaces visible along the scene trajectory, labeling each
/// voxel by the instance most of its clean samples belong to.
GroundTruthMap build_ground_truth(const SyntheticScene& scene, double resolution);

/// One instance as a voxel set with a detection confidence.
struct InstanceRegion {
  InstanceId id = 0;
  double confidence = 1.0;
  /// Sorted, duplicate-free.
  std::vector<VoxelKey> voxels;
};

/// Argmax regions of the map, confidence = mean max-theta over the region.
std::vector<InstanceRegion> predicted_instances(const VoxelMap& map);
std::vector<InstanceRegion> ground_truth_instances(const GroundTruthMap& gt);

/// |A n B| / |A u B|, 0 when both are empty.
double voxel_iou(std::span<const VoxelKey> a, std::span<const VoxelKey> b);

struct ApScores {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap25 = 0.0;
};

/// Greedy one-to-one matching by descending confidence at an IoU threshold,
/// 101-point interpolated precision.
double average_precision_at(std::span<const InstanceRegion> predictions,
                            std::span<const InstanceRegion> ground_truth, double iou_threshold);

/// AP averaged over IoU 0.50:0.05:0.95, plus AP50 and AP25. Throws on empty GT.
ApScores instance_ap(std::span<const InstanceRegion> predictions,
                     std::span<const InstanceRegion> ground_truth);

struct SemanticScores {
  double miou = 0.0;
  double macc = 0.0;
};

/// Per-class IoU and accuracy over voxels labeled in either map, averaged
/// over classes present in the ground truth.
SemanticScores semantic_scores(const absl::flat_hash_map<VoxelKey, int>& predicted,
                               const absl::flat_hash_map<VoxelKey, int>& ground_truth);

struct RetrievalQuery {
  std::vector<double> embedding;
  /// Instances that count as a correct answer.
  std::vector<InstanceId> targets;
};

/// Fraction of queries with a target among the top-k retrieved, per k.
/// Throws on empty queries or targets missing from the codebook.
std::vector<double> retrieval_recall(const Codebook& codebook,
                                     std::span<const RetrievalQuery> queries,
                                     std::span<const std::size_t> ks);

struct InstanceDiagnostic {
  InstanceId gt_instance = 0;
  std::size_t gt_voxels = 0;
  InstanceId best_prediction = kNoInstance;
  double best_iou = 0.0;
};

struct EvalReport {
  ApScores instance;
  SemanticScores semantic;
  std::map<std::string, std::array<double, 3>> recall;
  std::size_t predicted_instances = 0;
  std::size_t gt_instances = 0;
  std::vector<InstanceDiagnostic> diagnostics;

  std::string to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  /// Gaussian noise on the class embeddings for the "noisy" retrieval queries.
  double noisy_query_sigma = 0.2;
  std::uint64_t seed = 0;
};

/// Full metric suite of a map against a synthetic scene.
EvalReport evaluate_map(const VoxelMap& map, const Codebook& codebook, const SyntheticScene& scene,
                        const GroundTruthMap& gt, const EvalOptions& options = {});

/// Evaluates the ground truth as if it were a prediction (sanity check).
EvalReport evaluate_ground_truth(const SyntheticScene& scene, const GroundTruthMap& gt,
                                 const EvalOptions& options = {});

}  // namespace voxelox
