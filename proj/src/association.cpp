#include "voxelox/association.hpp"

#include "voxelox/detail/parallel.hpp"
#include "voxelox/error.hpp"

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace voxelox {

void AssociationConfig::validate() const {
  if (!(geo_weight >= 0.0) || !(fea_weight >= 0.0) ||
      std::abs(geo_weight + fea_weight - 1.0) > 1e-9) {
    throw_validation("association: weights must be non-negative and sum to 1");
  }
  if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0)) {
    throw_validation("association: similarity threshold must lie in (0,1)");
  }
  if (!(observed_fraction_floor >= 0.0 && observed_fraction_floor < 1.0)) {
    throw_validation("association: observed fraction floor must lie in [0,1)");
  }
}

VoxelSet project_mask(const Mask& mask, const FrameBundle& frame, double resolution) {
  const auto& intr = frame.intrinsics;
  const auto width = static_cast<std::uint32_t>(intr.width);
  const Eigen::Matrix3d& rot = frame.pose.rotation;
  const Eigen::Vector3d& trans = frame.pose.translation;

  absl::flat_hash_set<VoxelKey> seen;
  VoxelKey last{};
  bool have_last = false;
  mask.for_each_pixel([&](std::uint32_t index) {
    const std::uint16_t mm = frame.depth_mm[index];
    if (mm == 0) return;
    const int u = static_cast<int>(index % width);
    const int v = static_cast<int>(index / width);
    const Eigen::Vector3d p = rot * (frame.depth_m(index) * pixel_ray(u, v, intr)) + trans;
    const VoxelKey key = voxelize(p, resolution);
    if (have_last && key == last) return;
    last = key;
    have_last = true;
    seen.insert(key);
  });
  VoxelSet out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end());
  return out;
}

double geometric_similarity(std::span<const VoxelKey> region, const VoxelMap& map, InstanceId id) {
  if (region.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& key : region) {
    if (const VoxelState* cell = map.find(key)) sum += cell->theta(id);
  }
  return sum / static_cast<double>(region.size());
}

namespace {

template <typename A, typename B>
double raw_cosine(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw_validation("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a[k];
    const double y = b[k];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw_validation("cosine: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> processing_order(const FrameBundle& frame) {
  std::vector<std::size_t> order(frame.masks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame.masks[a].detection_score > frame.masks[b].detection_score;
  });
  return order;
}

/// Masks restricted to the pixels each one owns (last-listed wins).
std::vector<Mask> owned_masks(const FrameBundle& frame) {
  const auto owner = mask_owner_raster(frame);
  std::vector<std::vector<std::uint32_t>> pixels(frame.masks.size());
  for (std::uint32_t p = 0; p < owner.size(); ++p) {
    if (owner[p] >= 0) pixels[static_cast<std::size_t>(owner[p])].push_back(p);
  }
  std::vector<Mask> out;
  out.reserve(pixels.size());
  for (auto& px : pixels) out.push_back(Mask::from_indices(std::move(px)));
  return out;
}

/// Projects every mask and hands (index, mask association) to `score`, then
/// numbers new instances serially in processing order.
template <typename ScoreFn>
AssociationResult run_association(const FrameBundle& frame, const VoxelMap& map,
                                  unsigned threads, ScoreFn&& score) {
  AssociationResult result;
  result.frame_id = frame.frame_id;
  result.first_new_id = map.next_instance_id();
  result.processing_order = processing_order(frame);
  result.masks.resize(frame.masks.size());

  std::vector<Mask> owned;
  if (frame.masks_may_overlap) owned = owned_masks(frame);

  detail::parallel_for(frame.masks.size(), threads, [&](std::size_t i) {
    MaskAssociation& m = result.masks[i];
    m.mask_index = i;
    const Mask& mask = frame.masks_may_overlap ? owned[i] : frame.masks[i].mask;
    m.voxels = project_mask(mask, frame, map.resolution());
    if (m.voxels.empty()) {
      m.skipped = true;
      return;
    }
    std::size_t observed = 0;
    for (const auto& key : m.voxels) observed += map.find(key) != nullptr ? 1 : 0;
    m.observed_fraction = static_cast<double>(observed) / static_cast<double>(m.voxels.size());
    score(i, m);
  });

  InstanceId next = result.first_new_id;
  for (const std::size_t i : result.processing_order) {
    MaskAssociation& m = result.masks[i];
    if (m.skipped || !m.is_new) continue;
    m.instance = next++;
  }
  result.new_instance_count = next - result.first_new_id;
  return result;
}

}  // namespace

double feature_similarity(std::span<const double> map_embedding, std::span<const float> observed) {
  return std::clamp(raw_cosine(map_embedding, observed), 0.0, 1.0);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return raw_cosine(a, b);
}

AssociationResult associate_frame(const FrameBundle& frame, const VoxelMap& map,
                                  const Codebook& codebook, const AssociationConfig& cfg,
                                  unsigned threads) {
  cfg.validate();
  return run_association(frame, map, threads, [&](std::size_t i, MaskAssociation& m) {
    if (m.observed_fraction < cfg.observed_fraction_floor) {
      m.is_new = true;
      return;
    }
    const auto& feature = frame.masks[i].feature;

    // Sum of theta per instance over the region, in sorted voxel order.
    absl::flat_hash_map<InstanceId, double> mass;
    for (const auto& key : m.voxels) {
      const VoxelState* cell = map.find(key);
      if (cell == nullptr) continue;
      const double total = static_cast<double>(cell->total());
      for (const auto& e : cell->entries()) mass[e.id] += e.count / total;
    }

    std::vector<InstanceId> ids;
    if (cfg.candidate_scope == CandidateScope::Global) {
      for (const auto& [id, rec] : codebook.records()) ids.push_back(id);
    } else {
      for (const auto& [id, sum] : mass) ids.push_back(id);
      std::sort(ids.begin(), ids.end());
    }

    const double n = static_cast<double>(m.voxels.size());
    for (const InstanceId id : ids) {
      const CodebookRecord* rec = codebook.find(id);
      if (rec == nullptr) {
        throw_validation("association: instance " + std::to_string(id) + " missing from codebook");
      }
      CandidateScore c;
      c.id = id;
      auto it = mass.find(id);
      c.geometric = it == mass.end() ? 0.0 : it->second / n;
      c.feature = feature_similarity(rec->embedding, feature);
      c.association = cfg.geo_weight * c.geometric + cfg.fea_weight * c.feature;
      m.candidates.push_back(c);
    }

    const CandidateScore* best = nullptr;
    for (const auto& c : m.candidates) {
      if (best == nullptr || c.association > best->association) best = &c;
    }
    if (best != nullptr && best->association >= cfg.similarity_threshold) {
      m.instance = best->id;
      m.association = best->association;
      m.geometric = best->geometric;
      m.feature = best->feature;
    } else {
      m.is_new = true;
    }
  });
}

AssociationResult baseline_associate_iou(const FrameBundle& frame, const VoxelMap& map,
                                         double iou_threshold, unsigned threads) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw_validation("baseline association: IoU threshold must lie in (0,1]");
  }
  return run_association(frame, map, threads, [&](std::size_t, MaskAssociation& m) {
    absl::flat_hash_map<InstanceId, std::uint64_t> overlap;
    for (const auto& key : m.voxels) {
      if (const VoxelState* cell = map.find(key)) ++overlap[cell->argmax()];
    }
    std::vector<InstanceId> ids;
    for (const auto& [id, n] : overlap) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    const double region = static_cast<double>(m.voxels.size());
    for (const InstanceId id : ids) {
      const double inter = static_cast<double>(overlap[id]);
      const double uni = region + static_cast<double>(map.extent(id)) - inter;
      CandidateScore c;
      c.id = id;
      c.geometric = inter / uni;
      c.association = c.geometric;
      m.candidates.push_back(c);
    }
    const CandidateScore* best = nullptr;
    for (const auto& c : m.candidates) {
      if (best == nullptr || c.association > best->association) best = &c;
    }
    if (best != nullptr && best->association >= iou_threshold) {
      m.instance = best->id;
      m.association = best->association;
      m.geometric = best->geometric;
    } else {
      m.is_new = true;
    }
  });
}

void write_association_log(std::ostream& out, const AssociationResult& result) {
  for (const auto& m : result.masks) {
    nlohmann::json j = {{"frame_id", result.frame_id},
                        {"mask", m.mask_index},
                        {"instance", m.skipped ? nlohmann::json(nullptr) : nlohmann::json(m.instance)},
                        {"A", m.association},
                        {"S_geo", m.geometric},
                        {"S_fea", m.feature},
                        {"is_new", m.is_new},
                        {"skipped", m.skipped},
                        {"voxels", m.voxels.size()}};
    out << j.dump() << '\n';
  }
}

}  // namespace voxelox
