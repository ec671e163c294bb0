#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They deliberately avoid the library's own helpers.

#include "support.hpp"

#include "voxelox/codebook.hpp"
#include "voxelox/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace vtest {

struct OracleScore {
  voxelox::InstanceId id = 0;
  double geometric = 0.0;
  double feature = 0.0;
  double association = 0.0;
};

struct OracleDecision {
  std::set<voxelox::VoxelKey> voxels;
  bool skipped = false;
  bool is_new = false;
  voxelox::InstanceId instance = voxelox::kNoInstance;
  std::vector<OracleScore> scores;
};

inline std::set<voxelox::VoxelKey> oracle_region(const voxelox::MaskObservation& obs,
                                                 const voxelox::FrameBundle& frame, double res) {
  std::set<voxelox::VoxelKey> out;
  for (const auto p : obs.mask.to_indices()) {
    if (frame.depth_mm[p] == 0) continue;
    const int u = static_cast<int>(p % static_cast<std::uint32_t>(frame.intrinsics.width));
    const int v = static_cast<int>(p / static_cast<std::uint32_t>(frame.intrinsics.width));
    out.insert(oracle_voxel(u, v, frame.depth_mm[p] / 1000.0, frame.intrinsics, frame.pose, res));
  }
  return out;
}

inline double oracle_clamped_cosine(const std::vector<double>& a, const std::vector<float>& b) {
  long double dot = 0;
  long double na = 0;
  long double nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<long double>(a[k]) * b[k];
    na += static_cast<long double>(a[k]) * a[k];
    nb += static_cast<long double>(b[k]) * b[k];
  }
  const double c = static_cast<double>(dot / std::sqrt(na * nb));
  return std::min(1.0, std::max(0.0, c));
}

/// Exhaustive association: every (mask, instance) pair is scored. With
/// `global` unset only instances holding counts inside the region compete.
inline std::vector<OracleDecision> oracle_associate(const voxelox::FrameBundle& frame,
                                                    const voxelox::VoxelMap& map,
                                                    const voxelox::Codebook& codebook,
                                                    double geo_weight, double fea_weight,
                                                    double tau, double floor,
                                                    bool global = false) {
  std::vector<OracleDecision> out(frame.masks.size());
  for (std::size_t i = 0; i < frame.masks.size(); ++i) {
    OracleDecision& d = out[i];
    d.voxels = oracle_region(frame.masks[i], frame, map.resolution());
    if (d.voxels.empty()) {
      d.skipped = true;
      continue;
    }
    std::size_t observed = 0;
    for (const auto& key : d.voxels) observed += map.find(key) != nullptr ? 1 : 0;
    if (static_cast<double>(observed) / static_cast<double>(d.voxels.size()) < floor) {
      d.is_new = true;
      continue;
    }
    for (const auto& [id, record] : codebook.records()) {
      OracleScore s;
      s.id = id;
      long double sum = 0;
      bool has_mass = false;
      for (const auto& key : d.voxels) {
        const auto* cell = map.find(key);
        if (cell == nullptr) continue;
        std::uint64_t total = 0;
        std::uint64_t mine = 0;
        for (const auto& e : cell->entries()) {
          total += e.count;
          if (e.id == id) mine = e.count;
        }
        has_mass = has_mass || mine > 0;
        sum += static_cast<long double>(mine) / static_cast<long double>(total);
      }
      if (!global && !has_mass) continue;
      s.geometric = static_cast<double>(sum / static_cast<long double>(d.voxels.size()));
      s.feature = oracle_clamped_cosine(record.embedding, frame.masks[i].feature);
      s.association = geo_weight * s.geometric + fea_weight * s.feature;
      d.scores.push_back(s);
    }
    const OracleScore* best = nullptr;
    for (const auto& s : d.scores) {
      if (best == nullptr || s.association > best->association) best = &s;
    }
    if (best != nullptr && best->association >= tau) {
      d.instance = best->id;
    } else {
      d.is_new = true;
    }
  }
  // New instances are numbered in order of descending detection score,
  // ties by mask position.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < out.size(); ++i) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame.masks[a].detection_score > frame.masks[b].detection_score;
  });
  voxelox::InstanceId next = map.next_instance_id();
  for (const auto i : order) {
    if (!out[i].skipped && out[i].is_new) out[i].instance = next++;
  }
  return out;
}

struct ToyCase {
  voxelox::VoxelMap map{0.04};
  voxelox::Codebook codebook;
  voxelox::FrameBundle frame;
};

/// Random map inside a 5x5x5 block with up to four instances, and a 5x5
/// frame of up to four masks that looks into the block. The camera is off
/// the voxel grid so no pixel lands exactly on a cell boundary.
inline ToyCase make_toy_case(std::mt19937_64& rng, std::size_t dim = 4) {
  ToyCase t;
  t.codebook = voxelox::Codebook(dim);
  std::normal_distribution<float> gauss(0.0F, 1.0F);
  const int n_inst = std::uniform_int_distribution<int>(1, 4)(rng);
  for (int g = 0; g < n_inst; ++g) {
    const auto id = t.map.mint_instance();
    std::vector<float> f(dim);
    for (auto& v : f) v = gauss(rng);
    t.codebook.create(id, f, 1.0, std::nullopt);
  }
  std::bernoulli_distribution occupied(0.6);
  std::uniform_int_distribution<int> hits(1, 6);
  std::uniform_int_distribution<voxelox::InstanceId> inst(0, static_cast<voxelox::InstanceId>(n_inst - 1));
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 5; ++y) {
      for (int z = 0; z < 5; ++z) {
        if (!occupied(rng)) continue;
        const int n = hits(rng);
        for (int k = 0; k < n; ++k) t.map.increment({x, y, z}, inst(rng));
      }
    }
  }

  auto& f = t.frame;
  f.intrinsics = {26.3, 24.7, 0.37, 0.61, 5, 5};
  f.pose.translation = Eigen::Vector3d(0.013, 0.017, -0.987);
  std::uniform_int_distribution<int> depth(1000, 1190);
  f.depth_mm.resize(25);
  for (auto& d : f.depth_mm) d = static_cast<std::uint16_t>(depth(rng));
  std::vector<std::uint32_t> pixels(25);
  for (std::uint32_t p = 0; p < 25; ++p) pixels[p] = p;
  std::shuffle(pixels.begin(), pixels.end(), rng);
  std::uniform_real_distribution<float> score(0.0F, 1.0F);
  const int n_masks = std::uniform_int_distribution<int>(1, 4)(rng);
  const std::size_t per = 25 / static_cast<std::size_t>(n_masks);
  for (int m = 0; m < n_masks; ++m) {
    std::vector<std::uint32_t> px(pixels.begin() + static_cast<long>(m * per),
                                  pixels.begin() + static_cast<long>((m + 1) * per));
    std::vector<float> feat(dim);
    for (auto& v : feat) v = gauss(rng);
    f.masks.push_back(observation(px, feat, score(rng)));
  }
  return t;
}

/// |A n B| / |A u B| over ordered sets.
inline double oracle_iou(const std::set<voxelox::VoxelKey>& a, const std::set<voxelox::VoxelKey>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& k : a) inter += b.count(k);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace vtest
