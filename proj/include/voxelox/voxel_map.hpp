#pragma once

#include "voxelox/geometry.hpp"
#include "voxelox/instance_id.hpp"

#include <absl/container/flat_hash_map.h>
#include <absl/container/inlined_vector.h>

#include <cstdint>
#include <utility>
#include <vector>

namespace voxelox {

class Codebook;

struct CountEntry {
  InstanceId id = 0;
  std::uint32_t count = 0;

  bool operator==(const CountEntry&) const = default;
};

/// Dirichlet counts of one voxel, sparse over instance IDs and sorted by ID.
/// Stored counts are always >= 1.
class VoxelState {
public:
  using Entries = absl::InlinedVector<CountEntry, 2>;

  const Entries& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::uint64_t total() const;
  std::uint32_t count(InstanceId id) const;

  /// Posterior mean for `id`; 0 when the voxel never saw it.
  double theta(InstanceId id) const;
  /// Instance with the largest count; smallest ID wins ties. Requires !empty().
  InstanceId argmax() const;
  /// Largest entry of the instance vector. Requires !empty().
  double max_theta() const;

  void add(InstanceId id, std::uint32_t amount = 1);
  /// Removes and returns the count held by `id`.
  std::uint32_t take(InstanceId id);

  bool operator==(const VoxelState&) const = default;

private:
  Entries entries_;
};

using InstanceVector = std::vector<std::pair<InstanceId, double>>;

/// theta = alpha / sum(alpha) over the instances observed at this voxel.
/// Throws a validation error for an unobserved (empty) state.
InstanceVector instance_vector(const VoxelState& state);

template <typename T>
using VoxelTable = std::vector<std::pair<VoxelKey, T>>;

class VoxelMap {
public:
  using Cells = absl::flat_hash_map<VoxelKey, VoxelState>;

  explicit VoxelMap(double resolution = kDefaultResolution);

  double resolution() const { return resolution_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  const Cells& cells() const { return cells_; }
  void reserve(std::size_t n) { cells_.reserve(n); }

  const VoxelState* find(const VoxelKey& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
  }

  InstanceId next_instance_id() const { return next_id_; }
  InstanceId mint_instance();
  bool is_live(InstanceId id) const { return id < next_id_ && !retired_[id]; }
  std::vector<InstanceId> live_instances() const;

  /// Adds one observation of `id` at `key`, creating the cell when absent.
  void increment(const VoxelKey& key, InstanceId id);

  /// Number of voxels whose argmax is `id` (cached).
  std::uint64_t extent(InstanceId id) const;
  /// Sum of all counts in the map.
  std::uint64_t total_count() const { return total_count_; }

  /// Moves all counts of `src` onto `dst` and retires `src`.
  void merge_counts(InstanceId src, InstanceId dst);

  /// Per-instance argmax voxel counts recomputed from the cells.
  std::vector<std::uint64_t> recount_extents() const;
  /// True when the cached extents equal a full recount.
  bool audit_extents() const { return recount_extents() == extents_; }

  std::vector<VoxelKey> sorted_keys() const;

  /// 64-bit digest of the full map content, independent of hash-table order.
  std::uint64_t fingerprint() const;

  /// Restores state from a snapshot. Retired IDs are given explicitly.
  static VoxelMap restore(double resolution, InstanceId next_id,
                          const std::vector<InstanceId>& retired,
                          std::vector<std::pair<VoxelKey, VoxelState>> cells);
  std::vector<InstanceId> retired_instances() const;

  bool operator==(const VoxelMap& other) const;

private:
  void check_live(InstanceId id) const;

  double resolution_;
  Cells cells_;
  InstanceId next_id_ = 0;
  std::vector<std::uint64_t> extents_;
  std::vector<bool> retired_;
  std::uint64_t total_count_ = 0;
};

/// Per observed voxel, the largest instance-vector entry. Sorted by key.
VoxelTable<double> confidence(const VoxelMap& map);

/// Per observed voxel, the most probable instance (smallest ID on ties). Sorted by key.
VoxelTable<InstanceId> argmax_labels(const VoxelMap& map);

/// Folds `src` into `dst`: voxel mass moves to `dst`, codebook records are
/// fused by weight and `src` is retired from both.
void merge_instances(VoxelMap& map, Codebook& codebook, InstanceId src, InstanceId dst);

}  // namespace voxelox
