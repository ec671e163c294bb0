#include "voxelox/voxel_map.hpp"

#include "voxelox/codebook.hpp"
#include "voxelox/error.hpp"

#include <algorithm>
#include <cstring>

namespace voxelox {

std::uint64_t VoxelState::total() const {
  std::uint64_t sum = 0;
  for (const auto& e : entries_) sum += e.count;
  return sum;
}

std::uint32_t VoxelState::count(InstanceId id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.count;
  }
  return 0;
}

double VoxelState::theta(InstanceId id) const {
  const std::uint32_t c = count(id);
  return c == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(total());
}

InstanceId VoxelState::argmax() const {
  // Entries are sorted by ID, so the first maximum is the smallest ID.
  const CountEntry* best = &entries_.front();
  for (const auto& e : entries_) {
    if (e.count > best->count) best = &e;
  }
  return best->id;
}

double VoxelState::max_theta() const {
  std::uint32_t best = 0;
  for (const auto& e : entries_) best = std::max(best, e.count);
  return static_cast<double>(best) / static_cast<double>(total());
}

void VoxelState::add(InstanceId id, std::uint32_t amount) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const CountEntry& e, InstanceId v) { return e.id < v; });
  if (it != entries_.end() && it->id == id) {
    it->count += amount;
  } else {
    entries_.insert(it, CountEntry{id, amount});
  }
}

std::uint32_t VoxelState::take(InstanceId id) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [id](const CountEntry& e) { return e.id == id; });
  if (it == entries_.end()) return 0;
  const std::uint32_t c = it->count;
  entries_.erase(it);
  return c;
}

InstanceVector instance_vector(const VoxelState& state) {
  if (state.empty()) throw_validation("instance_vector: voxel is unobserved");
  const double total = static_cast<double>(state.total());
  InstanceVector theta;
  theta.reserve(state.entries().size());
  for (const auto& e : state.entries()) theta.emplace_back(e.id, e.count / total);
  return theta;
}

VoxelMap::VoxelMap(double resolution) : resolution_(resolution) {
  if (!(resolution > 0.0)) throw_validation("voxel map: resolution must be positive");
}

InstanceId VoxelMap::mint_instance() {
  if (next_id_ == kNoInstance) throw_validation("voxel map: instance IDs exhausted");
  extents_.push_back(0);
  retired_.push_back(false);
  return next_id_++;
}

std::vector<InstanceId> VoxelMap::live_instances() const {
  std::vector<InstanceId> ids;
  for (InstanceId id = 0; id < next_id_; ++id) {
    if (!retired_[id]) ids.push_back(id);
  }
  return ids;
}

void VoxelMap::check_live(InstanceId id) const {
  if (!is_live(id)) throw_validation("voxel map: unknown instance " + std::to_string(id));
}

void VoxelMap::increment(const VoxelKey& key, InstanceId id) {
  check_live(id);
  VoxelState& cell = cells_[key];
  const InstanceId before = cell.empty() ? kNoInstance : cell.argmax();
  cell.add(id);
  ++total_count_;
  const InstanceId after = cell.argmax();
  if (before != after) {
    if (before != kNoInstance) --extents_[before];
    ++extents_[after];
  }
}

std::uint64_t VoxelMap::extent(InstanceId id) const {
  return id < next_id_ ? extents_[id] : 0;
}

void VoxelMap::merge_counts(InstanceId src, InstanceId dst) {
  if (src == dst) throw_validation("merge: source and destination are the same instance");
  check_live(src);
  check_live(dst);
  for (auto& [key, cell] : cells_) {
    const std::uint32_t moved = cell.count(src);
    if (moved == 0) continue;
    const InstanceId before = cell.argmax();
    cell.take(src);
    cell.add(dst, moved);
    const InstanceId after = cell.argmax();
    if (before != after) {
      --extents_[before];
      ++extents_[after];
    }
  }
  retired_[src] = true;
}

std::vector<std::uint64_t> VoxelMap::recount_extents() const {
  std::vector<std::uint64_t> counts(next_id_, 0);
  for (const auto& [key, cell] : cells_) {
    if (!cell.empty()) ++counts[cell.argmax()];
  }
  return counts;
}

std::vector<VoxelKey> VoxelMap::sorted_keys() const {
  std::vector<VoxelKey> keys;
  keys.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  }
};

}  // namespace

std::uint64_t VoxelMap::fingerprint() const {
  Fnv1a f;
  std::uint64_t res_bits;
  static_assert(sizeof(res_bits) == sizeof(resolution_));
  std::memcpy(&res_bits, &resolution_, sizeof(res_bits));
  f.mix(res_bits);
  f.mix(next_id_);
  for (InstanceId id = 0; id < next_id_; ++id) f.mix(retired_[id] ? 1 : 0);
  for (const auto& key : sorted_keys()) {
    f.mix(static_cast<std::uint32_t>(key.ix));
    f.mix(static_cast<std::uint32_t>(key.iy));
    f.mix(static_cast<std::uint32_t>(key.iz));
    for (const auto& e : cells_.at(key).entries()) {
      f.mix(e.id);
      f.mix(e.count);
    }
  }
  return f.h;
}

VoxelMap VoxelMap::restore(double resolution, InstanceId next_id,
                           const std::vector<InstanceId>& retired,
                           std::vector<std::pair<VoxelKey, VoxelState>> cells) {
  VoxelMap map(resolution);
  map.next_id_ = next_id;
  map.retired_.assign(next_id, false);
  for (const InstanceId id : retired) {
    if (id >= next_id) throw_validation("snapshot: retired instance beyond next_instance_id");
    map.retired_[id] = true;
  }
  map.cells_.reserve(cells.size());
  for (auto& [key, state] : cells) {
    if (state.empty()) throw_validation("snapshot: empty voxel state");
    for (const auto& e : state.entries()) {
      if (e.count == 0) throw_validation("snapshot: zero count");
      if (!map.is_live(e.id)) throw_validation("snapshot: voxel references unknown instance");
      map.total_count_ += e.count;
    }
    if (!map.cells_.emplace(key, std::move(state)).second) {
      throw_validation("snapshot: duplicate voxel key");
    }
  }
  map.extents_ = map.recount_extents();
  return map;
}

std::vector<InstanceId> VoxelMap::retired_instances() const {
  std::vector<InstanceId> ids;
  for (InstanceId id = 0; id < next_id_; ++id) {
    if (retired_[id]) ids.push_back(id);
  }
  return ids;
}

bool VoxelMap::operator==(const VoxelMap& other) const {
  return resolution_ == other.resolution_ && next_id_ == other.next_id_ &&
         retired_ == other.retired_ && extents_ == other.extents_ &&
         total_count_ == other.total_count_ && cells_ == other.cells_;
}

VoxelTable<double> confidence(const VoxelMap& map) {
  VoxelTable<double> out;
  out.reserve(map.size());
  for (const auto& key : map.sorted_keys()) out.emplace_back(key, map.find(key)->max_theta());
  return out;
}

VoxelTable<InstanceId> argmax_labels(const VoxelMap& map) {
  VoxelTable<InstanceId> out;
  out.reserve(map.size());
  for (const auto& key : map.sorted_keys()) out.emplace_back(key, map.find(key)->argmax());
  return out;
}

void merge_instances(VoxelMap& map, Codebook& codebook, InstanceId src, InstanceId dst) {
  if (src == dst) throw_validation("merge: source and destination are the same instance");
  if (!map.is_live(src) || !map.is_live(dst)) {
    throw_validation("merge: both instances must exist in the map");
  }
  if (!codebook.contains(src) || !codebook.contains(dst)) {
    throw_validation("merge: both instances must exist in the codebook");
  }
  map.merge_counts(src, dst);
  codebook.merge(src, dst);
}

}  // namespace voxelox
