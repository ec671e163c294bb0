#pragma once

#include "voxelox/codebook.hpp"
#include "voxelox/voxel_map.hpp"

#include <filesystem>

namespace voxelox {

// Snapshot directory: `map.bin` with full voxel counts and `codebook.json`.
//
//   map.bin  "VXMP" u32 version f64 resolution u32 next_instance_id
//            u32 retired_count, u32 retired ids
//            u64 cell_count, then per cell (sorted by key):
//            i32 ix i32 iy i32 iz u32 entries, (u32 id u32 count) * entries

struct Snapshot {
  VoxelMap map;
  Codebook codebook;
};

void save_snapshot(const VoxelMap& map, const Codebook& codebook, const std::filesystem::path& dir);
Snapshot load_snapshot(const std::filesystem::path& dir);

}  // namespace voxelox
