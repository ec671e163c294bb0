#pragma once

#include <cstdint>
#include <limits>

namespace voxelox {

using InstanceId = std::uint32_t;

/// Background / unobserved marker in label rasters.
inline constexpr InstanceId kNoInstance = std::numeric_limits<InstanceId>::max();

}  // namespace voxelox
