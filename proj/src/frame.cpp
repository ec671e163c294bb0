#include "voxelox/frame.hpp"

#include "voxelox/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxelox {

Mask Mask::from_indices(std::vector<std::uint32_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  Mask m;
  for (const std::uint32_t i : indices) {
    if (!m.runs_.empty() && m.runs_.back().start + m.runs_.back().length == i) {
      ++m.runs_.back().length;
    } else {
      m.runs_.push_back({i, 1});
    }
  }
  return m;
}

Mask Mask::from_raster(std::span<const std::uint8_t> raster) {
  Mask m;
  for (std::uint32_t i = 0; i < raster.size(); ++i) {
    if (!raster[i]) continue;
    if (!m.runs_.empty() && m.runs_.back().start + m.runs_.back().length == i) {
      ++m.runs_.back().length;
    } else {
      m.runs_.push_back({i, 1});
    }
  }
  return m;
}

std::size_t Mask::pixel_count() const {
  return std::accumulate(runs_.begin(), runs_.end(), std::size_t{0},
                         [](std::size_t acc, const PixelRun& r) { return acc + r.length; });
}

std::uint64_t Mask::extent_end() const {
  if (runs_.empty()) return 0;
  return static_cast<std::uint64_t>(runs_.back().start) + runs_.back().length;
}

std::string Mask::check_runs() const {
  std::uint64_t prev_end = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    const auto& r = runs_[i];
    if (r.length == 0) return "run " + std::to_string(i) + " has zero length";
    if (i > 0 && r.start < prev_end) return "run " + std::to_string(i) + " overlaps or is unsorted";
    prev_end = static_cast<std::uint64_t>(r.start) + r.length;
  }
  return {};
}

std::vector<std::uint32_t> Mask::to_indices() const {
  std::vector<std::uint32_t> out;
  out.reserve(pixel_count());
  for_each_pixel([&](std::uint32_t i) { out.push_back(i); });
  return out;
}

void validate_frame(const FrameBundle& frame, std::size_t embedding_dim) {
  const std::string where = "frame " + std::to_string(frame.frame_id) + ": ";
  try {
    validate(frame.intrinsics);
    validate(frame.pose);
  } catch (const Error& e) {
    throw_validation(where + e.what());
  }
  const std::size_t pixels = frame.intrinsics.pixel_count();
  if (frame.depth_mm.size() != pixels) {
    throw_validation(where + "depth raster has " + std::to_string(frame.depth_mm.size()) +
                     " pixels, intrinsics expect " + std::to_string(pixels));
  }

  std::size_t dim = embedding_dim;
  std::vector<std::uint8_t> claimed;
  if (!frame.masks_may_overlap) claimed.assign(pixels, 0);

  for (std::size_t i = 0; i < frame.masks.size(); ++i) {
    const auto& obs = frame.masks[i];
    const std::string mwhere = where + "mask " + std::to_string(i) + ": ";
    if (obs.mask.empty()) throw_validation(mwhere + "mask is empty");
    if (auto defect = obs.mask.check_runs(); !defect.empty()) {
      throw_validation(mwhere + "malformed runs: " + defect);
    }
    if (obs.mask.extent_end() > pixels) throw_validation(mwhere + "pixel out of raster bounds");
    if (obs.feature.empty()) throw_validation(mwhere + "feature is empty");
    if (dim == 0) dim = obs.feature.size();
    if (obs.feature.size() != dim) {
      throw_validation(mwhere + "feature dimension " + std::to_string(obs.feature.size()) +
                       " != " + std::to_string(dim));
    }
    double norm2 = 0.0;
    for (const float x : obs.feature) {
      if (!std::isfinite(x)) throw_validation(mwhere + "feature has non-finite entries");
      norm2 += static_cast<double>(x) * x;
    }
    if (!(norm2 > 0.0)) throw_validation(mwhere + "feature has zero norm");
    if (!(obs.detection_score >= 0.0F && obs.detection_score <= 1.0F)) {
      throw_validation(mwhere + "detection_score outside [0,1]");
    }
    if (!frame.masks_may_overlap) {
      bool overlap = false;
      obs.mask.for_each_pixel([&](std::uint32_t p) {
        overlap = overlap || claimed[p];
        claimed[p] = 1;
      });
      if (overlap) throw_validation(mwhere + "overlaps an earlier mask and overlap is not flagged");
    }
  }
}

std::vector<std::int32_t> mask_owner_raster(const FrameBundle& frame) {
  std::vector<std::int32_t> owner(frame.intrinsics.pixel_count(), -1);
  for (std::size_t i = 0; i < frame.masks.size(); ++i) {
    frame.masks[i].mask.for_each_pixel(
        [&](std::uint32_t p) { owner[p] = static_cast<std::int32_t>(i); });
  }
  return owner;
}

}  // namespace voxelox
