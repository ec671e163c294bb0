#pragma once

// On-disk frame sequence format.
//
//   manifest.json            version, resolution, embedding_dim, per-frame entries
//   frames/NNNNNN.depth      "VXDP" u32 width u32 height u32 0, then u16 depth (mm)
//   frames/NNNNNN.masks      "VXMK" u32 version u32 flags u32 count, then per mask:
//                            f32 score, u8 has_caption, u32 len, caption bytes,
//                            u32 runs, (u32 start, u32 length) * runs
//   frames/NNNNNN.feat       "VXFT" u32 count u32 dim u32 0, then f32 rows
//   frames/NNNNNN.pose       16 f64, row-major 4x4 world-from-camera
//
// All integers and floats little-endian.

#include "voxelox/frame.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxelox {

inline constexpr int kSequenceFormatVersion = 1;

struct FrameFiles {
  std::uint64_t frame_id = 0;
  CameraIntrinsics intrinsics;
  std::string depth;
  std::string masks;
  std::string feat;
  std::string pose;

  bool operator==(const FrameFiles&) const = default;
};

struct SequenceManifest {
  int version = kSequenceFormatVersion;
  double resolution = kDefaultResolution;
  std::size_t embedding_dim = 0;
  std::vector<FrameFiles> frames;
  /// Optional named references to ground-truth artifacts, relative to the
  /// sequence directory.
  std::map<std::string, std::string> ground_truth;

  std::size_t frame_count() const { return frames.size(); }
};

struct SequenceOptions {
  double resolution = kDefaultResolution;
  /// 0 infers the dimension from the first mask.
  std::size_t embedding_dim = 0;
  std::map<std::string, std::string> ground_truth;
};

/// Incremental writer: one frame on disk at a time, manifest on `finish`.
class SequenceWriter {
public:
  SequenceWriter(std::filesystem::path dir, SequenceOptions options);

  void append(const FrameBundle& frame);
  SequenceManifest finish();

  const std::filesystem::path& dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  SequenceManifest manifest_;
  std::optional<CameraIntrinsics> first_intrinsics_;
  bool finished_ = false;
};

SequenceManifest write_sequence(std::span<const FrameBundle> frames,
                                const std::filesystem::path& dir,
                                const SequenceOptions& options = {});

/// Streaming reader; holds at most one decoded frame.
class SequenceReader {
public:
  explicit SequenceReader(std::filesystem::path dir);

  const SequenceManifest& manifest() const { return manifest_; }
  std::size_t frame_count() const { return manifest_.frames.size(); }

  /// Next frame in frame_id order, or nullopt when exhausted.
  std::optional<FrameBundle> next();

  /// Random access by position in the manifest.
  FrameBundle read_frame(std::size_t index) const;

  const std::filesystem::path& dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  SequenceManifest manifest_;
  std::size_t cursor_ = 0;
};

/// Reads every frame (convenience for tests and small sequences).
std::vector<FrameBundle> read_sequence(const std::filesystem::path& dir);

/// Pixel-level codecs, exposed for tests and tools.
std::string encode_depth(const FrameBundle& frame);
std::vector<std::uint16_t> decode_depth(const std::filesystem::path& path, int width, int height);
std::string encode_pose(const Pose& pose);
Pose decode_pose(const std::filesystem::path& path);

}  // namespace voxelox
