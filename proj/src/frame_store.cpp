#include "voxelox/frame_store.hpp"

#include "voxelox/detail/binary_io.hpp"
#include "voxelox/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace voxelox {

namespace fs = std::filesystem;
using json = nlohmann::json;
using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::uint32_t kMasksVersion = 1;
constexpr std::uint32_t kFlagOverlap = 1U;

std::string frame_stem(std::uint64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frames/%06llu", static_cast<unsigned long long>(frame_id));
  return buf;
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  return k;
}

std::string encode_masks(const FrameBundle& frame) {
  ByteWriter w;
  w.put_bytes("VXMK");
  w.put<std::uint32_t>(kMasksVersion);
  w.put<std::uint32_t>(frame.masks_may_overlap ? kFlagOverlap : 0U);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.masks.size()));
  for (const auto& obs : frame.masks) {
    w.put<float>(obs.detection_score);
    w.put<std::uint8_t>(obs.caption ? 1 : 0);
    const std::string caption = obs.caption.value_or("");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(caption.size()));
    w.put_bytes(caption);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(obs.mask.runs().size()));
    for (const auto& run : obs.mask.runs()) {
      w.put<std::uint32_t>(run.start);
      w.put<std::uint32_t>(run.length);
    }
  }
  return w.bytes();
}

std::string encode_features(const FrameBundle& frame, std::size_t dim) {
  ByteWriter w;
  w.put_bytes("VXFT");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.masks.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint32_t>(0);
  for (const auto& obs : frame.masks) {
    for (const float x : obs.feature) w.put<float>(x);
  }
  return w.bytes();
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_io("write failed: " + path.string());
}

void decode_masks(const fs::path& path, FrameBundle& frame) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXMK");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kMasksVersion) {
    throw_validation(r.name() + ": unsupported masks version " + std::to_string(version));
  }
  const auto flags = r.get<std::uint32_t>("flags");
  frame.masks_may_overlap = (flags & kFlagOverlap) != 0;
  const auto count = r.get<std::uint32_t>("count");
  frame.masks.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    MaskObservation obs;
    obs.detection_score = r.get<float>("detection_score");
    const auto has_caption = r.get<std::uint8_t>("has_caption");
    const auto len = r.get<std::uint32_t>("caption_length");
    std::string caption = r.get_bytes(len, "caption");
    if (has_caption) obs.caption = std::move(caption);
    const auto n_runs = r.get<std::uint32_t>("run_count");
    if (n_runs > r.remaining() / 8) throw_validation(r.name() + ": truncated while reading runs");
    std::vector<PixelRun> runs(n_runs);
    for (auto& run : runs) {
      run.start = r.get<std::uint32_t>("run.start");
      run.length = r.get<std::uint32_t>("run.length");
    }
    obs.mask = Mask::from_runs(std::move(runs));
    frame.masks.push_back(std::move(obs));
  }
  r.expect_end();
}

void decode_features(const fs::path& path, FrameBundle& frame, std::size_t dim) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXFT");
  const auto count = r.get<std::uint32_t>("count");
  const auto file_dim = r.get<std::uint32_t>("dim");
  r.get<std::uint32_t>("reserved");
  if (count != frame.masks.size()) {
    throw_validation(r.name() + ": feature count " + std::to_string(count) +
                     " != mask count " + std::to_string(frame.masks.size()));
  }
  if (count > 0 && file_dim != dim) {
    throw_validation(r.name() + ": feature dimension " + std::to_string(file_dim) +
                     " != manifest embedding_dim " + std::to_string(dim));
  }
  for (auto& obs : frame.masks) {
    obs.feature.resize(file_dim);
    for (auto& x : obs.feature) x = r.get<float>("feature");
  }
  r.expect_end();
}

}  // namespace

std::string encode_depth(const FrameBundle& frame) {
  ByteWriter w;
  w.put_bytes("VXDP");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.intrinsics.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.intrinsics.height));
  w.put<std::uint32_t>(0);
  for (const auto d : frame.depth_mm) w.put<std::uint16_t>(d);
  return w.bytes();
}

std::vector<std::uint16_t> decode_depth(const fs::path& path, int width, int height) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXDP");
  const auto w = r.get<std::uint32_t>("width");
  const auto h = r.get<std::uint32_t>("height");
  r.get<std::uint32_t>("reserved");
  if (static_cast<int>(w) != width || static_cast<int>(h) != height) {
    throw_validation(r.name() + ": raster " + std::to_string(w) + "x" + std::to_string(h) +
                     " does not match intrinsics " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (r.remaining() != n * 2) {
    throw_validation(r.name() + ": truncated raster (" + std::to_string(r.remaining()) +
                     " bytes, expected " + std::to_string(n * 2) + ")");
  }
  std::vector<std::uint16_t> depth(n);
  for (auto& d : depth) d = r.get<std::uint16_t>("depth");
  return depth;
}

std::string encode_pose(const Pose& pose) {
  ByteWriter w;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) w.put<double>(pose.rotation(row, col));
    w.put<double>(pose.translation(row));
  }
  w.put<double>(0.0);
  w.put<double>(0.0);
  w.put<double>(0.0);
  w.put<double>(1.0);
  return w.bytes();
}

Pose decode_pose(const fs::path& path) {
  auto r = ByteReader::from_file(path);
  Pose pose;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) pose.rotation(row, col) = r.get<double>("rotation");
    pose.translation(row) = r.get<double>("translation");
  }
  const double a = r.get<double>("row3");
  const double b = r.get<double>("row3");
  const double c = r.get<double>("row3");
  const double d = r.get<double>("row3");
  if (a != 0.0 || b != 0.0 || c != 0.0 || d != 1.0) {
    throw_validation(r.name() + ": last pose row must be (0,0,0,1)");
  }
  r.expect_end();
  return pose;
}

SequenceWriter::SequenceWriter(fs::path dir, SequenceOptions options) : dir_(std::move(dir)) {
  if (!(options.resolution > 0.0)) throw_validation("sequence: resolution must be positive");
  manifest_.resolution = options.resolution;
  manifest_.embedding_dim = options.embedding_dim;
  manifest_.ground_truth = std::move(options.ground_truth);
  std::error_code ec;
  fs::create_directories(dir_ / "frames", ec);
  if (ec) throw_io("cannot create " + (dir_ / "frames").string() + ": " + ec.message());
}

void SequenceWriter::append(const FrameBundle& frame) {
  if (finished_) throw_usage("sequence writer already finished");
  if (manifest_.embedding_dim == 0 && !frame.masks.empty()) {
    manifest_.embedding_dim = frame.masks.front().feature.size();
  }
  validate_frame(frame, manifest_.embedding_dim);
  if (first_intrinsics_) {
    if (first_intrinsics_->width != frame.intrinsics.width ||
        first_intrinsics_->height != frame.intrinsics.height) {
      throw_validation("frame " + std::to_string(frame.frame_id) +
                       ": raster dimensions differ from the first frame");
    }
  } else {
    first_intrinsics_ = frame.intrinsics;
  }
  if (!manifest_.frames.empty() && frame.frame_id <= manifest_.frames.back().frame_id) {
    throw_validation("frame " + std::to_string(frame.frame_id) + ": frame_id not increasing");
  }

  const std::string stem = frame_stem(frame.frame_id);
  FrameFiles files{frame.frame_id, frame.intrinsics, stem + ".depth", stem + ".masks",
                   stem + ".feat", stem + ".pose"};
  write_bytes(dir_ / files.depth, encode_depth(frame));
  write_bytes(dir_ / files.masks, encode_masks(frame));
  write_bytes(dir_ / files.feat, encode_features(frame, manifest_.embedding_dim));
  write_bytes(dir_ / files.pose, encode_pose(frame.pose));
  manifest_.frames.push_back(std::move(files));
}

SequenceManifest SequenceWriter::finish() {
  if (finished_) throw_usage("sequence writer already finished");
  finished_ = true;
  json frames = json::array();
  for (const auto& f : manifest_.frames) {
    frames.push_back({{"frame_id", f.frame_id},
                      {"intrinsics", intrinsics_to_json(f.intrinsics)},
                      {"depth", f.depth},
                      {"masks", f.masks},
                      {"feat", f.feat},
                      {"pose", f.pose}});
  }
  json j = {{"version", manifest_.version},
            {"resolution", manifest_.resolution},
            {"embedding_dim", manifest_.embedding_dim},
            {"frame_count", manifest_.frames.size()},
            {"frames", frames}};
  if (!manifest_.ground_truth.empty()) j["ground_truth"] = manifest_.ground_truth;
  write_bytes(dir_ / "manifest.json", j.dump(2) + "\n");
  return manifest_;
}

SequenceManifest write_sequence(std::span<const FrameBundle> frames, const fs::path& dir,
                                const SequenceOptions& options) {
  SequenceWriter writer(dir, options);
  for (const auto& f : frames) writer.append(f);
  return writer.finish();
}

SequenceReader::SequenceReader(fs::path dir) : dir_(std::move(dir)) {
  const fs::path path = dir_ / "manifest.json";
  std::ifstream in(path);
  if (!in) throw_io("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_validation(path.string() + ": " + e.what());
  }

  std::string field;
  try {
    field = "version";
    manifest_.version = j.at("version").get<int>();
    if (manifest_.version != kSequenceFormatVersion) {
      throw_validation(path.string() + ": unsupported version " +
                       std::to_string(manifest_.version));
    }
    field = "resolution";
    manifest_.resolution = j.at("resolution").get<double>();
    if (!(manifest_.resolution > 0.0)) throw_validation(path.string() + ": resolution <= 0");
    field = "embedding_dim";
    manifest_.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    field = "frames";
    for (const auto& f : j.at("frames")) {
      FrameFiles files;
      field = "frames[].frame_id";
      files.frame_id = f.at("frame_id").get<std::uint64_t>();
      field = "frames[].intrinsics";
      files.intrinsics = intrinsics_from_json(f.at("intrinsics"));
      field = "frames[].depth";
      files.depth = f.at("depth").get<std::string>();
      field = "frames[].masks";
      files.masks = f.at("masks").get<std::string>();
      field = "frames[].feat";
      files.feat = f.at("feat").get<std::string>();
      field = "frames[].pose";
      files.pose = f.at("pose").get<std::string>();
      manifest_.frames.push_back(std::move(files));
    }
    field = "frame_count";
    if (j.at("frame_count").get<std::size_t>() != manifest_.frames.size()) {
      throw_validation(path.string() + ": frame_count disagrees with frames list");
    }
    if (j.contains("ground_truth")) {
      field = "ground_truth";
      manifest_.ground_truth = j.at("ground_truth").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw_validation(path.string() + ": field '" + field + "': " + e.what());
  }

  for (std::size_t i = 0; i < manifest_.frames.size(); ++i) {
    const auto& f = manifest_.frames[i];
    if (i > 0 && f.frame_id <= manifest_.frames[i - 1].frame_id) {
      throw_validation(path.string() + ": frame_id " + std::to_string(f.frame_id) +
                       " not increasing");
    }
    for (const auto* rel : {&f.depth, &f.masks, &f.feat, &f.pose}) {
      if (!fs::is_regular_file(dir_ / *rel)) throw_io("missing file " + (dir_ / *rel).string());
    }
  }
}

FrameBundle SequenceReader::read_frame(std::size_t index) const {
  if (index >= manifest_.frames.size()) {
    throw_usage("frame index " + std::to_string(index) + " out of range");
  }
  const auto& files = manifest_.frames[index];
  FrameBundle frame;
  frame.frame_id = files.frame_id;
  frame.intrinsics = files.intrinsics;
  try {
    validate(frame.intrinsics);
  } catch (const Error& e) {
    throw_validation((dir_ / "manifest.json").string() + ": frame " +
                     std::to_string(files.frame_id) + ": " + e.what());
  }
  frame.depth_mm = decode_depth(dir_ / files.depth, frame.intrinsics.width, frame.intrinsics.height);
  frame.pose = decode_pose(dir_ / files.pose);
  try {
    validate(frame.pose);
  } catch (const Error& e) {
    throw_validation((dir_ / files.pose).string() + ": " + e.what());
  }
  decode_masks(dir_ / files.masks, frame);
  decode_features(dir_ / files.feat, frame, manifest_.embedding_dim);
  try {
    validate_frame(frame, manifest_.embedding_dim);
  } catch (const Error& e) {
    throw_validation((dir_ / files.masks).string() + ": " + e.what());
  }
  return frame;
}

std::optional<FrameBundle> SequenceReader::next() {
  if (cursor_ >= manifest_.frames.size()) return std::nullopt;
  return read_frame(cursor_++);
}

std::vector<FrameBundle> read_sequence(const fs::path& dir) {
  SequenceReader reader(dir);
  std::vector<FrameBundle> frames;
  frames.reserve(reader.frame_count());
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

}  // namespace voxelox
