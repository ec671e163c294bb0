#include "voxelox/query.hpp"

#include "voxelox/association.hpp"
#include "voxelox/detail/binary_io.hpp"
#include "voxelox/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace voxelox {

namespace fs = std::filesystem;
using detail::ByteReader;
using detail::ByteWriter;

RenderedMask render_mask(const VoxelMap& map, const CameraIntrinsics& intr, const Pose& pose,
                         std::span<const std::uint16_t> depth_mm) {
  if (depth_mm.size() != intr.pixel_count()) {
    throw_validation("render_mask: depth raster does not match intrinsics");
  }
  RenderedMask out;
  out.width = intr.width;
  out.height = intr.height;
  out.labels.assign(depth_mm.size(), kNoInstance);
  out.confidence.assign(depth_mm.size(), 0.0F);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * intr.width + u;
      if (depth_mm[i] == 0) continue;
      const Eigen::Vector3d p = pose.apply(depth_mm[i] * 1e-3 * pixel_ray(u, v, intr));
      const VoxelState* cell = map.find(voxelize(p, map.resolution()));
      if (cell == nullptr) continue;
      out.labels[i] = cell->argmax();
      out.confidence[i] = static_cast<float>(cell->max_theta());
    }
  }
  return out;
}

void write_rendered_mask(const RenderedMask& mask, const fs::path& path) {
  ByteWriter w;
  w.put_bytes("VXRM");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mask.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mask.height));
  w.put<std::uint32_t>(0);
  for (const auto id : mask.labels) w.put<std::uint32_t>(id);
  for (const auto c : mask.confidence) w.put<float>(c);
  w.write_file(path);
}

RenderedMask read_rendered_mask(const fs::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXRM");
  RenderedMask m;
  m.width = static_cast<int>(r.get<std::uint32_t>("width"));
  m.height = static_cast<int>(r.get<std::uint32_t>("height"));
  r.get<std::uint32_t>("reserved");
  const std::size_t n = static_cast<std::size_t>(m.width) * m.height;
  if (r.remaining() != n * 8) throw_validation(r.name() + ": truncated raster");
  m.labels.resize(n);
  m.confidence.resize(n);
  for (auto& id : m.labels) id = r.get<std::uint32_t>("label");
  for (auto& c : m.confidence) c = r.get<float>("confidence");
  return m;
}

std::vector<RetrievalHit> retrieve(const Codebook& codebook, std::span<const double> query,
                                   std::size_t k) {
  if (k == 0) throw_usage("retrieve: k must be at least 1");
  std::vector<RetrievalHit> hits;
  hits.reserve(codebook.size());
  for (const auto& [id, rec] : codebook.records()) {
    hits.push_back({id, cosine_similarity(rec.embedding, query), 0});
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    [](const RetrievalHit& a, const RetrievalHit& b) {
                      return a.score != b.score ? a.score > b.score : a.id < b.id;
                    });
  hits.resize(keep);
  for (std::size_t r = 0; r < hits.size(); ++r) hits[r].rank = r + 1;
  return hits;
}

std::map<InstanceId, int> semantic_labels(const Codebook& codebook,
                                          std::span<const ClassEmbedding> classes) {
  if (classes.empty()) throw_validation("semantic_labels: class table is empty");
  std::map<InstanceId, int> labels;
  for (const auto& [id, rec] : codebook.records()) {
    int best_class = 0;
    double best = 0.0;
    bool first = true;
    for (const auto& c : classes) {
      const double s = cosine_similarity(rec.embedding, c.embedding);
      if (first || s > best || (s == best && c.class_id < best_class)) {
        best = s;
        best_class = c.class_id;
        first = false;
      }
    }
    labels[id] = best_class;
  }
  return labels;
}

std::array<std::uint8_t, 3> instance_color(InstanceId id) {
  // splitmix64 finalizer
  std::uint64_t z = static_cast<std::uint64_t>(id) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return {static_cast<std::uint8_t>(z & 0xFF), static_cast<std::uint8_t>((z >> 8) & 0xFF),
          static_cast<std::uint8_t>((z >> 16) & 0xFF)};
}

namespace {

constexpr std::uint32_t kLabeledVoxelVersion = 1;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw_io("write failed: " + path.string());
}

std::string ply_text(const VoxelMap& map) {
  const auto keys = map.sorted_keys();
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(keys.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "property float confidence\nend_header\n";
  char line[160];
  for (const auto& key : keys) {
    const VoxelState& cell = *map.find(key);
    const Eigen::Vector3d c = voxel_center(key, map.resolution());
    const auto rgb = instance_color(cell.argmax());
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %u %u %u %.9g\n", static_cast<float>(c.x()),
                  static_cast<float>(c.y()), static_cast<float>(c.z()), rgb[0], rgb[1], rgb[2],
                  static_cast<float>(cell.max_theta()));
    out += line;
  }
  return out;
}

std::string labeled_voxels_bytes(const VoxelMap& map) {
  ByteWriter w;
  w.put_bytes("VXLV");
  w.put<std::uint32_t>(kLabeledVoxelVersion);
  w.put<double>(map.resolution());
  const auto keys = map.sorted_keys();
  w.put<std::uint64_t>(keys.size());
  for (const auto& key : keys) {
    const VoxelState& cell = *map.find(key);
    w.put<std::int32_t>(key.ix);
    w.put<std::int32_t>(key.iy);
    w.put<std::int32_t>(key.iz);
    w.put<std::uint32_t>(cell.argmax());
    w.put<double>(cell.max_theta());
    auto theta = instance_vector(cell);
    std::stable_sort(theta.begin(), theta.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t t = 0; t < 3; ++t) {
      if (t < theta.size()) {
        w.put<std::uint32_t>(theta[t].first);
        w.put<double>(theta[t].second);
      } else {
        w.put<std::uint32_t>(kNoInstance);
        w.put<double>(0.0);
      }
    }
  }
  return w.bytes();
}

}  // namespace

void export_map(const VoxelMap& map, const Codebook& codebook, const fs::path& dir,
                ExportFormat format) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create " + dir.string() + ": " + ec.message());
  if (format == ExportFormat::PointList) {
    write_text(dir / "map.ply", ply_text(map));
  } else {
    write_text(dir / "voxels.bin", labeled_voxels_bytes(map));
  }
  write_text(dir / "codebook.json", codebook_to_json(codebook));
}

LabeledVoxelFile read_labeled_voxels(const fs::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXLV");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kLabeledVoxelVersion) throw_validation(r.name() + ": unsupported version");
  LabeledVoxelFile file;
  file.resolution = r.get<double>("resolution");
  const auto n = r.get<std::uint64_t>("count");
  constexpr std::size_t kRecordBytes = 12 + 4 + 8 + 3 * 12;
  if (n > r.remaining() / kRecordBytes) throw_validation(r.name() + ": truncated voxel list");
  file.voxels.resize(n);
  for (auto& v : file.voxels) {
    v.key.ix = r.get<std::int32_t>("ix");
    v.key.iy = r.get<std::int32_t>("iy");
    v.key.iz = r.get<std::int32_t>("iz");
    v.label = r.get<std::uint32_t>("label");
    v.confidence = r.get<double>("confidence");
    for (auto& [id, theta] : v.top) {
      id = r.get<std::uint32_t>("top.id");
      theta = r.get<double>("top.theta");
    }
  }
  r.expect_end();
  return file;
}

void write_embedding_file(const std::vector<std::vector<double>>& rows, std::size_t dim,
                          const fs::path& path) {
  ByteWriter w;
  w.put_bytes("VXEM");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint32_t>(0);
  for (const auto& row : rows) {
    if (row.size() != dim) throw_validation("embedding file: row dimension mismatch");
    for (const double x : row) w.put<float>(static_cast<float>(x));
  }
  w.write_file(path);
}

std::vector<std::vector<double>> read_embedding_file(const fs::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("VXEM");
  const auto count = r.get<std::uint32_t>("count");
  const auto dim = r.get<std::uint32_t>("dim");
  r.get<std::uint32_t>("reserved");
  if (r.remaining() != static_cast<std::size_t>(count) * dim * 4) {
    throw_validation(r.name() + ": size does not match header");
  }
  std::vector<std::vector<double>> rows(count, std::vector<double>(dim));
  for (auto& row : rows) {
    for (auto& x : row) x = r.get<float>("embedding");
  }
  return rows;
}

std::string codebook_to_json(const Codebook& codebook) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& [id, rec] : codebook.records()) {
    records.push_back({{"id", id},
                       {"weight", rec.weight},
                       {"caption", rec.caption ? nlohmann::json(*rec.caption) : nlohmann::json(nullptr)},
                       {"caption_weight", rec.caption_weight},
                       {"embedding", rec.embedding}});
  }
  nlohmann::json j = {{"version", 1},
                      {"embedding_dim", codebook.embedding_dim()},
                      {"records", records}};
  return j.dump(1) + "\n";
}

Codebook codebook_from_json(const std::string& text, const std::string& source) {
  std::string field = "document";
  try {
    const auto j = nlohmann::json::parse(text);
    field = "version";
    if (j.at("version").get<int>() != 1) throw_validation(source + ": unsupported codebook version");
    field = "embedding_dim";
    Codebook cb(j.at("embedding_dim").get<std::size_t>());
    field = "records";
    for (const auto& r : j.at("records")) {
      CodebookRecord rec;
      field = "records[].id";
      rec.id = r.at("id").get<InstanceId>();
      field = "records[].weight";
      rec.weight = r.at("weight").get<double>();
      field = "records[].caption";
      if (!r.at("caption").is_null()) rec.caption = r.at("caption").get<std::string>();
      field = "records[].caption_weight";
      rec.caption_weight = r.at("caption_weight").get<double>();
      field = "records[].embedding";
      rec.embedding = r.at("embedding").get<std::vector<double>>();
      cb.insert(std::move(rec));
    }
    return cb;
  } catch (const nlohmann::json::exception& e) {
    throw_validation(source + ": field '" + field + "': " + e.what());
  }
}

}  // namespace voxelox
