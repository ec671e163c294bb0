#include "voxelox/snapshot.hpp"

#include "voxelox/detail/binary_io.hpp"
#include "voxelox/error.hpp"
#include "voxelox/query.hpp"

#include <fstream>
#include <sstream>

namespace voxelox {

namespace fs = std::filesystem;

namespace {
constexpr std::uint32_t kMapVersion = 1;
}

void save_snapshot(const VoxelMap& map, const Codebook& codebook, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create " + dir.string() + ": " + ec.message());

  detail::ByteWriter w;
  w.put_bytes("VXMP");
  w.put<std::uint32_t>(kMapVersion);
  w.put<double>(map.resolution());
  w.put<std::uint32_t>(map.next_instance_id());
  const auto retired = map.retired_instances();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(retired.size()));
  for (const auto id : retired) w.put<std::uint32_t>(id);
  const auto keys = map.sorted_keys();
  w.put<std::uint64_t>(keys.size());
  for (const auto& key : keys) {
    const VoxelState& cell = *map.find(key);
    w.put<std::int32_t>(key.ix);
    w.put<std::int32_t>(key.iy);
    w.put<std::int32_t>(key.iz);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cell.entries().size()));
    for (const auto& e : cell.entries()) {
      w.put<std::uint32_t>(e.id);
      w.put<std::uint32_t>(e.count);
    }
  }
  w.write_file(dir / "map.bin");

  std::ofstream out(dir / "codebook.json", std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open " + (dir / "codebook.json").string() + " for writing");
  out << codebook_to_json(codebook);
  if (!out) throw_io("write failed: " + (dir / "codebook.json").string());
}

Snapshot load_snapshot(const fs::path& dir) {
  auto r = detail::ByteReader::from_file(dir / "map.bin");
  r.expect_magic("VXMP");
  if (r.get<std::uint32_t>("version") != kMapVersion) {
    throw_validation(r.name() + ": unsupported map version");
  }
  const double resolution = r.get<double>("resolution");
  const auto next_id = r.get<std::uint32_t>("next_instance_id");
  const auto n_retired = r.get<std::uint32_t>("retired_count");
  std::vector<InstanceId> retired(n_retired);
  for (auto& id : retired) id = r.get<std::uint32_t>("retired");
  const auto n_cells = r.get<std::uint64_t>("cell_count");
  if (n_cells > r.remaining() / 16) throw_validation(r.name() + ": truncated cell list");
  std::vector<std::pair<VoxelKey, VoxelState>> cells;
  cells.reserve(n_cells);
  for (std::uint64_t c = 0; c < n_cells; ++c) {
    VoxelKey key;
    key.ix = r.get<std::int32_t>("ix");
    key.iy = r.get<std::int32_t>("iy");
    key.iz = r.get<std::int32_t>("iz");
    const auto n = r.get<std::uint32_t>("entry_count");
    VoxelState state;
    InstanceId prev = 0;
    for (std::uint32_t e = 0; e < n; ++e) {
      const auto id = r.get<std::uint32_t>("entry.id");
      const auto count = r.get<std::uint32_t>("entry.count");
      if (e > 0 && id <= prev) throw_validation(r.name() + ": voxel entries not sorted by ID");
      prev = id;
      state.add(id, count);
    }
    cells.emplace_back(key, std::move(state));
  }
  r.expect_end();

  std::ifstream in(dir / "codebook.json", std::ios::binary);
  if (!in) throw_io("cannot open " + (dir / "codebook.json").string());
  std::stringstream ss;
  ss << in.rdbuf();

  Snapshot snap{VoxelMap::restore(resolution, next_id, retired, std::move(cells)),
                codebook_from_json(ss.str(), (dir / "codebook.json").string())};
  for (const auto id : snap.map.live_instances()) {
    if (!snap.codebook.contains(id)) {
      throw_validation(dir.string() + ": instance " + std::to_string(id) + " has no codebook record");
    }
  }
  return snap;
}

}  // namespace voxelox
