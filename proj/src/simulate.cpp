#include "voxelox/simulate.hpp"

#include "voxelox/detail/binary_io.hpp"
#include "voxelox/error.hpp"
#include "voxelox/frame_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace voxelox {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::optional<double> SceneObject::intersect(const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& dir) const {
  constexpr double kEps = 1e-12;
  if (shape == ShapeKind::Sphere) {
    const Eigen::Vector3d oc = origin - center;
    const double a = dir.squaredNorm();
    const double b = oc.dot(dir);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = (-b - sq) / a;
    if (t <= kEps) t = (-b + sq) / a;
    if (t <= kEps) return std::nullopt;
    return t;
  }
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double lo = center[k] - half_extents[k];
    const double hi = center[k] + half_extents[k];
    if (std::abs(dir[k]) < kEps) {
      if (origin[k] < lo || origin[k] > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - origin[k]) / dir[k];
    double t1 = (hi - origin[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin > kEps) return tmin;
  if (tmax > kEps) return tmax;
  return std::nullopt;
}

bool SceneObject::contains(const Eigen::Vector3d& p) const {
  if (shape == ShapeKind::Sphere) return (p - center).squaredNorm() <= radius * radius;
  return ((p - center).cwiseAbs().array() <= half_extents.array()).all();
}

double SceneObject::footprint_radius() const {
  if (shape == ShapeKind::Sphere) return radius;
  return std::hypot(half_extents.x(), half_extents.y());
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<double>> orthonormal_classes(std::mt19937_64& rng, int n, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (static_cast<int>(basis.size()) < n) {
    std::vector<double> v(d);
    for (auto& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += v[k] * b[k];
      for (std::size_t k = 0; k < d; ++k) v[k] -= dot * b[k];
    }
    double norm = 0.0;
    for (const double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

float detection_score(std::size_t area) {
  return static_cast<float>(0.5 + 0.5 * std::min(1.0, static_cast<double>(area) / 2000.0));
}

/// 4-connected components of equal non-background labels.
std::vector<std::pair<InstanceId, std::vector<std::uint32_t>>> connected_regions(
    const std::vector<InstanceId>& labels, int width, int height) {
  std::vector<std::pair<InstanceId, std::vector<std::uint32_t>>> regions;
  std::vector<std::uint8_t> visited(labels.size(), 0);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t start = 0; start < labels.size(); ++start) {
    if (visited[start] || labels[start] == kNoInstance) continue;
    const InstanceId id = labels[start];
    std::vector<std::uint32_t> pixels;
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      pixels.push_back(p);
      const int u = static_cast<int>(p % width);
      const int v = static_cast<int>(p / width);
      const int du[4] = {1, -1, 0, 0};
      const int dv[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nu = u + du[k];
        const int nv = v + dv[k];
        if (nu < 0 || nv < 0 || nu >= width || nv >= height) continue;
        const std::uint32_t q = static_cast<std::uint32_t>(nv * width + nu);
        if (!visited[q] && labels[q] == id) {
          visited[q] = 1;
          stack.push_back(q);
        }
      }
    }
    regions.emplace_back(id, std::move(pixels));
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return regions;
}

}  // namespace

SyntheticScene generate_scene(const SceneConfig& cfg) {
  if (cfg.n_objects < 1) throw_validation("generate_scene: need at least one object");
  if (cfg.n_frames < 1) throw_validation("generate_scene: need at least one frame");
  const int n_classes = cfg.n_classes > 0
                            ? cfg.n_classes
                            : std::min<int>(cfg.n_objects, static_cast<int>(cfg.embedding_dim));
  if (cfg.embedding_dim < static_cast<std::size_t>(n_classes)) {
    throw_validation("generate_scene: embedding dimension smaller than class count");
  }
  validate(cfg.intrinsics);

  std::mt19937_64 rng(cfg.seed);
  SyntheticScene scene;
  scene.seed = cfg.seed;
  scene.intrinsics = cfg.intrinsics;
  const double h = cfg.floor_half_size > 0.0
                       ? cfg.floor_half_size
                       : 1.4 * std::sqrt(std::max(1.0, cfg.n_objects / 6.0));
  const double orbit = cfg.orbit_radius > 0.0 ? cfg.orbit_radius : h + 1.6;
  scene.bounds_min = {-h, -h, 0.0};
  scene.bounds_max = {h, h, 1.0};

  for (int i = 0; i < cfg.n_objects; ++i) {
    SceneObject obj;
    obj.id = static_cast<InstanceId>(i);
    obj.class_id = i % n_classes;
    if (uniform(rng, 0.0, 1.0) < 0.3) {
      obj.shape = ShapeKind::Sphere;
      obj.radius = uniform(rng, 0.12, 0.25);
    } else {
      obj.shape = ShapeKind::Box;
      obj.half_extents = {uniform(rng, 0.1, 0.3), uniform(rng, 0.1, 0.3), uniform(rng, 0.1, 0.35)};
    }
    const double fr = obj.footprint_radius();
    const double z = obj.shape == ShapeKind::Sphere ? obj.radius : obj.half_extents.z();
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      obj.center = {uniform(rng, -h + fr, h - fr), uniform(rng, -h + fr, h - fr), z};
      placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const SceneObject& o) {
        return (o.center.head<2>() - obj.center.head<2>()).norm() >
               o.footprint_radius() + fr + cfg.min_gap;
      });
    }
    if (!placed) {
      throw_validation("generate_scene: could not place object " + std::to_string(i) +
                       " without overlap");
    }
    scene.objects.push_back(obj);
  }

  scene.class_embeddings = orthonormal_classes(rng, n_classes, cfg.embedding_dim);

  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector3d target(0.0, 0.0, 0.2);
  for (int k = 0; k < cfg.n_frames; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * k / cfg.n_frames;
    const Eigen::Vector3d eye(orbit * std::cos(a), orbit * std::sin(a),
                              cfg.camera_height + 0.2 * std::sin(3.0 * a));
    scene.trajectory.push_back(look_at(eye, target));
  }
  return scene;
}

GroundTruthFrame render_gt_frame(const SyntheticScene& scene, const Pose& pose,
                                 std::uint64_t frame_id) {
  const auto& intr = scene.intrinsics;
  GroundTruthFrame out;
  FrameBundle& frame = out.frame;
  frame.frame_id = frame_id;
  frame.intrinsics = intr;
  frame.pose = pose;
  frame.depth_mm.assign(intr.pixel_count(), 0);
  out.labels.assign(intr.pixel_count(), kNoInstance);

  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Eigen::Vector3d dir = pose.rotation * pixel_ray(u, v, intr);
      double best = std::numeric_limits<double>::infinity();
      InstanceId hit = kNoInstance;
      for (const auto& obj : scene.objects) {
        if (auto t = obj.intersect(pose.translation, dir); t && *t < best) {
          best = *t;
          hit = obj.id;
        }
      }
      if (hit == kNoInstance) continue;
      const std::size_t i = static_cast<std::size_t>(v) * intr.width + u;
      const std::uint16_t mm = depth_to_mm(best);
      if (mm == 0) continue;
      frame.depth_mm[i] = mm;
      out.labels[i] = hit;
    }
  }

  for (auto& [id, pixels] : connected_regions(out.labels, intr.width, intr.height)) {
    const auto it = std::find_if(scene.objects.begin(), scene.objects.end(),
                                 [id = id](const SceneObject& o) { return o.id == id; });
    const auto& embedding = scene.class_embeddings.at(static_cast<std::size_t>(it->class_id));
    MaskObservation obs;
    obs.detection_score = detection_score(pixels.size());
    obs.mask = Mask::from_indices(std::move(pixels));
    obs.feature.assign(embedding.begin(), embedding.end());
    obs.caption = "class " + std::to_string(it->class_id);
    frame.masks.push_back(std::move(obs));
  }
  return out;
}

void NoiseConfig::validate() const {
  for (const double p : {p_drop, p_split, p_merge}) {
    if (!(p >= 0.0 && p <= 1.0)) throw_validation("noise: probabilities must lie in [0,1]");
  }
  if (boundary_jitter < 0) throw_validation("noise: boundary jitter must be non-negative");
  if (!(embedding_noise_sigma >= 0.0) || !(depth_noise_sigma >= 0.0)) {
    throw_validation("noise: sigmas must be non-negative");
  }
  if (min_mask_pixels < 0 || merge_radius < 0) {
    throw_validation("noise: pixel counts must be non-negative");
  }
}

std::pair<Mask, Mask> split_mask(const Mask& mask, int width) {
  const auto pixels = mask.to_indices();
  if (pixels.size() < 2) return {mask, Mask{}};
  double mu = 0.0;
  double mv = 0.0;
  for (const auto p : pixels) {
    mu += p % width;
    mv += p / width;
  }
  mu /= pixels.size();
  mv /= pixels.size();
  double suu = 0.0;
  double svv = 0.0;
  double suv = 0.0;
  for (const auto p : pixels) {
    const double du = p % width - mu;
    const double dv = p / width - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  // Major axis of the 2x2 covariance.
  const double angle = 0.5 * std::atan2(2.0 * suv, suu - svv);
  const double eu = std::cos(angle);
  const double ev = std::sin(angle);
  std::vector<std::pair<double, std::uint32_t>> proj;
  proj.reserve(pixels.size());
  for (const auto p : pixels) {
    proj.emplace_back((p % width - mu) * eu + (p / width - mv) * ev, p);
  }
  std::sort(proj.begin(), proj.end());
  const std::size_t half = proj.size() / 2;
  std::vector<std::uint32_t> a;
  std::vector<std::uint32_t> b;
  for (std::size_t k = 0; k < proj.size(); ++k) (k < half ? a : b).push_back(proj[k].second);
  return {Mask::from_indices(std::move(a)), Mask::from_indices(std::move(b))};
}

FrameBundle perturb(const FrameBundle& frame, const NoiseConfig& cfg) {
  cfg.validate();
  if (cfg.is_identity()) return frame;

  std::mt19937_64 rng(mix_seed(cfg.seed, frame.frame_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int width = frame.intrinsics.width;
  const int height = frame.intrinsics.height;
  const std::size_t n_pixels = frame.intrinsics.pixel_count();

  struct Region {
    std::vector<float> feature;
    std::optional<std::string> caption;
    float score = 1.0F;
    std::size_t source_area = 0;
    bool alive = true;
  };
  std::vector<Region> regions;
  std::vector<std::int32_t> owner = mask_owner_raster(frame);
  for (const auto& obs : frame.masks) {
    regions.push_back({obs.feature, obs.caption, obs.detection_score, obs.mask.pixel_count(), true});
  }

  auto pixels_of = [&](std::int32_t label) {
    std::vector<std::uint32_t> px;
    for (std::uint32_t p = 0; p < n_pixels; ++p) {
      if (owner[p] == label) px.push_back(p);
    }
    return px;
  };
  auto kill = [&](std::int32_t label) {
    regions[static_cast<std::size_t>(label)].alive = false;
    for (auto& o : owner) {
      if (o == label) o = -1;
    }
  };

  const std::size_t n_original = regions.size();

  // Missed detections.
  for (std::size_t i = 0; i < n_original; ++i) {
    const auto label = static_cast<std::int32_t>(i);
    const bool tiny = static_cast<int>(regions[i].source_area) < cfg.min_mask_pixels;
    const bool drop = unit(rng) < cfg.p_drop;
    if (tiny || drop) kill(label);
  }

  // Over-segmentation.
  for (std::size_t i = 0; i < n_original; ++i) {
    const bool split = unit(rng) < cfg.p_split;
    if (!split || !regions[i].alive) continue;
    const auto px = pixels_of(static_cast<std::int32_t>(i));
    const auto [keep, other] = split_mask(Mask::from_indices(px), width);
    if (other.empty()) continue;
    const auto new_label = static_cast<std::int32_t>(regions.size());
    Region half = regions[i];
    regions.push_back(std::move(half));
    other.for_each_pixel([&](std::uint32_t p) { owner[p] = new_label; });
  }

  // Under-segmentation: absorb the adjacent region with the largest contact.
  const int r = cfg.merge_radius;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const bool merge = unit(rng) < cfg.p_merge;
    if (!merge || !regions[i].alive) continue;
    const auto label = static_cast<std::int32_t>(i);
    std::vector<std::size_t> contact(regions.size(), 0);
    for (const auto p : pixels_of(label)) {
      const int u = static_cast<int>(p % width);
      const int v = static_cast<int>(p / width);
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const int nu = u + du;
          const int nv = v + dv;
          if (nu < 0 || nv < 0 || nu >= width || nv >= height) continue;
          const std::int32_t o = owner[static_cast<std::size_t>(nv * width + nu)];
          if (o >= 0 && o != label) ++contact[static_cast<std::size_t>(o)];
        }
      }
    }
    const auto best = std::max_element(contact.begin(), contact.end());
    if (*best == 0) continue;
    const auto other = static_cast<std::int32_t>(best - contact.begin());
    const auto mine = pixels_of(label).size();
    const auto theirs = pixels_of(other).size();
    Region& keep = regions[i];
    const Region& gone = regions[static_cast<std::size_t>(other)];
    if (theirs > mine) {
      keep.feature = gone.feature;
      keep.caption = gone.caption;
    }
    keep.score = std::max(keep.score, gone.score);
    regions[static_cast<std::size_t>(other)].alive = false;
    for (auto& o : owner) {
      if (o == other) o = label;
    }
  }

  // Boundary jitter: erode (negative) or dilate (positive), 4-neighborhood.
  if (cfg.boundary_jitter > 0) {
    std::uniform_int_distribution<int> step(-cfg.boundary_jitter, cfg.boundary_jitter);
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const int s = step(rng);
      if (!regions[i].alive || s == 0) continue;
      const auto label = static_cast<std::int32_t>(i);
      for (int it = 0; it < std::abs(s); ++it) {
        std::vector<std::uint32_t> changed;
        for (std::uint32_t p = 0; p < n_pixels; ++p) {
          const int u = static_cast<int>(p % width);
          const int v = static_cast<int>(p / width);
          const bool mine = owner[p] == label;
          if (s < 0 && !mine) continue;
          if (s > 0 && mine) continue;
          bool border = false;
          const int du[4] = {1, -1, 0, 0};
          const int dv[4] = {0, 0, 1, -1};
          for (int k = 0; k < 4 && !border; ++k) {
            const int nu = u + du[k];
            const int nv = v + dv[k];
            const bool inside = nu >= 0 && nv >= 0 && nu < width && nv < height;
            const bool neighbor_mine =
                inside && owner[static_cast<std::size_t>(nv * width + nu)] == label;
            border = s < 0 ? !neighbor_mine : neighbor_mine;
          }
          if (border) changed.push_back(p);
        }
        for (const auto p : changed) owner[p] = s < 0 ? -1 : label;
      }
    }
  }

  FrameBundle out = frame;
  out.masks.clear();
  out.masks_may_overlap = false;
  std::vector<std::vector<std::uint32_t>> pixels(regions.size());
  for (std::uint32_t p = 0; p < n_pixels; ++p) {
    if (owner[p] >= 0) pixels[static_cast<std::size_t>(owner[p])].push_back(p);
  }
  std::normal_distribution<double> feat_noise(0.0, 1.0);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (pixels[i].empty()) continue;
    MaskObservation obs;
    obs.mask = Mask::from_indices(std::move(pixels[i]));
    obs.feature = regions[i].feature;
    if (cfg.embedding_noise_sigma > 0.0) {
      for (auto& x : obs.feature) {
        x = static_cast<float>(x + cfg.embedding_noise_sigma * feat_noise(rng));
      }
    }
    obs.caption = regions[i].caption;
    obs.detection_score = regions[i].score;
    out.masks.push_back(std::move(obs));
  }

  if (cfg.depth_noise_sigma > 0.0) {
    std::normal_distribution<double> depth_noise(0.0, cfg.depth_noise_sigma);
    for (auto& d : out.depth_mm) {
      if (d == 0) continue;
      const double noisy = d * 1e-3 + depth_noise(rng);
      d = depth_to_mm(noisy);
    }
  }
  return out;
}

namespace {

json pose_to_json(const Pose& p) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2), p.translation(r)});
  }
  return rows;
}

Pose pose_from_json(const json& j) {
  Pose p;
  for (int r = 0; r < 3; ++r) {
    const auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (row.size() != 4) throw_validation("pose rows must have 4 entries");
    p.rotation.row(r) << row[0], row[1], row[2];
    p.translation(r) = row[3];
  }
  return p;
}

json vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d vec3_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw_validation("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

}  // namespace

std::string scene_to_json(const SyntheticScene& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json jo = {{"id", o.id}, {"class_id", o.class_id}, {"center", vec3(o.center)}};
    if (o.shape == ShapeKind::Box) {
      jo["shape"] = "box";
      jo["half_extents"] = vec3(o.half_extents);
    } else {
      jo["shape"] = "sphere";
      jo["radius"] = o.radius;
    }
    objects.push_back(std::move(jo));
  }
  json trajectory = json::array();
  for (const auto& p : scene.trajectory) trajectory.push_back(pose_to_json(p));
  const auto& k = scene.intrinsics;
  json j = {{"version", 1},
            {"seed", scene.seed},
            {"bounds_min", vec3(scene.bounds_min)},
            {"bounds_max", vec3(scene.bounds_max)},
            {"intrinsics",
             {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width},
              {"height", k.height}}},
            {"objects", objects},
            {"classes", scene.class_embeddings},
            {"trajectory", trajectory}};
  return j.dump(1) + "\n";
}

SyntheticScene scene_from_json(const std::string& text, const std::string& source) {
  std::string field = "document";
  try {
    const json j = json::parse(text);
    SyntheticScene s;
    field = "version";
    if (j.at("version").get<int>() != 1) throw_validation(source + ": unsupported scene version");
    field = "seed";
    s.seed = j.at("seed").get<std::uint64_t>();
    field = "bounds";
    s.bounds_min = vec3_from(j.at("bounds_min"));
    s.bounds_max = vec3_from(j.at("bounds_max"));
    field = "intrinsics";
    const auto& k = j.at("intrinsics");
    s.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>(), k.at("width").get<int>(), k.at("height").get<int>()};
    field = "objects";
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.id = jo.at("id").get<InstanceId>();
      o.class_id = jo.at("class_id").get<int>();
      o.center = vec3_from(jo.at("center"));
      const auto shape = jo.at("shape").get<std::string>();
      if (shape == "box") {
        o.shape = ShapeKind::Box;
        o.half_extents = vec3_from(jo.at("half_extents"));
      } else if (shape == "sphere") {
        o.shape = ShapeKind::Sphere;
        o.radius = jo.at("radius").get<double>();
      } else {
        throw_validation(source + ": unknown shape '" + shape + "'");
      }
      s.objects.push_back(o);
    }
    field = "classes";
    s.class_embeddings = j.at("classes").get<std::vector<std::vector<double>>>();
    field = "trajectory";
    for (const auto& jp : j.at("trajectory")) s.trajectory.push_back(pose_from_json(jp));
    return s;
  } catch (const json::exception& e) {
    throw_validation(source + ": field '" + field + "': " + e.what());
  }
}

SyntheticScene load_scene(const fs::path& sim_dir) {
  const fs::path path = sim_dir / "scene.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str(), path.string());
}

void write_label_raster(const std::vector<InstanceId>& labels, int width, int height,
                        const fs::path& path) {
  detail::ByteWriter w;
  w.put_bytes("VXGT");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(height));
  w.put<std::uint32_t>(0);
  for (const auto id : labels) w.put<std::uint32_t>(id);
  w.write_file(path);
}

std::vector<InstanceId> read_label_raster(const fs::path& path, int width, int height) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic("VXGT");
  const auto w = r.get<std::uint32_t>("width");
  const auto h = r.get<std::uint32_t>("height");
  r.get<std::uint32_t>("reserved");
  if (static_cast<int>(w) != width || static_cast<int>(h) != height) {
    throw_validation(r.name() + ": raster size mismatch");
  }
  std::vector<InstanceId> labels(static_cast<std::size_t>(w) * h);
  if (r.remaining() != labels.size() * 4) throw_validation(r.name() + ": truncated raster");
  for (auto& id : labels) id = r.get<std::uint32_t>("label");
  return labels;
}

void write_simulation(const SyntheticScene& scene, const NoiseConfig& noise, double resolution,
                      const fs::path& dir) {
  noise.validate();
  SequenceOptions options;
  options.resolution = resolution;
  options.embedding_dim = scene.embedding_dim();
  options.ground_truth = {{"scene", "scene.json"}, {"labels", "gt"}};
  SequenceWriter writer(dir, options);
  std::error_code ec;
  fs::create_directories(dir / "gt", ec);
  if (ec) throw_io("cannot create " + (dir / "gt").string() + ": " + ec.message());

  for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
    const auto gt = render_gt_frame(scene, scene.trajectory[k], k);
    writer.append(perturb(gt.frame, noise));
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.labels", k);
    write_label_raster(gt.labels, scene.intrinsics.width, scene.intrinsics.height,
                       dir / "gt" / name);
  }
  writer.finish();

  std::ofstream out(dir / "scene.json", std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open " + (dir / "scene.json").string() + " for writing");
  out << scene_to_json(scene);
}

}  // namespace voxelox
