#include "support.hpp"

#include "voxelox/error.hpp"
#include "voxelox/frame_store.hpp"
#include "voxelox/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace voxelox;

namespace {

SyntheticScene single_box_scene() {
  SyntheticScene scene;
  SceneObject box;
  box.id = 0;
  box.class_id = 0;
  box.shape = ShapeKind::Box;
  box.center = {0.0, 0.0, 0.2};
  box.half_extents = {0.2, 0.2, 0.2};
  scene.objects.push_back(box);
  scene.class_embeddings = {{1.0, 0.0, 0.0, 0.0}};
  scene.intrinsics = {100.0, 100.0, 40.0, 30.0, 80, 60};
  scene.bounds_min = {-0.2, -0.2, 0.0};
  scene.bounds_max = {0.2, 0.2, 0.4};
  return scene;
}

std::set<std::uint32_t> union_of(const FrameBundle& f) {
  std::set<std::uint32_t> out;
  for (const auto& m : f.masks) {
    for (const auto p : m.mask.to_indices()) out.insert(p);
  }
  return out;
}

}  // namespace

TEST_CASE("scene generation is deterministic per seed") {
  SceneConfig cfg;
  cfg.seed = 7;
  CHECK(generate_scene(cfg) == generate_scene(cfg));
  SceneConfig other = cfg;
  other.seed = 8;
  CHECK_FALSE(generate_scene(cfg) == generate_scene(other));
}

TEST_CASE("generated objects rest on the floor without overlap") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.n_objects = 10;
    const auto scene = generate_scene(cfg);
    REQUIRE(scene.objects.size() == 10);
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& a = scene.objects[i];
      CHECK(a.id == i);
      const double bottom = a.shape == ShapeKind::Box ? a.center.z() - a.half_extents.z()
                                                      : a.center.z() - a.radius;
      CHECK(std::abs(bottom) < 1e-12);
      for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
        const auto& b = scene.objects[j];
        const double d = (a.center.head<2>() - b.center.head<2>()).norm();
        CHECK(d > a.footprint_radius() + b.footprint_radius());
      }
    }
    // Class embeddings are orthonormal.
    for (std::size_t i = 0; i < scene.class_embeddings.size(); ++i) {
      for (std::size_t j = 0; j < scene.class_embeddings.size(); ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < scene.embedding_dim(); ++k) {
          dot += scene.class_embeddings[i][k] * scene.class_embeddings[j][k];
        }
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("impossible packing is a validation error") {
  SceneConfig cfg;
  cfg.n_objects = 60;
  cfg.floor_half_size = 0.5;
  CHECK_THROWS_AS(generate_scene(cfg), Error);
}

TEST_CASE("single object scene is seen by the trajectory") {
  SceneConfig cfg;
  cfg.n_objects = 1;
  cfg.n_frames = 12;
  const auto scene = generate_scene(cfg);
  REQUIRE(scene.objects.size() == 1);
  std::size_t seen = 0;
  for (const auto& pose : scene.trajectory) seen += render_gt_frame(scene, pose).frame.masks.size();
  CHECK(seen == 12);
}

TEST_CASE("every object is visible in at least two frames") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.n_objects = 8;
    const auto scene = generate_scene(cfg);
    std::vector<int> frames_seen(scene.objects.size(), 0);
    for (const auto& pose : scene.trajectory) {
      const auto gt = render_gt_frame(scene, pose);
      std::set<InstanceId> present(gt.labels.begin(), gt.labels.end());
      for (const auto id : present) {
        if (id != kNoInstance) ++frames_seen[id];
      }
    }
    for (const int n : frames_seen) CHECK(n >= 2);
  }
}

TEST_CASE("camera facing empty space renders nothing") {
  const auto scene = single_box_scene();
  const Pose away = look_at({0.0, 0.0, 2.0}, {0.0, 5.0, 4.0});
  const auto gt = render_gt_frame(scene, away);
  CHECK(gt.frame.masks.empty());
  for (const auto d : gt.frame.depth_mm) CHECK(d == 0);
}

TEST_CASE("single box depth equals the analytic distance") {
  const auto scene = single_box_scene();
  // Looking along -x at the face x = 0.2 from x = 2.0: every hit has z-depth 1.8 m.
  const Pose pose = look_at({2.0, 0.0, 0.2}, {0.0, 0.0, 0.2});
  const auto gt = render_gt_frame(scene, pose, 5);
  REQUIRE(gt.frame.masks.size() == 1);
  CHECK(gt.frame.frame_id == 5);
  gt.frame.masks[0].mask.for_each_pixel([&](std::uint32_t p) { CHECK(gt.frame.depth_mm[p] == 1800); });
  // The face spans 0.4 m at 1.8 m: 0.4 * 100 / 1.8 = 22.2 px per side.
  const double side = std::sqrt(static_cast<double>(gt.frame.masks[0].mask.pixel_count()));
  CHECK(side == doctest::Approx(22.2).epsilon(0.05));
  CHECK(gt.frame.masks[0].feature == std::vector<float>{1.0F, 0.0F, 0.0F, 0.0F});
}

TEST_CASE("ground truth raster agrees with the masks") {
  SceneConfig cfg;
  cfg.seed = 2;
  const auto scene = generate_scene(cfg);
  for (std::size_t f = 0; f < scene.trajectory.size(); f += 10) {
    const auto gt = render_gt_frame(scene, scene.trajectory[f], f);
    CHECK_NOTHROW(validate_frame(gt.frame, scene.embedding_dim()));
    std::vector<std::uint8_t> covered(gt.labels.size(), 0);
    for (const auto& m : gt.frame.masks) {
      const auto px = m.mask.to_indices();
      REQUIRE_FALSE(px.empty());
      const InstanceId id = gt.labels[px.front()];
      const auto& emb = scene.class_embeddings[static_cast<std::size_t>(scene.objects[id].class_id)];
      CHECK(m.feature == std::vector<float>(emb.begin(), emb.end()));
      for (const auto p : px) {
        CHECK(gt.labels[p] == id);
        covered[p] = 1;
      }
    }
    for (std::size_t p = 0; p < gt.labels.size(); ++p) {
      CHECK((gt.labels[p] != kNoInstance) == (covered[p] != 0));
      CHECK((gt.labels[p] != kNoInstance) == (gt.frame.depth_mm[p] != 0));
    }
  }
}

TEST_CASE("zero noise is the identity and full drop removes every mask") {
  SceneConfig cfg;
  const auto scene = generate_scene(cfg);
  const auto frame = render_gt_frame(scene, scene.trajectory[0]).frame;
  CHECK(perturb(frame, NoiseConfig{}) == frame);
  NoiseConfig drop;
  drop.p_drop = 1.0;
  const auto dropped = perturb(frame, drop);
  CHECK(dropped.masks.empty());
  CHECK(dropped.depth_mm == frame.depth_mm);
}

TEST_CASE("full split turns one region into two halves with the same pixels") {
  auto frame = vtest::grid_frame(10, 4);
  frame.masks.push_back(vtest::observation(vtest::rect(10, 1, 1, 9, 3), {1.0F, 0.0F}));
  NoiseConfig split;
  split.p_split = 1.0;
  const auto out = perturb(frame, split);
  REQUIRE(out.masks.size() == 2);
  CHECK(out.masks[0].mask.pixel_count() == 8);
  CHECK(out.masks[1].mask.pixel_count() == 8);
  CHECK(union_of(out) == union_of(frame));
  for (const auto& m : out.masks) CHECK(m.feature == frame.masks[0].feature);
  // Halves are separated along the major (horizontal) axis.
  const auto left = out.masks[0].mask.to_indices();
  const auto right = out.masks[1].mask.to_indices();
  const auto max_u = [](const std::vector<std::uint32_t>& px) {
    std::uint32_t m = 0;
    for (const auto p : px) m = std::max(m, p % 10);
    return m;
  };
  const auto min_u = [](const std::vector<std::uint32_t>& px) {
    std::uint32_t m = 10;
    for (const auto p : px) m = std::min(m, p % 10);
    return m;
  };
  CHECK((max_u(left) < min_u(right) || max_u(right) < min_u(left)));
}

TEST_CASE("full merge joins adjacent regions and keeps the larger feature") {
  auto frame = vtest::grid_frame(10, 2);
  frame.masks.push_back(vtest::observation(vtest::rect(10, 0, 0, 3, 2), {1.0F, 0.0F}, 0.4F));
  frame.masks.push_back(vtest::observation(vtest::rect(10, 3, 0, 10, 2), {0.0F, 1.0F}, 0.6F));
  NoiseConfig merge;
  merge.p_merge = 1.0;
  const auto out = perturb(frame, merge);
  REQUIRE(out.masks.size() == 1);
  CHECK(union_of(out) == union_of(frame));
  CHECK(out.masks[0].feature == std::vector<float>{0.0F, 1.0F});
  CHECK(out.masks[0].detection_score == 0.6F);
}

TEST_CASE("perturbed frames stay valid and depend only on seed and frame id") {
  SceneConfig cfg;
  cfg.seed = 9;
  cfg.n_objects = 8;
  const auto scene = generate_scene(cfg);
  NoiseConfig noise;
  noise.p_drop = 0.1;
  noise.p_split = 0.15;
  noise.p_merge = 0.15;
  noise.boundary_jitter = 2;
  noise.embedding_noise_sigma = 0.1;
  noise.depth_noise_sigma = 0.01;
  noise.seed = 5;
  for (std::size_t f = 0; f < scene.trajectory.size(); f += 7) {
    const auto frame = render_gt_frame(scene, scene.trajectory[f], f).frame;
    const auto a = perturb(frame, noise);
    CHECK(a == perturb(frame, noise));
    CHECK_NOTHROW(validate_frame(a, scene.embedding_dim()));
  }
}

TEST_CASE("noise config validation") {
  NoiseConfig bad;
  bad.p_split = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.boundary_jitter = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.depth_noise_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("written simulation round trips scene and labels") {
  SceneConfig cfg;
  cfg.seed = 1;
  cfg.n_frames = 6;
  const auto scene = generate_scene(cfg);
  vtest::TempDir dir;
  write_simulation(scene, NoiseConfig{}, 0.04, dir.path());
  CHECK(load_scene(dir.path()) == scene);
  const auto frames = read_sequence(dir.path());
  REQUIRE(frames.size() == 6);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto gt = render_gt_frame(scene, scene.trajectory[i], i);
    CHECK(frames[i] == gt.frame);
    char name[32];
    std::snprintf(name, sizeof name, "gt/%06zu.labels", i);
    CHECK(read_label_raster(dir / name, scene.intrinsics.width, scene.intrinsics.height) == gt.labels);
  }
  CHECK(scene_from_json(scene_to_json(scene), "test") == scene);
}
