#include "oracles.hpp"

#include "voxelox/error.hpp"
#include "voxelox/evaluate.hpp"
#include "voxelox/evolution.hpp"
#include "voxelox/simulate.hpp"

#include <doctest.h>

#include <json.hpp>

#include <random>

using namespace voxelox;

namespace {

std::vector<VoxelKey> line(int x0, int n, int y = 0) {
  std::vector<VoxelKey> out;
  for (int i = 0; i < n; ++i) out.push_back({x0 + i, y, 0});
  return out;
}

InstanceRegion region(InstanceId id, double conf, std::vector<VoxelKey> voxels) {
  std::sort(voxels.begin(), voxels.end());
  return {id, conf, std::move(voxels)};
}

}  // namespace

TEST_CASE("voxel iou arithmetic") {
  const auto a = line(0, 10);
  CHECK(voxel_iou(a, a) == 1.0);
  CHECK(voxel_iou(a, line(20, 10)) == 0.0);
  CHECK(voxel_iou(a, line(5, 10)) == doctest::Approx(5.0 / 15.0).epsilon(1e-15));
  CHECK(voxel_iou({}, {}) == 0.0);
}

TEST_CASE("voxel iou matches the set oracle on random sets") {
  std::mt19937_64 rng(91);
  std::uniform_int_distribution<int> c(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<VoxelKey> a;
    std::set<VoxelKey> b;
    for (int i = 0; i < 30; ++i) a.insert({c(rng), c(rng), c(rng)});
    for (int i = 0; i < 30; ++i) b.insert({c(rng), c(rng), c(rng)});
    const std::vector<VoxelKey> va(a.begin(), a.end());
    const std::vector<VoxelKey> vb(b.begin(), b.end());
    CHECK(std::abs(voxel_iou(va, vb) - vtest::oracle_iou(a, b)) <= 1e-9);
  }
}

TEST_CASE("perfect predictions score one and no predictions score zero") {
  const std::vector<InstanceRegion> gt{region(0, 1.0, line(0, 10)), region(1, 1.0, line(0, 10, 3))};
  const auto perfect = instance_ap(gt, gt);
  CHECK(perfect.ap == 1.0);
  CHECK(perfect.ap50 == 1.0);
  CHECK(perfect.ap25 == 1.0);
  const auto none = instance_ap({}, gt);
  CHECK(none.ap == 0.0);
  CHECK(none.ap50 == 0.0);
  CHECK(none.ap25 == 0.0);
  CHECK_THROWS_AS(instance_ap(gt, {}), Error);
}

TEST_CASE("two instance toy case matches the hand computed PR curve") {
  // GT A has 10 voxels, GT B has 13. Predictions by confidence:
  //   P0 (0.9) disjoint from everything   -> false positive
  //   P1 (0.8) equals A                   -> IoU 1
  //   P2 (0.7) covers 8 voxels of B       -> IoU 8/13 = 0.615
  const std::vector<InstanceRegion> gt{region(0, 1.0, line(0, 10)), region(1, 1.0, line(0, 13, 2))};
  const std::vector<InstanceRegion> pred{region(10, 0.9, line(0, 5, 9)), region(11, 0.8, line(0, 10)),
                                         region(12, 0.7, line(0, 8, 2))};
  // Thresholds up to 0.615: FP, TP, TP -> precision (0, 1/2, 2/3), recall
  // (0, 1/2, 1). The interpolated precision is 2/3 at every recall level.
  const double both = 2.0 / 3.0;
  // Above 0.615: FP, TP, FP -> interpolated precision 1/2 for recall <= 1/2
  // (51 of the 101 levels) and 0 above.
  const double only_a = 0.5 * 51.0 / 101.0;
  const auto s = instance_ap(pred, gt);
  CHECK(std::abs(s.ap50 - both) <= 1e-9);
  CHECK(std::abs(s.ap25 - both) <= 1e-9);
  CHECK(std::abs(s.ap - (3.0 * both + 7.0 * only_a) / 10.0) <= 1e-9);
  CHECK(std::abs(average_precision_at(pred, gt, 0.7) - only_a) <= 1e-9);
}

TEST_CASE("each ground truth instance is matched once") {
  const std::vector<InstanceRegion> gt{region(0, 1.0, line(0, 10))};
  const std::vector<InstanceRegion> pred{region(1, 0.9, line(0, 10)), region(2, 0.8, line(0, 10))};
  // TP then FP: precision 1 up to full recall.
  CHECK(average_precision_at(pred, gt, 0.5) == 1.0);
  const std::vector<InstanceRegion> flipped{region(1, 0.5, line(0, 10)), region(2, 0.8, line(20, 10))};
  // FP then TP: precision 1/2 at full recall.
  CHECK(std::abs(average_precision_at(flipped, gt, 0.5) - 0.5) <= 1e-12);
}

TEST_CASE("semantic scores on simple fixtures") {
  absl::flat_hash_map<VoxelKey, int> gt;
  absl::flat_hash_map<VoxelKey, int> pred;
  for (int i = 0; i < 10; ++i) {
    gt[{i, 0, 0}] = i < 5 ? 0 : 1;
    pred[{i, 0, 0}] = 0;
  }
  const auto s = semantic_scores(pred, gt);
  CHECK(s.macc == 0.5);
  CHECK(s.miou == doctest::Approx(0.25).epsilon(1e-15));
  const auto perfect = semantic_scores(gt, gt);
  CHECK(perfect.miou == 1.0);
  CHECK(perfect.macc == 1.0);
}

TEST_CASE("semantic scores match a confusion matrix oracle") {
  std::mt19937_64 rng(93);
  std::uniform_int_distribution<int> cls(-1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    absl::flat_hash_map<VoxelKey, int> gt;
    absl::flat_hash_map<VoxelKey, int> pred;
    // Rows are GT class + 1, columns predicted class + 1; index 0 is "absent".
    double confusion[4][4] = {};
    for (int x = 0; x < 6; ++x) {
      for (int y = 0; y < 6; ++y) {
        const int g = cls(rng);
        const int p = cls(rng);
        if (g >= 0) gt[{x, y, 0}] = g;
        if (p >= 0) pred[{x, y, 0}] = p;
        if (g >= 0 || p >= 0) confusion[g + 1][p + 1] += 1.0;
      }
    }
    double miou = 0.0;
    double macc = 0.0;
    int present = 0;
    for (int c = 1; c <= 3; ++c) {
      double row = 0.0;
      double col = 0.0;
      for (int k = 0; k < 4; ++k) {
        row += confusion[c][k];
        col += confusion[k][c];
      }
      if (row == 0.0) continue;
      ++present;
      miou += confusion[c][c] / (row + col - confusion[c][c]);
      macc += confusion[c][c] / row;
    }
    const auto s = semantic_scores(pred, gt);
    CHECK(std::abs(s.miou - miou / present) <= 1e-9);
    CHECK(std::abs(s.macc - macc / present) <= 1e-9);
  }
}

TEST_CASE("retrieval recall on exact and adversarial queries") {
  Codebook cb(8);
  for (std::size_t i = 0; i < 6; ++i) cb.create(static_cast<InstanceId>(i), vtest::unit(8, i), 1.0, std::nullopt);
  std::vector<RetrievalQuery> exact;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto f = vtest::unit(8, i);
    exact.push_back({{f.begin(), f.end()}, {static_cast<InstanceId>(i)}});
  }
  const std::vector<std::size_t> ks{1, 2, 3};
  CHECK(retrieval_recall(cb, exact, ks) == std::vector<double>{1.0, 1.0, 1.0});

  // Orthogonal to every instance: all scores tie at 0 and the smallest IDs
  // are returned, so the largest ID is never found.
  const auto f = vtest::unit(8, 7);
  const std::vector<RetrievalQuery> adversarial{{{f.begin(), f.end()}, {5}}};
  CHECK(retrieval_recall(cb, adversarial, ks) == std::vector<double>{0.0, 0.0, 0.0});

  CHECK_THROWS_AS(retrieval_recall(cb, std::vector<RetrievalQuery>{}, ks), Error);
  const std::vector<RetrievalQuery> unknown{{{f.begin(), f.end()}, {42}}};
  CHECK_THROWS_AS(retrieval_recall(cb, unknown, ks), Error);
}

TEST_CASE("noisy retrieval recall is monotone in k") {
  std::mt19937_64 rng(97);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    Codebook cb(16);
    for (std::size_t i = 0; i < 8; ++i) cb.create(static_cast<InstanceId>(i), vtest::unit(16, i), 1.0, std::nullopt);
    std::vector<RetrievalQuery> queries;
    for (std::size_t i = 0; i < 8; ++i) {
      std::vector<double> q(16);
      for (std::size_t k = 0; k < 16; ++k) q[k] = (k == i ? 1.0 : 0.0) + noise(rng);
      queries.push_back({q, {static_cast<InstanceId>(i)}});
    }
    const std::vector<std::size_t> ks{1, 2, 3};
    const auto r = retrieval_recall(cb, queries, ks);
    CHECK(r[0] <= r[1]);
    CHECK(r[1] <= r[2]);
  }
}

TEST_CASE("predicted instance confidence is the mean max theta of the region") {
  VoxelMap map;
  map.mint_instance();
  map.mint_instance();
  map.increment({0, 0, 0}, 0);
  map.increment({1, 0, 0}, 0);
  map.increment({1, 0, 0}, 0);
  map.increment({1, 0, 0}, 0);
  map.increment({1, 0, 0}, 1);
  map.increment({2, 0, 0}, 1);
  const auto regions = predicted_instances(map);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].id == 0);
  CHECK(regions[0].voxels.size() == 2);
  CHECK(regions[0].confidence == doctest::Approx((1.0 + 0.75) / 2.0).epsilon(1e-15));
  CHECK(regions[1].confidence == 1.0);
}

TEST_CASE("ground truth evaluated against itself is perfect") {
  SceneConfig cfg;
  cfg.seed = 12;
  cfg.n_frames = 30;
  const auto scene = generate_scene(cfg);
  const auto gt = build_ground_truth(scene, 0.04);
  CHECK(ground_truth_instances(gt).size() == scene.objects.size());
  const auto report = evaluate_ground_truth(scene, gt);
  CHECK(report.instance.ap == 1.0);
  CHECK(report.instance.ap50 == 1.0);
  CHECK(report.instance.ap25 == 1.0);
  CHECK(report.semantic.miou == 1.0);
  CHECK(report.semantic.macc == 1.0);
  for (const auto& [name, r] : report.recall) CHECK(r[0] == 1.0);
}

TEST_CASE("noise free map evaluation and report formats") {
  SceneConfig cfg;
  cfg.seed = 13;
  cfg.n_frames = 40;
  const auto scene = generate_scene(cfg);
  VoxelMap map;
  Codebook cb(scene.embedding_dim());
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) {
    integrate_frame(map, cb, render_gt_frame(scene, scene.trajectory[i], i).frame, {});
  }
  const auto gt = build_ground_truth(scene, 0.04);
  const auto report = evaluate_map(map, cb, scene, gt);
  CHECK(report.instance.ap25 >= 0.9);
  CHECK(report.recall.at("class")[0] == 1.0);
  CHECK(report.gt_instances == scene.objects.size());
  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j.contains("AP50"));
  CHECK(report.to_table().find("AP50") != std::string::npos);

  const auto coarse = build_ground_truth(scene, 0.05);
  CHECK_THROWS_AS(evaluate_map(map, cb, scene, coarse), Error);
}
