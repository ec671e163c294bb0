#include "support.hpp"

#include "voxelox/error.hpp"
#include "voxelox/frame.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <limits>

using namespace voxelox;

TEST_CASE("mask from indices is canonical") {
  const Mask m = Mask::from_indices({5, 3, 4, 4, 9, 10, 0});
  CHECK(m.runs() == std::vector<PixelRun>{{0, 1}, {3, 3}, {9, 2}});
  CHECK(m.pixel_count() == 6);
  CHECK(m.extent_end() == 11);
  CHECK(m.check_runs().empty());
  CHECK(m.to_indices() == std::vector<std::uint32_t>{0, 3, 4, 5, 9, 10});
}

TEST_CASE("mask raster round trip over random sets") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> raster(97);
    std::bernoulli_distribution coin(0.3);
    std::vector<std::uint32_t> expected;
    for (std::uint32_t i = 0; i < raster.size(); ++i) {
      raster[i] = coin(rng) ? 1 : 0;
      if (raster[i] != 0) expected.push_back(i);
    }
    const Mask m = Mask::from_raster(raster);
    CHECK(m.to_indices() == expected);
    CHECK(m == Mask::from_indices(expected));
    std::vector<std::uint32_t> visited;
    m.for_each_pixel([&](std::uint32_t i) { visited.push_back(i); });
    CHECK(visited == expected);
  }
}

TEST_CASE("check_runs reports malformed runs") {
  CHECK_FALSE(Mask::from_runs({{0, 0}}).check_runs().empty());
  CHECK_FALSE(Mask::from_runs({{5, 2}, {3, 1}}).check_runs().empty());
  CHECK_FALSE(Mask::from_runs({{0, 3}, {2, 2}}).check_runs().empty());
  CHECK(Mask::from_runs({{0, 3}, {4, 2}}).check_runs().empty());
}

TEST_CASE("validate_frame accepts a well formed frame") {
  auto frame = vtest::grid_frame(4, 4);
  frame.masks.push_back(vtest::observation({0, 1}, {1.0F, 0.0F}));
  frame.masks.push_back(vtest::observation({5, 6}, {0.0F, 1.0F}, 0.5F));
  CHECK_NOTHROW(validate_frame(frame));
  CHECK_NOTHROW(validate_frame(frame, 2));
  CHECK_THROWS_AS(validate_frame(frame, 3), Error);
}

TEST_CASE("validate_frame rejects each broken invariant") {
  const auto base = [] {
    auto f = vtest::grid_frame(4, 4);
    f.masks.push_back(vtest::observation({0, 1}, {1.0F, 0.0F}));
    return f;
  };
  auto out_of_bounds = base();
  out_of_bounds.masks[0].mask = Mask::from_indices({15, 16});
  CHECK_THROWS_AS(validate_frame(out_of_bounds), Error);

  auto empty_mask = base();
  empty_mask.masks[0].mask = Mask{};
  CHECK_THROWS_AS(validate_frame(empty_mask), Error);

  auto zero_feature = base();
  zero_feature.masks[0].feature = {0.0F, 0.0F};
  CHECK_THROWS_AS(validate_frame(zero_feature), Error);

  auto nan_feature = base();
  nan_feature.masks[0].feature[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(validate_frame(nan_feature), Error);

  auto bad_score = base();
  bad_score.masks[0].detection_score = 1.5F;
  CHECK_THROWS_AS(validate_frame(bad_score), Error);

  auto short_depth = base();
  short_depth.depth_mm.pop_back();
  CHECK_THROWS_AS(validate_frame(short_depth), Error);

  auto mixed_dims = base();
  mixed_dims.masks.push_back(vtest::observation({8}, {1.0F, 0.0F, 0.0F}));
  CHECK_THROWS_AS(validate_frame(mixed_dims), Error);

  auto overlap = base();
  overlap.masks.push_back(vtest::observation({1, 2}, {0.0F, 1.0F}));
  CHECK_THROWS_AS(validate_frame(overlap), Error);
  overlap.masks_may_overlap = true;
  CHECK_NOTHROW(validate_frame(overlap));

  auto bad_pose = base();
  bad_pose.pose.rotation(0, 1) = 0.5;
  CHECK_THROWS_AS(validate_frame(bad_pose), Error);
}

TEST_CASE("validation errors name the frame") {
  auto frame = vtest::grid_frame(4, 4, 42);
  frame.masks.push_back(vtest::observation({0}, {0.0F}));
  try {
    validate_frame(frame);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("mask owner raster gives overlapping pixels to the last mask") {
  auto frame = vtest::grid_frame(3, 1);
  frame.masks_may_overlap = true;
  frame.masks.push_back(vtest::observation({0, 1}, {1.0F}));
  frame.masks.push_back(vtest::observation({1, 2}, {1.0F}));
  CHECK(mask_owner_raster(frame) == std::vector<std::int32_t>{0, 1, 1});
}

TEST_CASE("depth_to_mm rounds and rejects out of range values") {
  CHECK(depth_to_mm(1.2344) == 1234);
  CHECK(depth_to_mm(1.2346) == 1235);
  CHECK(depth_to_mm(0.0) == 0);
  CHECK(depth_to_mm(-1.0) == 0);
  CHECK(depth_to_mm(70.0) == 0);
  CHECK(depth_to_mm(std::numeric_limits<double>::quiet_NaN()) == 0);
}
