#include "voxelox/codebook.hpp"
#include "voxelox/error.hpp"

#include <doctest.h>

#include <random>

using namespace voxelox;

TEST_CASE("weighted fusion arithmetic") {
  Codebook cb(2);
  const std::vector<float> x{1.0F, 0.0F};
  const std::vector<float> y{0.0F, 1.0F};
  cb.create(0, x, 1.0, std::nullopt);
  cb.fuse(0, y, 1.0, std::nullopt);
  const auto* rec = cb.find(0);
  CHECK(rec->embedding == std::vector<double>{0.5, 0.5});
  CHECK(rec->weight == 2.0);
}

TEST_CASE("zero weight leaves the record unchanged") {
  Codebook cb(2);
  const std::vector<float> x{1.0F, 0.0F};
  const std::vector<float> y{0.0F, 1.0F};
  cb.create(0, x, 1.0, std::string("a"));
  const CodebookRecord before = *cb.find(0);
  cb.fuse(0, y, 0.0, std::string("b"));
  CHECK(*cb.find(0) == before);
}

TEST_CASE("streamed fusion equals the one shot weighted mean") {
  std::mt19937_64 rng(41);
  std::normal_distribution<float> gauss(0.0F, 1.0F);
  std::uniform_real_distribution<double> weight(0.01, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 8;
    Codebook cb(dim);
    std::vector<double> sum(dim, 0.0);
    double total = 0.0;
    const int n = 1 + trial % 25;
    for (int i = 0; i < n; ++i) {
      std::vector<float> f(dim);
      for (auto& v : f) v = gauss(rng);
      const double w = i == 0 ? 1.0 : weight(rng);
      if (i == 0) {
        cb.create(0, f, w, std::nullopt);
      } else {
        cb.fuse(0, f, w, std::nullopt);
      }
      for (std::size_t j = 0; j < dim; ++j) sum[j] += w * f[j];
      total += w;
    }
    const auto* rec = cb.find(0);
    CHECK(rec->weight == doctest::Approx(total).epsilon(1e-12));
    for (std::size_t j = 0; j < dim; ++j) {
      CHECK(std::abs(rec->embedding[j] - sum[j] / total) <= 1e-9);
    }
  }
}

TEST_CASE("caption follows the strongest single observation") {
  Codebook cb(1);
  const std::vector<float> f{1.0F};
  cb.create(0, f, 1.0, std::string("mug"));
  cb.fuse(0, f, 0.5, std::string("cup"));
  CHECK(cb.find(0)->caption == "mug");
  cb.fuse(0, f, 2.0, std::string("vase"));
  CHECK(cb.find(0)->caption == "vase");
  cb.fuse(0, f, 3.0, std::nullopt);
  CHECK(cb.find(0)->caption == "vase");
}

TEST_CASE("merge fuses by weight and removes the source") {
  Codebook cb(2);
  const std::vector<float> x{1.0F, 0.0F};
  const std::vector<float> y{0.0F, 1.0F};
  cb.create(0, x, 3.0, std::nullopt);
  cb.create(1, y, 1.0, std::nullopt);
  cb.merge(0, 1);
  CHECK_FALSE(cb.contains(0));
  CHECK(cb.find(1)->embedding == std::vector<double>{0.75, 0.25});
  CHECK(cb.find(1)->weight == 4.0);
}

TEST_CASE("codebook rejects dimension mismatches and duplicate ids") {
  Codebook cb(2);
  const std::vector<float> x{1.0F, 0.0F};
  const std::vector<float> bad{1.0F};
  CHECK_THROWS_AS(cb.create(0, bad, 1.0, std::nullopt), Error);
  cb.create(0, x, 1.0, std::nullopt);
  CHECK_THROWS_AS(cb.create(0, x, 1.0, std::nullopt), Error);
  CHECK_THROWS_AS(cb.fuse(0, bad, 1.0, std::nullopt), Error);
  CHECK_THROWS_AS(cb.fuse(3, x, 1.0, std::nullopt), Error);
}
