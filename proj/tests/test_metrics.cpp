#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "isrm/metrics.hpp"
#include "isrm/rng.hpp"

using namespace isrm;

namespace {

Floorplan tiny_plan(int side, const std::vector<std::int16_t>& region) {
  Floorplan fp;
  fp.width = fp.height = side;
  fp.labels = RegionLabelSet::default_indoor();
  fp.occupancy.assign(side * side, 0);
  fp.region = region;
  for (int i = 0; i < side * side; ++i) {
    if (region[i] < 0) fp.occupancy[i] = 1;
  }
  return fp;
}

void set_prediction(RegionGrid& map, int row, int col, int label) {
  const int i = map.flat(row, col);
  map.explored(i) = 1.0f;
  map.obs_count(i) = 1;
  auto region = map.region(i);
  std::fill(region.begin(), region.end(), 0.0f);
  region[label] = 1.0f;
}

}  // namespace

TEST_CASE("a perfect fully-explored prediction scores ones") {
  const Floorplan fp = tiny_plan(4, {0, 0, 1, 1,
                                     0, 0, 1, 1,
                                     2, 2, 3, 3,
                                     2, 2, 3, 3});
  RegionGrid map = RegionGrid::global(4, 14, {0.0, 0.0});
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      set_prediction(map, r, c, fp.region[fp.flat(r, c)]);
    }
  }
  const MapMetrics m = compute_metrics(map, fp);
  CHECK(m.mask_acc == doctest::Approx(1.0));
  CHECK(m.ovr_acc == doctest::Approx(1.0));
  CHECK(m.mean_iou == doctest::Approx(1.0));
  CHECK(m.explored_fraction == doctest::Approx(1.0));
  CHECK(m.mask_acc_defined);
}

TEST_CASE("an empty prediction is flagged and scores zero") {
  const Floorplan fp = tiny_plan(4, std::vector<std::int16_t>(16, 2));
  const RegionGrid map = RegionGrid::global(4, 14, {0.0, 0.0});
  const MapMetrics m = compute_metrics(map, fp);
  CHECK_FALSE(m.mask_acc_defined);
  CHECK(m.mask_acc == 0.0);
  CHECK(m.ovr_acc == 0.0);
  CHECK(m.explored_fraction == 0.0);
}

TEST_CASE("hand-computed four-by-four confusion") {
  // navigable 4x4, two classes; the prediction explores 12 cells and is
  // wrong on 3 of them, all tallies enumerable by hand
  const Floorplan fp = tiny_plan(4, {0, 0, 0, 0,
                                     0, 0, 0, 0,
                                     1, 1, 1, 1,
                                     1, 1, 1, 1});
  RegionGrid map = RegionGrid::global(4, 14, {0.0, 0.0});
  // row 0-1: class 0 ground truth; predict 0 except (0,0)->1, (1,3)->1
  set_prediction(map, 0, 0, 1);
  set_prediction(map, 0, 1, 0);
  set_prediction(map, 0, 2, 0);
  set_prediction(map, 0, 3, 0);
  set_prediction(map, 1, 0, 0);
  set_prediction(map, 1, 1, 0);
  set_prediction(map, 1, 2, 0);
  set_prediction(map, 1, 3, 1);
  // row 2: class 1 ground truth; predict 1 except (2,2)->0
  set_prediction(map, 2, 0, 1);
  set_prediction(map, 2, 1, 1);
  set_prediction(map, 2, 2, 0);
  set_prediction(map, 2, 3, 1);
  // row 3 left unexplored

  const MapMetrics m = compute_metrics(map, fp);
  CHECK(m.mask_acc == doctest::Approx(9.0 / 12.0));
  CHECK(m.ovr_acc == doctest::Approx(9.0 / 16.0));
  CHECK(m.explored_fraction == doctest::Approx(12.0 / 16.0));
  // class 0: gt 8, pred 7 (six correct plus (2,2)), inter 6, union 9
  CHECK(m.per_class_iou[0] == doctest::Approx(6.0 / 9.0));
  // class 1: gt 8, pred 5 {(0,0),(1,3),(2,0),(2,1),(2,3)}, inter 3, union 10
  CHECK(m.per_class_iou[1] == doctest::Approx(3.0 / 10.0));
  CHECK(m.mean_iou == doctest::Approx((6.0 / 9.0 + 3.0 / 10.0) / 2.0));
  CHECK(m.class_present[0]);
  CHECK(m.class_present[1]);
  CHECK_FALSE(m.class_present[2]);
}

TEST_CASE("metrics are invariant under a simultaneous label permutation") {
  Rng rng(90);
  const int side = 12;
  std::vector<std::int16_t> region(side * side);
  for (auto& v : region) v = static_cast<std::int16_t>(rng.uniform_int(0, 4));
  const Floorplan fp = tiny_plan(side, region);
  RegionGrid map = RegionGrid::global(side, 14, {0.0, 0.0});
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (rng.uniform() < 0.3) continue;
      set_prediction(map, r, c, static_cast<int>(rng.uniform_int(0, 4)));
    }
  }
  const MapMetrics base = compute_metrics(map, fp);

  // permute labels 0..4 in both the map and the ground truth
  const int perm[5] = {3, 0, 4, 1, 2};
  std::vector<std::int16_t> permuted = region;
  for (auto& v : permuted) v = static_cast<std::int16_t>(perm[v]);
  const Floorplan fp2 = tiny_plan(side, permuted);
  RegionGrid map2 = RegionGrid::global(side, 14, {0.0, 0.0});
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = map.flat(r, c);
      if (map.obs_count(i) == 0) continue;
      set_prediction(map2, r, c, perm[argmax_region(map.region(i))]);
    }
  }
  const MapMetrics shuffled = compute_metrics(map2, fp2);
  CHECK(shuffled.mask_acc == doctest::Approx(base.mask_acc).epsilon(1e-12));
  CHECK(shuffled.ovr_acc == doctest::Approx(base.ovr_acc).epsilon(1e-12));
  CHECK(shuffled.mean_iou == doctest::Approx(base.mean_iou).epsilon(1e-12));
}

TEST_CASE("mask accuracy never falls below overall accuracy") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const int side = 10;
    std::vector<std::int16_t> region(side * side);
    for (auto& v : region) {
      v = rng.uniform() < 0.2 ? std::int16_t{-1}
                              : static_cast<std::int16_t>(rng.uniform_int(0, 3));
    }
    bool any_free = false;
    for (auto v : region) any_free |= v >= 0;
    if (!any_free) region[0] = 0;
    const Floorplan fp = tiny_plan(side, region);
    RegionGrid map = RegionGrid::global(side, 14, {0.0, 0.0});
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        if (rng.uniform() < 0.5) continue;
        set_prediction(map, r, c, static_cast<int>(rng.uniform_int(0, 3)));
      }
    }
    const MapMetrics m = compute_metrics(map, fp);
    REQUIRE(m.mask_acc >= m.ovr_acc);
  }
}

TEST_CASE("geometry mismatches are rejected") {
  const Floorplan fp = tiny_plan(8, std::vector<std::int16_t>(64, 0));
  CHECK_THROWS(compute_metrics(RegionGrid::global(4, 14, {0.0, 0.0}), fp));
  CHECK_THROWS(
      compute_metrics(RegionGrid::global(8, 14, {0.0, 0.0}, 0.1), fp));
  CHECK_THROWS(compute_metrics(RegionGrid::global(8, 5, {0.0, 0.0}), fp));
}

TEST_CASE("an all-unobserved map renders white") {
  const RegionGrid map = RegionGrid::global(6, 14, {0.0, 0.0});
  const auto path =
      (std::filesystem::temp_directory_path() / "isrm_white.ppm").string();
  render_map(map, path);
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "P6");
  std::getline(in, header);
  CHECK(header == "6 6");
  std::getline(in, header);
  for (int i = 0; i < 6 * 6 * 3; ++i) {
    REQUIRE(in.get() == 255);
  }
  std::filesystem::remove(path);
}

TEST_CASE("a one-label map renders that label's palette color everywhere") {
  RegionGrid map = RegionGrid::global(5, 14, {0.0, 0.0});
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) set_prediction(map, r, c, 1);
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "isrm_bedroom.ppm").string();
  render_map(map, path);
  std::ifstream in(path, std::ios::binary);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(in, line);
  const Rgb expected = palette_color(1);
  for (int i = 0; i < 25; ++i) {
    REQUIRE(in.get() == expected.r);
    REQUIRE(in.get() == expected.g);
    REQUIRE(in.get() == expected.b);
  }
  std::filesystem::remove(path);
}

TEST_CASE("rendered pixels decode back to argmax labels") {
  Rng rng(92);
  RegionGrid map = RegionGrid::global(10, 14, {0.0, 0.0});
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      if (rng.uniform() < 0.2) continue;
      set_prediction(map, r, c, static_cast<int>(rng.uniform_int(0, 13)));
    }
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "isrm_decode.ppm").string();
  render_map(map, path);
  std::ifstream in(path, std::ios::binary);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(in, line);
  std::vector<Rgb> pixels(100);
  for (auto& p : pixels) {
    p.r = static_cast<std::uint8_t>(in.get());
    p.g = static_cast<std::uint8_t>(in.get());
    p.b = static_cast<std::uint8_t>(in.get());
  }
  for (int row = 0; row < 10; ++row) {
    for (int col = 0; col < 10; ++col) {
      const Rgb pixel = pixels[(10 - 1 - row) * 10 + col];
      const int expected = argmax_region(map.region(map.flat(row, col)));
      REQUIRE(palette_label(pixel) == expected);
    }
  }
  std::filesystem::remove(path);

  // palette colors are pairwise distinct and distinct from the sentinels
  for (int a = 0; a < 14; ++a) {
    CHECK_FALSE(palette_color(a) == kUnobservedColor);
    CHECK_FALSE(palette_color(a) == kObstacleColor);
    for (int b = a + 1; b < 14; ++b) {
      CHECK_FALSE(palette_color(a) == palette_color(b));
    }
  }
}

TEST_CASE("render rejects unwritable paths") {
  const RegionGrid map = RegionGrid::global(4, 14, {0.0, 0.0});
  CHECK_THROWS(render_map(map, "/nonexistent-dir/out.ppm"));
}
