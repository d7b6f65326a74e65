#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "isrm/grid.hpp"
#include "isrm/labels.hpp"
#include "isrm/rng.hpp"

using namespace isrm;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

RegionGrid random_grid(int side, int c, Rng& rng) {
  RegionGrid grid = RegionGrid::global(side, c, {-1.0, 2.5}, 0.05);
  for (int i = 0; i < grid.num_cells(); ++i) {
    if (rng.uniform() < 0.4) continue;  // leave some cells blank
    grid.explored(i) = 1.0f;
    grid.obs_count(i) = static_cast<std::uint32_t>(rng.uniform_int(1, 9));
    grid.occupancy(i) = rng.uniform() < 0.2 ? 1.0f : 0.0f;
    auto region = grid.region(i);
    double sum = 0.0;
    for (auto& v : region) {
      v = static_cast<float>(rng.uniform());
      sum += v;
    }
    for (auto& v : region) v = static_cast<float>(v / sum);
  }
  return grid;
}

}  // namespace

TEST_CASE("default label set") {
  const auto labels = RegionLabelSet::default_indoor();
  CHECK(labels.size() == 14);
  CHECK(labels.name(0) == "bathroom");
  CHECK(labels.name(13) == "stairs");
  CHECK(labels.index_of("kitchen") == 7);
  CHECK(labels.index_of("spa") == -1);
  CHECK_THROWS(RegionLabelSet({"a", "a"}));
  CHECK_THROWS(RegionLabelSet(std::vector<std::string>{}));
}

TEST_CASE("world_to_cell basics") {
  RegionGrid map = RegionGrid::global(64, 3, {0.0, 0.0}, 0.05);
  const CellIndex i1 = map.world_to_cell({0.26, 0.0});
  CHECK(i1 == CellIndex{5, 0});
  CHECK(map.world_to_cell({0.0, 0.0}) == CellIndex{0, 0});
  CHECK_THROWS_AS(map.world_to_cell({-0.01, 0.0}), std::out_of_range);
  CHECK_THROWS_AS(map.world_to_cell({64 * 0.05 + 0.01, 0.0}),
                  std::out_of_range);
}

TEST_CASE("cell center round-trips through world_to_cell") {
  RegionGrid map = RegionGrid::global(41, 2, {-3.1, 0.7}, 0.05);
  Rng rng(7);
  for (int n = 0; n < 100; ++n) {
    const int row = static_cast<int>(rng.uniform_int(0, map.side() - 1));
    const int col = static_cast<int>(rng.uniform_int(0, map.side() - 1));
    const CellIndex idx = map.world_to_cell(map.cell_center(row, col));
    CHECK(idx.x == col);
    CHECK(idx.y == row);
  }
  for (int row = 0; row < map.side(); ++row) {
    for (int col = 0; col < map.side(); ++col) {
      const CellIndex idx = map.world_to_cell(map.cell_center(row, col));
      REQUIRE(idx == CellIndex{col, row});
    }
  }
}

TEST_CASE("pose composition") {
  const Pose start{0.0, 0.0, 0.0};
  const Pose fwd = compose_pose(start, Action::Forward);
  CHECK(fwd.x == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(fwd.y == doctest::Approx(0.0).epsilon(1e-12));

  Pose p{0.0, 0.0, 175.0 * kPi / 180.0};
  p = compose_pose(compose_pose(p, Action::TurnLeft), Action::TurnLeft);
  CHECK(p.theta == doctest::Approx(-165.0 * kPi / 180.0).epsilon(1e-9));

  Pose q{1.0, 2.0, 0.3};
  for (int i = 0; i < 36; ++i) q = compose_pose(q, Action::TurnLeft);
  CHECK(q.theta == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("theta stays normalized under random action sequences") {
  Rng rng(99);
  Pose p{0.0, 0.0, 0.0};
  double angle_sum = 0.0;  // plain accumulation as the composition oracle
  for (int i = 0; i < 100000; ++i) {
    const int a = static_cast<int>(rng.uniform_int(0, 2));
    const Action action = a == 0   ? Action::Forward
                          : a == 1 ? Action::TurnLeft
                                   : Action::TurnRight;
    if (action == Action::TurnLeft) angle_sum += kTurnStep;
    if (action == Action::TurnRight) angle_sum -= kTurnStep;
    p = compose_pose(p, action);
    REQUIRE(p.theta >= -kPi);
    REQUIRE(p.theta < kPi);
  }
  CHECK(p.theta == doctest::Approx(wrap_angle(angle_sum)).epsilon(1e-6));
}

TEST_CASE("argmax_region tie-breaking and sentinel") {
  std::vector<float> one_hot(8, 0.0f);
  one_hot[3] = 1.0f;
  CHECK(argmax_region(one_hot) == 3);

  const std::vector<float> zero(8, 0.0f);
  CHECK(argmax_region(zero) == kUnobserved);

  const std::vector<float> uniform(8, 0.125f);
  CHECK(argmax_region(uniform) == 0);
}

TEST_CASE("validate flags inconsistent cells") {
  RegionGrid map = RegionGrid::global(4, 3, {0.0, 0.0});
  CHECK(map.validate().empty());

  CategoricalCell cell;
  cell.region = {0.5f, 0.5f, 0.0f};
  cell.explored = 1.0f;
  cell.obs_count = 2;
  map.set_cell(1, 1, cell);
  CHECK(map.validate().empty());

  // region mass without an observation count
  map.obs_count(map.flat(1, 1)) = 0;
  CHECK_FALSE(map.validate().empty());
  map.obs_count(map.flat(1, 1)) = 2;

  // unnormalized region
  map.region(map.flat(1, 1))[0] = 0.9f;
  CHECK_FALSE(map.validate().empty());
}

TEST_CASE("egocentric anchor sits at the agent origin") {
  RegionGrid ego = RegionGrid::egocentric(101, 5);
  const Vec2 anchor = ego.cell_center(0, 50);
  CHECK(anchor.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(anchor.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ego.world_to_cell({0.0, 0.0}) == CellIndex{50, 0});
}

TEST_CASE("binary serialization round-trips bit-exactly") {
  Rng rng(1234);
  const RegionGrid grid = random_grid(23, 5, rng);
  const std::string path = temp_path("isrm_test_grid.bin");
  grid.save_binary(path);
  const RegionGrid loaded = RegionGrid::load_binary(path);
  CHECK(grid == loaded);

  // identical input produces identical bytes
  const std::string path2 = temp_path("isrm_test_grid2.bin");
  grid.save_binary(path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("text serialization round-trips exactly") {
  Rng rng(77);
  const RegionGrid grid = random_grid(11, 4, rng);
  const std::string path = temp_path("isrm_test_grid.txt");
  grid.save_text(path);
  const RegionGrid loaded = RegionGrid::load_text(path);
  CHECK(grid == loaded);
  std::filesystem::remove(path);
}

TEST_CASE("serialization rejects foreign files") {
  const std::string path = temp_path("isrm_test_bogus.bin");
  std::ofstream(path) << "not a map";
  CHECK_THROWS(RegionGrid::load_binary(path));
  CHECK_THROWS(RegionGrid::load_text(path));
  std::filesystem::remove(path);
}
