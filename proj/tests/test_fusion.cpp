#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "isrm/fusion.hpp"
#include "isrm/rng.hpp"
#include "oracles.hpp"

using namespace isrm;

namespace {

// Local map with every cell observed and a per-cell one-hot region equal to
// (row + col) mod C; handy for checking where cells land after registration.
RegionGrid patterned_local(int side, int c) {
  RegionGrid local = RegionGrid::egocentric(side, c);
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const int i = local.flat(r, col);
      local.explored(i) = 1.0f;
      local.obs_count(i) = 1;
      local.region(i)[(r + col) % c] = 1.0f;
    }
  }
  return local;
}

RegisteredCells single_cell(std::uint32_t index,
                            const std::vector<double>& region,
                            float occupancy = 0.0f) {
  RegisteredCells cells;
  cells.num_labels = static_cast<int>(region.size());
  cells.indices = {index};
  cells.occupancy = {occupancy};
  cells.explored = {1.0f};
  for (double v : region) cells.region.push_back(static_cast<float>(v));
  return cells;
}

std::vector<double> spurious_distribution(int c, int label, double eps) {
  std::vector<double> v(c, c > 1 ? eps / (c - 1) : 0.0);
  v[label] = 1.0 - eps;
  return v;
}

// Stream protocol: T observations of one cell, mostly confident correct
// label A with occasional confident spurious label B. Returns per-rule
// error counts (final argmax != A) over the seeds.
struct StreamErrors {
  int moving_average = 0;
  int bayesian = 0;
};

StreamErrors stream_error_counts(double spurious_eps, int seeds, int t_steps,
                                 double spurious_p, int c) {
  const int label_a = 0, label_b = 1;
  StreamErrors errors;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(derive_seed(9000, seed));
    RegionGrid avg_map = RegionGrid::global(1, c, {0.0, 0.0});
    RegionGrid bayes_map = RegionGrid::global(1, c, {0.0, 0.0});
    for (int t = 0; t < t_steps; ++t) {
      const bool spurious = rng.uniform() < spurious_p;
      const auto obs = spurious
                           ? spurious_distribution(c, label_b, spurious_eps)
                           : spurious_distribution(c, label_a, 0.0);
      fuse(avg_map, single_cell(0, obs), FusionRule::MovingAverage);
      fuse(bayes_map, single_cell(0, obs), FusionRule::Bayesian);
    }
    if (argmax_region(avg_map.region(0)) != label_a) ++errors.moving_average;
    if (argmax_region(bayes_map.region(0)) != label_a) ++errors.bayesian;
  }
  return errors;
}

}  // namespace

TEST_CASE("registration at an aligned identity pose is a pure index shift") {
  const int side = 21, c = 3;
  const RegionGrid local = patterned_local(side, c);
  const RegionGrid global = RegionGrid::global(101, c, {0.0, 0.0});
  // agent centered on a global cell, heading such that ego rows follow
  // world rows (heading +y)
  const Pose pose{global.cell_center(40, 40).x, global.cell_center(40, 40).y,
                  kPi / 2.0};
  const RegisteredCells cells = register_local(local, pose, global);
  CHECK(cells.size() == side * side);
  CHECK(cells.dropped_out_of_bounds == 0);

  std::map<std::uint32_t, int> by_index;
  for (int k = 0; k < cells.size(); ++k) by_index[cells.indices[k]] = k;
  const int anchor = (side - 1) / 2;
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const auto it =
          by_index.find(static_cast<std::uint32_t>((40 + r) * 101 +
                                                   (40 + col - anchor)));
      REQUIRE(it != by_index.end());
      const int k = it->second;
      REQUIRE(cells.region[k * c + (r + col) % c] == 1.0f);
    }
  }
}

TEST_CASE("registration rotates the forward axis onto the world axes") {
  const int side = 15, c = 4;
  const RegionGrid local = patterned_local(side, c);
  const RegionGrid global = RegionGrid::global(101, c, {0.0, 0.0});
  const Vec2 center = global.cell_center(50, 50);

  // heading +x: ego rows advance along world columns
  const RegisteredCells east =
      register_local(local, {center.x, center.y, 0.0}, global);
  std::map<std::uint32_t, int> by_index;
  for (int k = 0; k < east.size(); ++k) by_index[east.indices[k]] = k;
  for (int r = 0; r < side; ++r) {
    const auto it = by_index.find(static_cast<std::uint32_t>(50 * 101 + 50 + r));
    REQUIRE(it != by_index.end());
    // ego column under the agent is the anchor column; pattern (r + anchor)
    REQUIRE(east.region[it->second * c + (r + (side - 1) / 2) % c] == 1.0f);
  }
}

TEST_CASE("registration matches a scalar transform oracle at random poses") {
  Rng rng(1971);
  const int side = 31, c = 3;
  const RegionGrid local = patterned_local(side, c);
  const RegionGrid global = RegionGrid::global(201, c, {0.0, 0.0});
  for (int trial = 0; trial < 5; ++trial) {
    const Pose pose{rng.uniform(3.0, 7.0), rng.uniform(3.0, 7.0),
                    rng.uniform(-kPi, kPi)};
    const RegisteredCells cells = register_local(local, pose, global);
    std::map<std::uint32_t, int> by_index;
    for (int k = 0; k < cells.size(); ++k) by_index[cells.indices[k]] = k;

    const double s = std::sin(pose.theta), co = std::cos(pose.theta);
    int spot_checked = 0;
    for (int row = 0; row < 201; ++row) {
      for (int col = 0; col < 201; ++col) {
        const double wx = (col + 0.5) * 0.05, wy = (row + 0.5) * 0.05;
        const double dx = wx - pose.x, dy = wy - pose.y;
        const double lx = dx * s - dy * co;
        const double ly = dx * co + dy * s;
        const int lc = static_cast<int>(std::lround(lx / 0.05)) + 15;
        const int lr = static_cast<int>(std::lround(ly / 0.05));
        const bool inside = lr >= 0 && lr < side && lc >= 0 && lc < side;
        const auto it = by_index.find(static_cast<std::uint32_t>(row * 201 + col));
        REQUIRE((it != by_index.end()) == inside);
        if (inside) {
          REQUIRE(cells.region[it->second * c + (lr + lc) % c] == 1.0f);
          ++spot_checked;
        }
      }
    }
    REQUIRE(spot_checked == cells.size());
  }
}

TEST_CASE("opposite headings paint disjoint half-planes") {
  const int side = 21, c = 2;
  RegionGrid local = patterned_local(side, c);
  // blank out the agent's own row, which both headings share
  for (int col = 0; col < side; ++col) {
    const int i = local.flat(0, col);
    local.explored(i) = 0.0f;
    local.obs_count(i) = 0;
    auto region = local.region(i);
    std::fill(region.begin(), region.end(), 0.0f);
  }
  const RegionGrid global = RegionGrid::global(101, c, {0.0, 0.0});
  const Vec2 center = global.cell_center(50, 50);
  const RegisteredCells up =
      register_local(local, {center.x, center.y, kPi / 2.0}, global);
  const RegisteredCells down =
      register_local(local, {center.x, center.y, -kPi / 2.0}, global);
  std::set<std::uint32_t> up_set(up.indices.begin(), up.indices.end());
  for (std::uint32_t i : down.indices) {
    REQUIRE(up_set.count(i) == 0);
  }
}

TEST_CASE("blank local cells are skipped") {
  const int side = 11, c = 2;
  RegionGrid local = RegionGrid::egocentric(side, c);
  const int only = local.flat(3, 5);
  local.explored(only) = 1.0f;
  local.obs_count(only) = 1;
  local.region(only)[1] = 1.0f;
  const RegionGrid global = RegionGrid::global(101, c, {0.0, 0.0});
  const Pose pose{2.5, 2.5, 0.7};
  CHECK(register_local(local, pose, global).size() == 1);
}

TEST_CASE("out-of-bounds cells are dropped and counted") {
  const int side = 21, c = 2;
  const RegionGrid local = patterned_local(side, c);
  const RegionGrid global = RegionGrid::global(40, c, {0.0, 0.0});
  // footprint pokes past the global map edge
  const RegisteredCells cells =
      register_local(local, {0.3, 0.3, -3.0 * kPi / 4.0}, global);
  CHECK(cells.dropped_out_of_bounds > 0);
  for (std::uint32_t i : cells.indices) CHECK(i < 40u * 40u);
}

TEST_CASE("first observation is copied verbatim under both rules") {
  for (const FusionRule rule :
       {FusionRule::MovingAverage, FusionRule::Bayesian}) {
    RegionGrid global = RegionGrid::global(4, 3, {0.0, 0.0});
    const auto cells = single_cell(5, {0.2, 0.5, 0.3}, 1.0f);
    fuse(global, cells, rule);
    CHECK(global.obs_count(5) == 1);
    CHECK(global.occupancy(5) == 1.0f);
    CHECK(global.explored(5) == 1.0f);
    CHECK(global.region(5)[0] == doctest::Approx(0.2));
    CHECK(global.region(5)[1] == doctest::Approx(0.5));
    CHECK(global.region(5)[2] == doctest::Approx(0.3));
  }
}

TEST_CASE("moving average of two one-hot observations is an even mix") {
  RegionGrid global = RegionGrid::global(2, 2, {0.0, 0.0});
  fuse(global, single_cell(0, {1.0, 0.0}), FusionRule::MovingAverage);
  fuse(global, single_cell(0, {0.0, 1.0}), FusionRule::MovingAverage);
  CHECK(global.region(0)[0] == doctest::Approx(0.5));
  CHECK(global.region(0)[1] == doctest::Approx(0.5));
  CHECK(global.obs_count(0) == 2);
}

TEST_CASE("bayesian update ignores a uniform likelihood") {
  RegionGrid global = RegionGrid::global(2, 2, {0.0, 0.0});
  fuse(global, single_cell(0, {0.8, 0.2}), FusionRule::Bayesian);
  fuse(global, single_cell(0, {0.5, 0.5}), FusionRule::Bayesian);
  CHECK(global.region(0)[0] == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(global.region(0)[1] == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("fusion sequences match the scalar mean and product oracles") {
  Rng rng(60);
  const int c = 5;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> seq;
    for (int t = 0; t < 5; ++t) {
      std::vector<double> v(c);
      double sum = 0.0;
      for (double& x : v) {
        x = rng.uniform(1e-3, 1.0);
        sum += x;
      }
      for (double& x : v) x /= sum;
      seq.push_back(std::move(v));
    }
    RegionGrid avg = RegionGrid::global(1, c, {0.0, 0.0});
    RegionGrid bayes = RegionGrid::global(1, c, {0.0, 0.0});
    for (const auto& v : seq) {
      fuse(avg, single_cell(0, v), FusionRule::MovingAverage);
      fuse(bayes, single_cell(0, v), FusionRule::Bayesian);
    }
    const auto mean = oracles::arithmetic_mean(seq);
    const auto product =
        oracles::normalized_product(seq, kBayesLikelihoodFloor);
    for (int k = 0; k < c; ++k) {
      REQUIRE(avg.region(0)[k] == doctest::Approx(mean[k]).epsilon(1e-6));
      REQUIRE(bayes.region(0)[k] ==
              doctest::Approx(product[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("fusion never un-explores a cell") {
  Rng rng(61);
  RegionGrid global = RegionGrid::global(1, 3, {0.0, 0.0});
  float explored = 0.0f;
  std::uint32_t count = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v{rng.uniform(), rng.uniform(), rng.uniform()};
    const double sum = v[0] + v[1] + v[2];
    for (double& x : v) x /= sum;
    const FusionRule rule = rng.uniform() < 0.5 ? FusionRule::MovingAverage
                                                : FusionRule::Bayesian;
    fuse(global, single_cell(0, v), rule);
    REQUIRE(global.explored(0) >= explored);
    REQUIRE(global.obs_count(0) > count);
    explored = global.explored(0);
    count = global.obs_count(0);
  }
}

TEST_CASE("per-cell fusion is permutation invariant under both rules") {
  Rng rng(62);
  const int c = 4;
  std::vector<std::vector<double>> seq;
  for (int t = 0; t < 8; ++t) {
    std::vector<double> v(c);
    double sum = 0.0;
    for (double& x : v) {
      x = rng.uniform(1e-4, 1.0);
      sum += x;
    }
    for (double& x : v) x /= sum;
    seq.push_back(std::move(v));
  }
  for (const FusionRule rule :
       {FusionRule::MovingAverage, FusionRule::Bayesian}) {
    RegionGrid forward = RegionGrid::global(1, c, {0.0, 0.0});
    for (const auto& v : seq) fuse(forward, single_cell(0, v), rule);
    auto shuffled = seq;
    rng.shuffle(shuffled);
    RegionGrid backward = RegionGrid::global(1, c, {0.0, 0.0});
    for (const auto& v : shuffled) fuse(backward, single_cell(0, v), rule);
    for (int k = 0; k < c; ++k) {
      REQUIRE(forward.region(0)[k] ==
              doctest::Approx(backward.region(0)[k]).epsilon(1e-5));
    }
  }
}

TEST_CASE("moving average shrugs off confident spurious observations") {
  // fully confident spurious observations: the first one to arrive pins the
  // bayesian prior's zeros, so its final argmax follows whichever label got
  // observed first, while the running mean follows the 90% majority
  const auto confident = stream_error_counts(0.0, 100, 50, 0.1, 14);
  CHECK(confident.moving_average == 0);
  CHECK(confident.bayesian > 0);
  CHECK(confident.moving_average < confident.bayesian);

  // softened spurious observations recover under both rules
  const auto softened = stream_error_counts(1e-3, 100, 50, 0.1, 14);
  CHECK(softened.moving_average == 0);
}

TEST_CASE("degenerate posterior falls back to the incoming distribution") {
  RegionGrid global = RegionGrid::global(1, 2, {0.0, 0.0});
  fuse(global, single_cell(0, {1.0, 0.0}), FusionRule::Bayesian);
  // a posterior can only collapse if the prior is zero wherever the floored
  // likelihood is not; the floor fills every zero, so this cannot trigger
  const FuseStats stats =
      fuse(global, single_cell(0, {0.0, 1.0}), FusionRule::Bayesian);
  CHECK(stats.degenerate_fallbacks == 0);
  CHECK(global.region(0)[0] == 1.0f);  // absorbed prior zero at label b
}

TEST_CASE("fuse rejects mismatched label counts") {
  RegionGrid global = RegionGrid::global(2, 3, {0.0, 0.0});
  CHECK_THROWS(fuse(global, single_cell(0, {1.0, 0.0}),
                    FusionRule::MovingAverage));
}
