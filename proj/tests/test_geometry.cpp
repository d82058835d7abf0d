#include <doctest.h>

#include <numeric>
#include <set>

#include "support.hpp"

using namespace sftest;

TEST_CASE("volume") {
  CHECK(volume(unit_square()) == 100.0);
  CHECK(volume(unit_interval()) == 1.0);
  CHECK(volume(Domain({0.0, 0.0}, {10.0, 5.0})) == 50.0);
  CHECK_THROWS_AS(Domain({1.0}, {1.0}), PreconditionError);
}

TEST_CASE("regular grids") {
  const std::vector<int> c25{25, 25};
  const auto g = regular_grid(unit_square(), c25, GridStyle::kCellCentered);
  CHECK(g.size() == 625);
  CHECK(g[0][0] == doctest::Approx(0.2));
  CHECK(g[0][1] == doctest::Approx(0.2));
  // axis 0 varies fastest
  CHECK(g[1][0] == doctest::Approx(0.6));
  CHECK(g[1][1] == doctest::Approx(0.2));

  const std::vector<int> c2{2};
  const auto e = regular_grid(unit_interval(), c2, GridStyle::kEndpointInclusive);
  REQUIRE(e.size() == 2);
  CHECK(e[0][0] == 0.0);
  CHECK(e[1][0] == 1.0);

  const std::vector<int> c400{400, 400};
  CHECK(regular_grid(unit_square(), c400, GridStyle::kCellCentered).size() == 160000);

  const std::vector<int> huge{100000, 100000};
  CHECK_THROWS_AS(regular_grid(unit_square(), huge, GridStyle::kCellCentered), PreconditionError);
  const std::vector<int> zero{0, 3};
  CHECK_THROWS_AS(regular_grid(unit_square(), zero, GridStyle::kCellCentered), PreconditionError);
}

TEST_CASE("grid schedules nest exactly") {
  GridSchedule d0{unit_interval(), {1}, 0};
  auto l0 = d0.locations();
  REQUIRE(l0.size() == 2);
  CHECK(l0[0][0] == 0.0);
  CHECK(l0[1][0] == 1.0);
  const auto d1 = refine(d0);
  const auto l1 = d1.locations();
  REQUIRE(l1.size() == 3);
  CHECK(l1[1][0] == 0.5);
  const auto l2 = refine(d1).locations();
  REQUIRE(l2.size() == 5);
  CHECK(l2[1][0] == 0.25);
  CHECK(l2[3][0] == 0.75);

  // (2^n k0 + 1)^d points and exact set inclusion on coordinates
  GridSchedule s{Domain({0.0, 0.0}, {10.0, 10.0}), {3, 3}, 0};
  for (int n = 0; n < 5; ++n) {
    const auto next = refine(s);
    const std::size_t side = (static_cast<std::size_t>(3) << n) + 1;
    CHECK(s.size() == side * side);
    const auto coarse = s.locations();
    const auto fine = next.locations();
    const auto up = s.indices_in_refined();
    for (std::size_t i = 0; i < coarse.size(); ++i) CHECK_EQ(coarse[i], fine[up[i]]);
    s = next;
  }
}

TEST_CASE("uniform locations") {
  CHECK_THROWS_AS(uniform_locations(unit_square(), 0, StreamKey(1)), PreconditionError);
  const auto a = uniform_locations(unit_square(), 100, StreamKey(7));
  const auto b = uniform_locations(unit_square(), 100, StreamKey(7));
  CHECK(a == b);
  const auto big = uniform_locations(Domain({0.0}, {10.0}), 100000, StreamKey(3));
  double s = 0.0;
  for (const auto& u : big) s += u[0];
  CHECK(std::abs(s / 100000.0 - 5.0) < 0.05);
}

TEST_CASE("nearest neighbors") {
  const LocationList c{{1.0}, {2.0}, {3.0}};
  CHECK(nearest_neighbors(Location{0.0}, c, 5) == std::vector<int>{0, 1, 2});
  CHECK(nearest_neighbors(Location{0.0}, c, 2) == std::vector<int>{0, 1});
  const LocationList tie{{-1.0}, {1.0}};
  CHECK(nearest_neighbors(Location{0.0}, tie, 1) == std::vector<int>{0});
  CHECK(nearest_neighbors(Location{2.9}, c, 3, 2) == std::vector<int>{1, 0});
}

TEST_CASE("radius neighbors") {
  const LocationList c{{1.0}, {2.0}, {3.0}};
  CHECK(radius_neighbors(Location{0.0}, c, 100.0) == std::vector<int>{0, 1, 2});
  CHECK(radius_neighbors(Location{0.0}, c, 0.5).empty());
  CHECK(radius_neighbors(Location{0.0}, c, 2.5) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(radius_neighbors(Location{0.0}, c, 0.0), PreconditionError);
}

TEST_CASE("indexed search agrees with brute force") {
  const auto pts = random_points(unit_square(), 3000, 11);
  const NeighborIndex index(pts);
  const auto queries = random_points(Domain({-1.0, -1.0}, {11.0, 11.0}), 300, 12);
  for (const auto& q : queries) {
    CHECK(index.nearest(q, 15) == nearest_neighbors(q, pts, 15));
    CHECK(index.nearest(q, 7, 1500) == nearest_neighbors(q, pts, 7, 1500));
    CHECK(index.within(q, 0.7) == radius_neighbors(q, pts, 0.7));
    CHECK(index.within(q, 0.9, 2000) == radius_neighbors(q, pts, 0.9, 2000));
  }
  // Lattice points produce many exact distance ties.
  const std::vector<int> c40{40, 40};
  const auto lattice = regular_grid(unit_square(), c40, GridStyle::kEndpointInclusive);
  const NeighborIndex li(lattice);
  for (const auto& q : random_points(unit_square(), 100, 13)) {
    CHECK(li.nearest(q, 12) == nearest_neighbors(q, lattice, 12));
  }
  for (std::size_t i = 0; i < lattice.size(); i += 37) {
    CHECK(li.nearest(lattice[i], 9) == nearest_neighbors(lattice[i], lattice, 9));
  }
}

TEST_CASE("neighbor selection does not depend on candidate storage order") {
  // Permute storage but keep stable ids: the selected id set is unchanged.
  const auto pts = random_points(unit_square(), 800, 21);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  LocationList shuffled(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) shuffled[i] = pts[perm[i]];
  const Location q{4.2, 6.1};
  std::set<std::size_t> a, b;
  for (int j : nearest_neighbors(q, pts, 20)) a.insert(static_cast<std::size_t>(j));
  for (int j : nearest_neighbors(q, shuffled, 20)) b.insert(perm[static_cast<std::size_t>(j)]);
  CHECK(a == b);
}

TEST_CASE("partitions") {
  const std::vector<int> c16{16, 16};
  const auto p = make_partition(unit_square(), c16);
  CHECK(p.cell_count == 256);
  CHECK(p.side[0] == 0.625);
  CHECK(p.centroids[0][0] == doctest::Approx(0.3125));
  CHECK(p.centroids[0][1] == doctest::Approx(0.3125));
  for (std::size_t k = 0; k < p.cell_count; ++k) CHECK(locate_cell(p, p.centroids[k]) == k);

  // interior boundary goes to the upper cell, the upper corner to the last cell
  CHECK(locate_cell(p, Location{0.625, 0.1}) == 1);
  CHECK(locate_cell(p, Location{10.0, 10.0}) == p.cell_count - 1);
  CHECK_THROWS_AS(locate_cell(p, Location{10.5, 1.0}), PreconditionError);

  const std::vector<double> off{0.3125, 0.3125};
  const auto s = make_partition(unit_square(), c16, off);
  CHECK(s.cells_along(0) == 17);
  CHECK(s.edges[0][1] == doctest::Approx(0.3125));
  for (int k = 1; k + 1 < s.cells_along(0); ++k) {
    CHECK(s.edges[0][k + 1] - s.edges[0][k] == doctest::Approx(0.625));
  }
  CHECK(s.edges[0][1] - s.edges[0][0] == doctest::Approx(0.3125));
  for (std::size_t k = 0; k < s.cell_count; ++k) CHECK(locate_cell(s, s.centroids[k]) == k);

  const std::vector<double> bad{0.7, 0.0};
  CHECK_THROWS_AS(make_partition(unit_square(), c16, bad), PreconditionError);
}

TEST_CASE("partition membership is a set partition of a fine grid") {
  const std::vector<int> c100{100, 100};
  const auto grid = regular_grid(unit_square(), c100, GridStyle::kEndpointInclusive);
  const std::vector<int> c7{7, 5};
  for (const auto& off : {std::vector<double>{}, std::vector<double>{0.5, 1.0}}) {
    const auto p = make_partition(unit_square(), c7, off);
    std::vector<std::size_t> count(p.cell_count, 0);
    for (const auto& u : grid) {
      const auto k = locate_cell(p, u);
      REQUIRE(k < p.cell_count);
      const auto idx = p.unflatten(k);
      for (int a = 0; a < 2; ++a) {
        CHECK(u[a] >= p.edges[a][idx[a]]);
        const bool last = idx[a] + 1 == p.cells_along(a);
        if (last) {
          CHECK(u[a] <= p.edges[a][idx[a] + 1]);
        } else {
          CHECK(u[a] < p.edges[a][idx[a] + 1]);
        }
      }
      ++count[k];
    }
    CHECK(std::accumulate(count.begin(), count.end(), std::size_t{0}) == grid.size());
  }
}
