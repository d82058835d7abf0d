#include <doctest.h>

#include <numeric>
#include <set>

#include "sparsefield/functionals.hpp"
#include "sparsefield/pcgp.hpp"
#include "support.hpp"

using namespace sftest;

namespace {

std::vector<double> as_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct Setup {
  CovarianceModel model;
  std::shared_ptr<const ReferenceSet> refset;
  std::shared_ptr<const SparseFactor> factor;
};

Setup make_setup(const CovarianceModel& m, LocationList pts, NeighborRule rule) {
  auto rs = std::make_shared<const ReferenceSet>(make_reference_set(std::move(pts), OrderingRule::kSortedCoordinate, rule));
  auto f = std::make_shared<const SparseFactor>(build_reference_factor(m, *rs));
  return {m, rs, f};
}

PcgpModel pcgp_on(const Setup& s, const Domain& d, std::vector<int> counts, int mdd) {
  return make_pcgp_model(s.model, s.refset, s.factor, make_partition(d, counts), mdd);
}

LocationList bridge_refs() {
  LocationList s;
  for (int j = 1; j <= 5; ++j) s.push_back(Location{j / 6.0});
  return s;
}

}  // namespace

TEST_CASE("region neighbor sets") {
  const auto s = make_setup(field_model(), random_points(unit_square(), 40, 1), NearestM{5});
  const auto p = make_partition(unit_square(), std::vector<int>{4, 4});
  const auto all = region_neighbor_sets(p, *s.refset, 100);
  for (const auto& set : all) CHECK(set.size() == 40);
  const auto sets = region_neighbor_sets(p, *s.refset, 7);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    CHECK(sets[k] == nearest_neighbors(p.centroids[k], s.refset->locations, 7));
    std::set<int> uniq(sets[k].begin(), sets[k].end());
    CHECK(uniq.size() == 7);
  }
  const auto one = make_partition(unit_square(), std::vector<int>{1, 1});
  CHECK(region_neighbor_sets(one, *s.refset, 3)[0] ==
        nearest_neighbors(Location{5.0, 5.0}, s.refset->locations, 3));
}

TEST_CASE("block conditionals") {
  const auto s = make_setup(rough_model(2.0), random_points(unit_square(), 50, 2), NearestM{6});
  const auto pm = pcgp_on(s, unit_square(), {2, 2}, 8);
  const LocationList same{{1.0, 1.0}, {2.0, 1.5}, {3.0, 4.0}};
  const auto blocks = build_block_conditionals(pm, same);
  REQUIRE(blocks.size() == 1);
  LocationList cond;
  for (int j : pm.region_sets[blocks[0].cell]) cond.push_back(s.refset->locations[j]);
  const auto g = condition(pm.model, same, cond);
  CHECK(max_abs_diff(blocks[0].covariance, g.covariance) == 0.0);
  CHECK(std::abs(blocks[0].covariance(0, 1)) > 1e-3);  // full, not diagonal

  const LocationList apart{{1.0, 1.0}, {9.0, 9.0}};
  CHECK(build_block_conditionals(pm, apart).size() == 2);

  const LocationList clash{s.refset->locations[4]};
  CHECK_THROWS_AS(build_block_conditionals(pm, clash), PreconditionError);

  auto capped = pm;
  capped.block_cap = 2;
  CHECK_THROWS_AS(build_block_conditionals(capped, same), PreconditionError);

  const auto serial_blocks = serial::build_block_conditionals(pm, same);
  CHECK(serial_blocks[0].factor == blocks[0].factor);
}

TEST_CASE("bridge blocks reproduce the analytic bridge") {
  const auto s = make_setup(bridge(), bridge_refs(), NearestM{2});
  const auto pm = pcgp_on(s, unit_interval(), {6}, 2);
  const LocationList t{{0.2}, {0.25}, {0.3}};  // inside (1/6, 2/6)
  const auto blocks = build_block_conditionals(pm, t);
  REQUIRE(blocks.size() == 1);
  const double a = 1.0 / 6.0, b = 2.0 / 6.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double u = std::min(t[i][0], t[j][0]), v = std::max(t[i][0], t[j][0]);
      CHECK(std::abs(blocks[0].covariance(i, j) - (u - a) * (b - v) / (b - a)) < 1e-10);
    }
  }
}

TEST_CASE("exactness degeneration and Markov exactness") {
  const auto m = rough_model(3.0);
  const auto pts = random_points(unit_square(), 30, 3);
  const auto s = make_setup(m, pts, Full{});
  const auto pm = pcgp_on(s, unit_square(), {1, 1}, 30);
  const auto targets = random_points(unit_square(), 20, 4);
  CHECK(max_abs_diff(implied_covariance_pcgp(pm, targets), cov_matrix(m, targets)) < 1e-8);

  const auto bs = make_setup(bridge(), bridge_refs(), NearestM{2});
  for (int mdd : {2, 3, 5}) {
    const auto bp = pcgp_on(bs, unit_interval(), {6}, mdd);
    LocationList bt;
    for (int i = 0; i < 24; ++i) bt.push_back(Location{(i + 0.5) / 24.0});
    CHECK(max_abs_diff(implied_covariance_pcgp(bp, bt), cov_matrix(bridge(), bt)) < 1e-10);
  }
}

TEST_CASE("PCGP finite-dimensional consistency") {
  const auto s = make_setup(field_model(), random_points(unit_square(), 100, 5), NearestM{8});
  const auto pm = pcgp_on(s, unit_square(), {3, 3}, 8);
  const auto d2 = random_points(unit_square(), 50, 6);
  const LocationList d1(d2.begin() + 5, d2.begin() + 25);
  const Matrix c2 = implied_covariance_pcgp(pm, d2);
  const Matrix c1 = implied_covariance_pcgp(pm, d1);
  CHECK(max_abs_diff(c2.block(5, 5, 20, 20), c1) < 1e-12);
}

TEST_CASE("piecewise continuity") {
  const auto s = make_setup(field_model(), random_points(unit_square(), 80, 7), NearestM{8});
  const auto pm = pcgp_on(s, unit_square(), {2, 2}, 8);
  // moving a target slightly inside one cell changes its covariances slightly
  const LocationList a{{1.0, 1.0}, {3.0, 2.0}};
  const LocationList b{{1.0 + 1e-6, 1.0}, {3.0, 2.0}};
  const Matrix ca = implied_covariance_pcgp(pm, a);
  const Matrix cb = implied_covariance_pcgp(pm, b);
  CHECK(max_abs_diff(ca, cb) < 1e-4);
  // across cells the conditional covariance is exactly zero
  const LocationList across{{4.99, 1.0}, {5.01, 1.0}};
  const auto blocks = build_block_conditionals(pm, across);
  CHECK(blocks.size() == 2);
  const Matrix cond = implied_covariance_pcgp(blocks, 2, Matrix::Zero(80, 80));
  CHECK(cond(0, 1) == 0.0);
}

TEST_CASE("simulation: determinism and Monte Carlo laws") {
  const auto m = rough_model(2.0);
  const auto s = make_setup(m, random_points(unit_square(), 40, 8), NearestM{6});
  const auto pm = pcgp_on(s, unit_square(), {2, 2}, 6);
  const LocationList t{{1.0, 1.0}, {1.5, 2.0}, {2.0, 1.0}, {8.0, 8.0}};
  const auto blocks = build_block_conditionals(pm, t);
  REQUIRE(blocks.size() == 2);
  const auto z = as_vec(simulate_reference(*s.factor, StreamKey(1)));
  CHECK(simulate_pcgp(pm, t, z, StreamKey(2)) == simulate_pcgp(pm, t, z, StreamKey(2)));

  std::vector<double> par(t.size()), ser(t.size());
  simulate_blocks_into(blocks, z, StreamKey(2), par);
  serial::simulate_blocks_into(blocks, z, StreamKey(2), ser);
  CHECK(par == ser);

  // given z: within-block covariance and zero cross-block covariance
  const int reps = 20000;
  Matrix sum = Matrix::Zero(4, 4);
  Vector mean = Vector::Zero(4);
  std::vector<double> out(4);
  for (int k = 0; k < reps; ++k) {
    simulate_blocks_into(blocks, z, StreamKey(3).child(k), out);
    const Eigen::Map<const Vector> v(out.data(), 4);
    mean += v;
    sum += v * v.transpose();
  }
  mean /= reps;
  const Matrix cov = sum / reps - mean * mean.transpose();
  Matrix expect = Matrix::Zero(4, 4);
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.members.size(); ++i) {
      for (std::size_t j = 0; j < b.members.size(); ++j) expect(b.members[i], b.members[j]) = b.covariance(i, j);
    }
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((expect(i, i) * expect(j, j) + expect(i, j) * expect(i, j)) / reps);
      CHECK(std::abs(cov(i, j) - expect(i, j)) < 3.0 * se);
    }
  }

  // marginal law integrating over Z_S
  const Matrix implied = implied_covariance_pcgp(pm, t);
  Matrix s2 = Matrix::Zero(4, 4);
  for (int k = 0; k < reps; ++k) {
    const auto zk = as_vec(simulate_reference(*s.factor, StreamKey(4).child(k).child(0)));
    simulate_blocks_into(blocks, zk, StreamKey(4).child(k).child(1), out);
    const Eigen::Map<const Vector> v(out.data(), 4);
    s2 += v * v.transpose();
  }
  s2 /= reps;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((implied(i, i) * implied(j, j) + implied(i, j) * implied(i, j)) / reps);
      CHECK(std::abs(s2(i, j) - implied(i, j)) < 3.0 * se);
    }
  }
}

TEST_CASE("shifted partitions") {
  const std::vector<int> c16{16, 16};
  const auto g1 = make_shifted_partitions(unit_square(), c16, 1);
  REQUIRE(g1.size() == 1);
  CHECK(g1[0].edges == make_partition(unit_square(), c16).edges);
  const auto g2 = make_shifted_partitions(unit_square(), c16, 2);
  REQUIRE(g2.size() == 2);
  CHECK(g2[1].offset == std::vector<double>{0.3125, 0.3125});
  const auto g4 = make_shifted_partitions(unit_square(), c16, 4);
  REQUIRE(g4.size() == 4);
  std::set<std::vector<double>> offsets;
  for (const auto& p : g4) offsets.insert(p.offset);
  CHECK(offsets == std::set<std::vector<double>>{{0, 0}, {0.3125, 0}, {0, 0.3125}, {0.3125, 0.3125}});
  CHECK_THROWS_AS(make_shifted_partitions(unit_square(), c16, 3), PreconditionError);
  CHECK_THROWS_AS(make_shifted_partitions(unit_interval(), std::vector<int>{4}, 4), PreconditionError);

  const std::vector<int> c100{100, 100};
  const auto grid = regular_grid(unit_square(), c100, GridStyle::kEndpointInclusive);
  for (const auto& p : g4) {
    std::vector<int> hits(p.cell_count, 0);
    for (const auto& u : grid) ++hits[locate_cell(p, u)];
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) == static_cast<int>(grid.size()));
  }
}

TEST_CASE("mPCGP") {
  const auto m = rough_model(2.0);
  const auto s = make_setup(m, random_points(unit_square(), 60, 9), NearestM{6});
  const auto base = pcgp_on(s, unit_square(), {4, 4}, 6);
  const std::vector<int> c4{4, 4};
  const auto targets = random_points(unit_square(), 30, 10);
  const auto z = as_vec(simulate_reference(*s.factor, StreamKey(5)));

  const auto g1 = make_mpcgp_model(base, c4, 1);
  CHECK(simulate_mpcgp(g1, targets, z, StreamKey(6)) == simulate_pcgp(base, targets, z, StreamKey(6)));

  // component conditional means ignore the scale; covariances scale linearly
  const auto g4 = make_mpcgp_model(base, c4, 4);
  for (const auto& comp : g4.components) {
    CovarianceModel scaled = comp.model;
    scaled.variance *= 4.0;
    auto sc = comp;
    sc.model = scaled;
    const auto b1 = build_block_conditionals(comp, targets);
    const auto b4 = build_block_conditionals(sc, targets);
    for (std::size_t k = 0; k < b1.size(); ++k) {
      CHECK(max_abs_diff(b1[k].coeffs, b4[k].coeffs) < 1e-10);
      CHECK(max_abs_diff(4.0 * b1[k].covariance, b4[k].covariance) < 1e-10);
    }
  }

  // K = 1 in every component: the averaged conditional variance is the PCGP's
  const auto one = make_pcgp_model(m, s.refset, s.factor, make_partition(unit_square(), std::vector<int>{1, 1}), 6);
  MpcgpModel same{{one, one, one, one}};
  const auto blocks = build_mpcgp_blocks(same, targets);
  const Matrix ref_zero = Matrix::Zero(60, 60);
  const Matrix pc = implied_covariance_pcgp(blocks[0], targets.size(), ref_zero);
  Matrix avg = Matrix::Zero(30, 30);
  for (const auto& b : blocks) avg += 4.0 * implied_covariance_pcgp(b, targets.size(), ref_zero) / 16.0;
  CHECK(max_abs_diff(avg, pc) < 1e-12);
  CHECK(max_abs_diff(implied_covariance_mpcgp(same, targets), implied_covariance_pcgp(one, targets)) < 1e-10);

  // empirical check of the averaged draw given z
  const int reps = 20000;
  std::vector<double> out(targets.size());
  double s1 = 0.0, s2 = 0.0;
  const double mean0 = blocks[0][0].conditional_mean(z)[0];
  const auto idx0 = blocks[0][0].members[0];
  for (int k = 0; k < reps; ++k) {
    simulate_mpcgp_into(blocks, z, StreamKey(7).child(k), out);
    s1 += out[idx0] - mean0;
    s2 += (out[idx0] - mean0) * (out[idx0] - mean0);
  }
  const double v = s2 / reps - (s1 / reps) * (s1 / reps);
  const double expect = blocks[0][0].covariance(0, 0);
  CHECK(std::abs(v - expect) < 3.0 * expect * std::sqrt(2.0 / reps));
}

TEST_CASE("mPCGP smooths partition edges") {
  const auto m = field_model();
  const auto s = make_setup(m, random_points(unit_square(), 200, 11), NearestM{10});
  const std::vector<int> c4{4, 4};
  const auto base = make_pcgp_model(m, s.refset, s.factor, make_partition(unit_square(), c4), 10);
  const auto mix = make_mpcgp_model(base, c4, 4);
  const std::vector<int> g40{40, 40};
  const auto grid = regular_grid(unit_square(), g40, GridStyle::kCellCentered);
  const auto pb = build_block_conditionals(base, grid);
  const auto mb = build_mpcgp_blocks(mix, grid);
  const auto z = as_vec(simulate_reference(*s.factor, StreamKey(12)));
  double jp = 0.0, jm = 0.0;
  std::vector<double> out(grid.size());
  for (int k = 0; k < 100; ++k) {
    simulate_blocks_into(pb, z, StreamKey(13).child(k), out);
    jp += grid_edge_jump(grid, g40, out, base.partition, true);
    simulate_mpcgp_into(mb, z, StreamKey(14).child(k), out);
    jm += grid_edge_jump(grid, g40, out, base.partition, true);
  }
  CHECK(jm < jp);
}
