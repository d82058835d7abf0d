#include <doctest.h>

#include <numbers>

#include "sparsefield/field_model.hpp"
#include "sparsefield/inference.hpp"
#include "support.hpp"

using namespace sftest;

namespace {

std::vector<double> as_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double dense_loglik(const Matrix& cov, std::span<const double> y, double mean) {
  const Matrix l = cholesky_lower(cov, 1.0, "oracle");
  const Eigen::Map<const Vector> x(y.data(), static_cast<Eigen::Index>(y.size()));
  return mvn_logdensity(Vector::Constant(x.size(), mean), l, x);
}

std::shared_ptr<const SparseFactor> factor_on(const CovarianceModel& m, const LocationList& pts,
                                              NeighborRule rule, std::shared_ptr<const ReferenceSet>* rs_out = nullptr) {
  auto rs = std::make_shared<const ReferenceSet>(make_reference_set(pts, OrderingRule::kSortedCoordinate, rule));
  if (rs_out) *rs_out = rs;
  return std::make_shared<const SparseFactor>(build_reference_factor(m, *rs));
}

}  // namespace

TEST_CASE("NNGP log-likelihood") {
  const auto unit = rough_model(2.0);
  const LocationList one{{2.0, 3.0}};
  const auto f1 = factor_on(unit, one, NearestM{3});
  const std::vector<double> y1{0.7};
  const double expect = -0.5 * std::log(2 * std::numbers::pi * 2.0) - 0.5 * (0.7 - 0.2) * (0.7 - 0.2) / 2.0;
  CHECK(nngp_loglik(*f1, y1, 0.2, 2.0) == doctest::Approx(expect).epsilon(1e-14));

  std::shared_ptr<const ReferenceSet> rs;
  const auto f = factor_on(unit, random_points(unit_square(), 60, 1), Full{}, &rs);
  const auto y = as_vec(simulate_reference(*f, StreamKey(2)));
  const Matrix c = cov_matrix(unit, rs->locations);
  for (double mu : {-0.3, 0.0, 0.8}) {
    for (double s2 : {0.5, 1.0, 2.2}) {
      CHECK(std::abs(nngp_loglik(*f, y, mu, s2) - dense_loglik(s2 * c, y, mu)) < 1e-8);
    }
  }

  // the NNGP structure agrees with the direct evaluation for sparse rules
  const auto fs = factor_on(unit, random_points(unit_square(), 150, 3), NearestM{5}, &rs);
  const auto ys = as_vec(simulate_reference(*fs, StreamKey(4)));
  const NngpStructure st(fs);
  CHECK(std::abs(st.log_likelihood(ys, 0.3, 1.4) - nngp_loglik(*fs, ys, 0.3, 1.4)) < 1e-9);
  const Matrix omega = reference_covariance(*fs);
  CHECK(std::abs(st.log_likelihood(ys, 0.3, 1.4) - dense_loglik(1.4 * omega, ys, 0.3)) < 1e-8);

  // GLS mean is stationary
  const auto mle = profile_mle(st, ys);
  const double h = 1e-5;
  const double d = (nngp_loglik(*fs, ys, mle.mean + h, mle.variance) - nngp_loglik(*fs, ys, mle.mean - h, mle.variance)) / (2 * h);
  CHECK(std::abs(d) < 1e-6);
}

TEST_CASE("PCGP marginal log-likelihood") {
  const auto unit = rough_model(3.0);
  std::shared_ptr<const ReferenceSet> rs;
  const auto pts = random_points(unit_square(), 40, 5);
  const auto f = factor_on(unit, pts, Full{}, &rs);
  const auto targets = random_points(unit_square(), 300, 6);

  // K = 1, all references, Full rule: the parent
  const auto pm = make_pcgp_model(unit, rs, f, make_partition(unit_square(), std::vector<int>{1, 1}), 40);
  const PcgpStructure st(pm, targets);
  const Matrix parent = cov_matrix(unit, targets);
  const Matrix lp = cholesky_lower(parent, 1.0, "t");
  RandomStream rng(StreamKey(7));
  const auto y = as_vec(mvn_sample(Vector::Zero(300), lp, rng));
  CHECK(std::abs(pcgp_marginal_loglik(st, y, 0.1, 1.3) - dense_loglik(1.3 * parent, y, 0.1)) < 1e-6);

  // general case against the dense implied covariance
  const auto fs = factor_on(unit, pts, NearestM{4}, &rs);
  const auto pm2 = make_pcgp_model(unit, rs, fs, make_partition(unit_square(), std::vector<int>{3, 3}), 6);
  const PcgpStructure st2(pm2, targets);
  const Matrix implied = implied_covariance_pcgp(pm2, targets);
  CHECK(std::abs(st2.log_det() - 2.0 * Matrix(cholesky_lower(implied, 1.0, "t")).diagonal().array().log().sum()) < 1e-6);
  for (double mu : {0.0, -0.4}) {
    for (double s2 : {0.7, 1.0}) {
      CHECK(std::abs(pcgp_marginal_loglik(st2, y, mu, s2) - dense_loglik(s2 * implied, y, mu)) < 1e-6);
    }
  }
  std::vector<double> shifted = y;
  for (auto& v : shifted) v += 10.0;
  CHECK(pcgp_marginal_loglik(st2, shifted, 0.0, 1.0) < pcgp_marginal_loglik(st2, y, 0.0, 1.0));

  CovarianceModel not_unit = unit;
  not_unit.variance = 2.0;
  const auto bad = make_pcgp_model(not_unit, rs, fs, make_partition(unit_square(), std::vector<int>{3, 3}), 6);
  CHECK_THROWS_AS(PcgpStructure(bad, targets), PreconditionError);
}

TEST_CASE("profile MLE") {
  const auto unit = rough_model(2.0);
  std::shared_ptr<const ReferenceSet> rs;
  const auto f = factor_on(unit, random_points(unit_square(), 200, 8), NearestM{8}, &rs);
  const NngpStructure st(f);

  const std::vector<double> c(200, 3.25);
  const auto flat = profile_mle(st, c);
  CHECK(flat.mean == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(flat.degenerate);
  CHECK(flat.variance == kVarianceFloor);

  const auto y = as_vec(simulate_reference(*f, StreamKey(9)));
  const auto base = profile_mle(st, y);
  CHECK_FALSE(base.degenerate);
  CHECK(base.model == "NNGP");
  CHECK(base.n == 200);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = -1.5 + 2.5 * y[i];
  const auto moved = profile_mle(st, t);
  CHECK(moved.mean == doctest::Approx(-1.5 + 2.5 * base.mean).epsilon(1e-12));
  CHECK(moved.variance == doctest::Approx(6.25 * base.variance).epsilon(1e-12));

  // the MLE beats the generating parameters
  CHECK(base.loglik >= st.log_likelihood(y, 0.0, 1.0));

  CHECK_THROWS_AS(profile_mle(st, std::vector<double>{1.0}), PreconditionError);
}

TEST_CASE("dense and NNGP structures agree") {
  const auto unit = rough_model(2.0);
  const auto f = factor_on(unit, random_points(unit_square(), 80, 10), NearestM{6});
  const auto y = as_vec(simulate_reference(*f, StreamKey(11)));
  const NngpStructure sparse(f);
  const DenseStructure dense(reference_covariance(*f));
  const std::vector<double> ones(80, 1.0);
  CHECK(sparse.bilinear(ones, y) == doctest::Approx(dense.bilinear(ones, y)).epsilon(1e-9));
  CHECK(sparse.log_det() == doctest::Approx(dense.log_det()).epsilon(1e-9));
  const auto a = profile_mle(sparse, y), b = profile_mle(dense, y);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-9));
  CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-9));
}

TEST_CASE("Nelder-Mead") {
  const auto quad = [](std::span<const double> p) {
    return 3.0 * (p[0] - 1.2) * (p[0] - 1.2) + (p[1] + 0.7) * (p[1] + 0.7) + 0.5 * (p[0] - 1.2) * (p[1] + 0.7);
  };
  const std::array<double, 2> start{0.0, 0.0}, steps{0.5, 0.5};
  const auto r = nelder_mead(quad, start, steps);
  CHECK(std::abs(r.argmin[0] - 1.2) < 1e-6);
  CHECK(std::abs(r.argmin[1] + 0.7) < 1e-6);
  SimplexOptions tight;
  tight.max_iterations = 5;
  CHECK_THROWS_AS(nelder_mead(quad, start, steps, tight), std::runtime_error);
}

TEST_CASE("optimizer cross-check against the closed form") {
  const auto unit = rough_model(2.0);
  std::shared_ptr<const ReferenceSet> rs;
  const auto f = factor_on(unit, random_points(unit_square(), 300, 12), NearestM{10}, &rs);
  std::vector<double> y = as_vec(simulate_reference(*f, StreamKey(13)));
  for (auto& v : y) v = 0.4 + 1.3 * v;
  const NngpStructure st(f);
  const auto mle = profile_mle(st, y);
  const auto ll = [&](double mu, double s2) { return nngp_loglik(*f, y, mu, s2); };
  const auto a = optimize_crosscheck(ll, 0.0, 1.0);
  CHECK(std::abs(a[0] - mle.mean) < 1e-4);
  CHECK(std::abs(a[1] - mle.variance) < 1e-4);
  const auto b = optimize_crosscheck(ll, mle.mean + 0.5, mle.variance * 2.0);
  CHECK(std::abs(b[0] - a[0]) < 1e-4);
  CHECK(std::abs(b[1] - a[1]) < 1e-4);

  // PCGP at separate targets
  const auto targets = random_points(unit_square(), 400, 14);
  const auto pm = make_pcgp_model(unit, rs, f, make_partition(unit_square(), std::vector<int>{4, 4}), 10);
  const PcgpStructure ps(pm, targets);
  const FieldSampler sampler(PcgpField{pm}, targets);
  std::vector<double> yt(targets.size());
  sampler.simulate(StreamKey(15), yt);
  const auto pmle = profile_mle(ps, yt);
  const auto c = optimize_crosscheck([&](double mu, double s2) { return ps.log_likelihood(yt, mu, s2); }, 0.0, 1.0);
  CHECK(std::abs(c[0] - pmle.mean) < 1e-4);
  CHECK(std::abs(c[1] - pmle.variance) < 1e-4);
  CHECK_THROWS_AS(optimize_crosscheck(ll, 0.0, -1.0), PreconditionError);
}
