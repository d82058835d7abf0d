#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace sftest;

TEST_CASE("kernel values") {
  const auto m = field_model(0.0, 2.5);
  CHECK(covariance(m, Location{1.0, 2.0}, Location{1.0, 2.0}) == 2.5);
  const double d = std::pow(4.0, 1.0 / 1.9);
  CHECK(covariance(m, Location{0.0, 0.0}, Location{d, 0.0}) == doctest::Approx(2.5 * std::exp(-1.0)).epsilon(1e-14));
  // scipy: exp(-(1.3/phi)^1.9) with phi^1.9 = 4
  CHECK(covariance(field_model(), Location{0.0}, Location{1.3}) == doctest::Approx(0.66261625295151).epsilon(1e-13));
  CHECK(covariance(bridge(), Location{0.5}, Location{0.5}) == 0.25);
  CHECK(covariance(bridge(), Location{0.2}, Location{0.7}) == doctest::Approx(0.06));
  CHECK_THROWS_AS(covariance(bridge(), Location{1.5}, Location{0.5}), PreconditionError);
  CHECK_THROWS_AS(covariance(bridge(), Location{0.5, 0.5}, Location{0.5, 0.5}), PreconditionError);
}

TEST_CASE("correlation is strictly decreasing") {
  const auto m = field_model();
  double prev = covariance(m, Location{0.0}, Location{0.0});
  for (double d = 0.05; d < 8.0; d += 0.05) {
    const double c = covariance(m, Location{0.0}, Location{d});
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("parameter validation") {
  CovarianceModel m = field_model();
  m.variance = 0.0;
  CHECK_THROWS_AS(m.validate(), PreconditionError);
  m = {0.0, 1.0, PoweredExponential{1.0, 2.5}};
  CHECK_THROWS_AS(m.validate(), PreconditionError);
  m = {0.0, 1.0, PoweredExponential{1.0, 2.0}};
  CHECK_NOTHROW(m.validate());
  CHECK(PoweredExponential::from_phi_pow_nu(4.0, 2.0).phi == doctest::Approx(2.0));
}

TEST_CASE("covariance matrices") {
  const auto m = field_model(0.0, 1.7);
  const LocationList one{{3.0, 3.0}};
  const Matrix c1 = cov_matrix(m, one);
  CHECK(c1.rows() == 1);
  CHECK(c1(0, 0) == 1.7);

  const auto pts = random_points(unit_square(), 5, 4);
  const Matrix c = cov_matrix(m, pts);
  CHECK(c == c.transpose());
  for (int i = 0; i < 5; ++i) CHECK(c(i, i) == 1.7);
  CHECK(Eigen::LLT<Matrix>(c).info() == Eigen::Success);

  const LocationList dup{{1.0, 1.0}, {2.0, 2.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(cov_matrix(m, dup), PreconditionError);
}

TEST_CASE("jitter policy") {
  Matrix near(2, 2);
  near << 1.0, 1.0, 1.0, 1.0;  // singular; one jitter makes it PD
  const Matrix l = cholesky_lower(near, 1.0, "test");
  CHECK(l(1, 1) > 0.0);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky_lower(bad, 1.0, "test"), SingularCovarianceError);
}

TEST_CASE("conditioning examples") {
  const auto m = field_model();
  const LocationList t{{1.0, 1.0}, {2.0, 5.0}};
  const auto prior = condition(m, t, {});
  CHECK(prior.offset[0] == 0.0);
  CHECK(max_abs_diff(prior.covariance, cov_matrix(m, t)) == 0.0);

  // rho(d) = 0.5 at distance d = phi * ln(2)^(1/nu)
  const double phi = std::get<PoweredExponential>(m.family).phi;
  const double d = phi * std::pow(std::log(2.0), 1.0 / 1.9);
  const LocationList target{{d, 0.0}};
  const LocationList cond{{0.0, 0.0}};
  const auto g = condition(m, target, cond);
  CHECK(g.coeffs(0, 0) * 2.0 + g.offset[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.covariance(0, 0) == doctest::Approx(0.75).epsilon(1e-12));

  const LocationList mid{{0.5}};
  const LocationList pair{{0.25}, {0.75}};
  const auto b = condition(bridge(), mid, pair);
  CHECK(b.coeffs(0, 0) == doctest::Approx(0.5));
  CHECK(b.coeffs(0, 1) == doctest::Approx(0.5));
  CHECK(b.covariance(0, 0) == doctest::Approx(0.125).epsilon(1e-12));

  CHECK_THROWS_AS(condition(m, cond, cond), PreconditionError);
}

TEST_CASE("conditioning consistency, total variance, scaling") {
  const auto m = rough_model(1.5);
  const auto targets = random_points(unit_square(), 12, 31);
  const auto cond = random_points(unit_square(), 9, 32);
  const auto g = condition(m, targets, cond);

  // subset of targets gives the matching sub-block
  const LocationList sub(targets.begin() + 3, targets.begin() + 8);
  const auto gs = condition(m, sub, cond);
  CHECK(max_abs_diff(gs.covariance, g.covariance.block(3, 3, 5, 5)) < 1e-10);
  CHECK(max_abs_diff(gs.coeffs, g.coeffs.middleRows(3, 5)) < 1e-10);

  const Matrix total = g.coeffs * cov_matrix(m, cond) * g.coeffs.transpose() + g.covariance;
  CHECK(max_abs_diff(total, cov_matrix(m, targets)) < 1e-8);

  CovarianceModel scaled = m;
  scaled.variance = 3.5;
  const auto g3 = condition(scaled, targets, cond);
  CHECK(max_abs_diff(cov_matrix(scaled, targets), 3.5 * cov_matrix(m, targets)) < 1e-10);
  CHECK(max_abs_diff(g3.coeffs, g.coeffs) < 1e-10);
  CHECK(max_abs_diff(g3.covariance, 3.5 * g.covariance) < 1e-10);

  // mean offset: mu (1 - A 1)
  CovarianceModel shifted = m;
  shifted.mean = 2.0;
  const auto gm = condition(shifted, targets, cond);
  for (Eigen::Index i = 0; i < gm.offset.size(); ++i) {
    CHECK(gm.offset[i] == doctest::Approx(2.0 * (1.0 - g.coeffs.row(i).sum())));
  }
}

TEST_CASE("mvn log-density") {
  const Matrix one = Matrix::Identity(1, 1);
  CHECK(mvn_logdensity(Vector::Zero(1), one, Vector::Zero(1)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(mvn_logdensity(Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2)) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));

  Matrix a(4, 4);
  a << 2.0, 0.3, 0.1, 0.0, 0.3, 1.5, 0.2, 0.1, 0.1, 0.2, 1.2, 0.4, 0.0, 0.1, 0.4, 1.0;
  Vector mean(4), x(4);
  mean << 0.1, -0.2, 0.3, 0.0;
  x << 0.5, 0.1, -0.4, 0.7;
  const Matrix l = cholesky_lower(a, 1.0, "test");
  const double v = mvn_logdensity(mean, l, x);
  CHECK(v == doctest::Approx(-5.018343696615507).epsilon(1e-12));  // scipy
  const Vector r = x - mean;
  const double direct = -2.0 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(a.determinant()) -
                        0.5 * r.dot(a.inverse() * r);
  CHECK(std::abs(v - direct) < 1e-10);
  Vector bad = x;
  bad[1] = NAN;
  CHECK_THROWS_AS(mvn_logdensity(mean, l, bad), PreconditionError);
}

TEST_CASE("mvn sampling") {
  Vector mean(2);
  mean << 1.0, -2.0;
  RandomStream s0(StreamKey(1));
  CHECK(mvn_sample(mean, Matrix::Zero(2, 2), s0) == mean);

  RandomStream a(StreamKey(2)), b(StreamKey(2));
  const Matrix l = cholesky_lower((Matrix(2, 2) << 1.0, 0.6, 0.6, 2.0).finished(), 1.0, "t");
  CHECK(mvn_sample(mean, l, a) == mvn_sample(mean, l, b));

  const int n = 100000;
  RandomStream s(StreamKey(3));
  double sxx = 0, syy = 0, sxy = 0, mx = 0, my = 0;
  std::vector<Vector> draws;
  for (int i = 0; i < n; ++i) {
    const Vector z = mvn_sample(Vector::Zero(2), l, s);
    sxx += z[0] * z[0];
    syy += z[1] * z[1];
    sxy += z[0] * z[1];
    mx += z[0];
    my += z[1];
  }
  // SE of a sample covariance entry: sqrt((s_ii s_jj + s_ij^2) / n)
  CHECK(std::abs(sxx / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(syy / n - 2.0) < 3.0 * std::sqrt(8.0 / n));
  CHECK(std::abs(sxy / n - 0.6) < 3.0 * std::sqrt((2.0 + 0.36) / n));
  CHECK(std::abs(mx / n) < 3.0 / std::sqrt(n));
  CHECK(std::abs(my / n) < 3.0 * std::sqrt(2.0 / n));
}
