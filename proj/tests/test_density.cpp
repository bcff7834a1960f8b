#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "rtbm/density.hpp"
#include "rtbm/error.hpp"
#include "rtbm/oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace rtbm;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Normal(mean, cov) log density through an explicit inverse and LU determinant.
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd dev = x - mean;
  const Eigen::MatrixXd precision = cov.inverse();
  return -0.5 * x.size() * kLog2Pi - 0.5 * std::log(cov.fullPivLu().determinant()) - 0.5 * dev.dot(precision * dev);
}

RtbmParams gaussian_model(const Eigen::MatrixXd& t, const Eigen::VectorXd& bv, int nh = 2) {
  RtbmParams p;
  p.t = t;
  p.bv = bv;
  p.q = 3.0 * Eigen::MatrixXd::Identity(nh, nh);
  p.w = Eigen::MatrixXd::Zero(t.rows(), nh);
  p.bh = Eigen::VectorXd::LinSpaced(nh, -1.0, 2.5);
  return p;
}

// Unnormalized log density written out term by term with the exhaustive theta.
double log_pdf_by_reference(const RtbmParams& p, const Eigen::VectorXd& v, int radius) {
  const Eigen::MatrixXd t_inv = p.t.inverse();
  const Eigen::VectorXd shifted = v + t_inv * p.bv;
  return 0.5 * std::log(p.t.determinant()) - 0.5 * p.nv() * kLog2Pi - 0.5 * shifted.dot(p.t * shifted) +
         log_theta_reference(p.bh + p.w.transpose() * v, p.q, p.lattice, radius) -
         log_theta_reference(p.bh - p.w.transpose() * t_inv * p.bv, p.q - p.w.transpose() * t_inv * p.w,
                             p.lattice, radius);
}

}  // namespace

TEST_CASE("standard Gaussian reduction at the origin") {
  const RtbmParams p = gaussian_model(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  CHECK(log_pdf(p, Eigen::VectorXd::Zero(2)) == doctest::Approx(-kLog2Pi).epsilon(1e-15));
  CHECK(log_pdf(p, Eigen::VectorXd::Zero(2)) == doctest::Approx(-1.837877).epsilon(1e-6));
}

TEST_CASE("W = 0 gives the multivariate normal density") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int nv = 1 + trial % 3;
    const Eigen::MatrixXd t = fixtures::random_pd(rng, nv, 0.3, 5.0);
    Eigen::VectorXd bv(nv);
    for (int i = 0; i < nv; ++i) bv(i) = normal(rng);
    RtbmParams p = gaussian_model(t, bv, 1 + trial % 2);
    if (trial % 4 == 1) p.lattice = Lattice::NonNeg;
    const Density density(p);
    const Eigen::MatrixXd cov = t.inverse();
    const Eigen::VectorXd mean = -cov * bv;
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd v(nv);
      for (int k = 0; k < nv; ++k) v(k) = 3.0 * normal(rng);
      CHECK(std::abs(density.log_pdf(v) - mvn_logpdf(v, mean, cov)) <= 1e-12);
    }
  }
}

TEST_CASE("fitted Student-t model agrees with the exhaustive-theta formula") {
  const RtbmParams p = fixtures::student_fit();
  const Density density(p);
  for (const Eigen::Vector2d v : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-2.0, 1.5), Eigen::Vector2d(4.0, -7.0)}) {
    CHECK(std::abs(density.log_pdf(v) - log_pdf_by_reference(p, v, 10)) <= 1e-10);
  }
}

TEST_CASE("fitted Student-t model integrates to one") {
  const GridAxis axis{-30.0, 30.0, 301};
  const std::vector<GridAxis> grid{axis, axis};
  const Density density(fixtures::student_fit());
  const double log_mass = trapezoid_log_integral([&](const Eigen::VectorXd& v) { return density.log_pdf(v); }, grid);
  CHECK(std::abs(std::exp(log_mass) - 1.0) <= 1e-4);
}

TEST_CASE("3D example: slices integrate to the marginal") {
  const RtbmParams p = fixtures::example_3d();
  const Density density(p);
  for (double d : {-0.4, -0.6, -0.8}) {
    const std::vector<GridAxis> grid{{-8.0, 8.0, 321}, {-8.0, 8.0, 321}};
    const double log_slice = trapezoid_log_integral(
        [&](const Eigen::VectorXd& y) {
          const double lp = density.log_pdf(Eigen::Vector3d(y(0), y(1), d));
          CHECK(std::exp(lp) >= 0.0);
          return lp;
        },
        grid);
    const double log_m = log_marginal(p, 2, Eigen::VectorXd::Constant(1, d));
    CHECK(std::abs(std::exp(log_slice - log_m) - 1.0) <= 1e-4);
  }
}

TEST_CASE("marginal of a Gaussian model is the Gaussian marginal") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int nv = 2 + trial % 3;
    const Eigen::MatrixXd t = fixtures::random_pd(rng, nv, 0.3, 5.0);
    Eigen::VectorXd bv(nv);
    for (int i = 0; i < nv; ++i) bv(i) = normal(rng);
    const RtbmParams p = gaussian_model(t, bv);
    const Eigen::MatrixXd cov = t.inverse();
    const Eigen::VectorXd mean = -cov * bv;
    for (int m = 1; m < nv; ++m) {
      const int n = nv - m;
      Eigen::VectorXd d(n);
      for (int k = 0; k < n; ++k) d(k) = 2.0 * normal(rng);
      const double expected = mvn_logpdf(d, mean.tail(n), cov.bottomRightCorner(n, n));
      CHECK(std::abs(log_marginal(p, m, d) - expected) <= 1e-12);
    }
  }
}

TEST_CASE("marginal of the fitted model matches fine quadrature") {
  const RtbmParams p = fixtures::student_fit();
  const std::vector<GridAxis> grid{{-30.0, 30.0, 20001}};
  for (double d : {-2.0, 0.0}) {
    const Eigen::VectorXd dv = Eigen::VectorXd::Constant(1, d);
    const double closed = log_marginal(p, 1, dv);
    const double quad = quadrature_marginal(p, 1, dv, grid);
    CHECK(std::abs(std::expm1(closed - quad)) <= 1e-8);
  }
}

TEST_CASE("marginal of the 3D example matches 2D quadrature") {
  const RtbmParams p = fixtures::example_3d();
  const std::vector<GridAxis> grid{{-8.0, 8.0, 1601}, {-8.0, 8.0, 1601}};
  const Eigen::VectorXd d = Eigen::VectorXd::Constant(1, -0.4);
  CHECK(std::abs(std::expm1(log_marginal(p, 2, d) - quadrature_marginal(p, 2, d, grid))) <= 1e-6);
}

TEST_CASE("marginal domain errors") {
  const RtbmParams p = fixtures::example_3d();
  CHECK_THROWS_AS(log_marginal(p, 3, Eigen::VectorXd(0)), std::invalid_argument);
  CHECK_THROWS_AS(log_marginal(p, 0, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(log_marginal(p, 1, Eigen::VectorXd::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(log_marginal(fixtures::example_2d_printed(), 1, Eigen::VectorXd::Zero(1)), ModelError);
}

TEST_CASE("decoupled blocks give a child independent of d") {
  RtbmParams p = fixtures::example_3d();
  p.t(2, 0) = p.t(0, 2) = 0.0;
  p.t(2, 1) = p.t(1, 2) = 0.0;
  p.w(2, 0) = 0.0;
  const RtbmParams a = condition(p, 2, Eigen::VectorXd::Constant(1, -3.0));
  const RtbmParams b = condition(p, 2, Eigen::VectorXd::Constant(1, 5.0));
  CHECK(a == b);
}

TEST_CASE("conditioning the fitted model on x1 = -2") {
  const std::vector<int> on{0};
  const RtbmParams child = condition_on(fixtures::student_fit(), on, Eigen::VectorXd::Constant(1, -2.0));
  REQUIRE(child.nv() == 1);
  REQUIRE(child.nh() == 2);
  CHECK(child.t(0, 0) == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(child.w(0, 0) == doctest::Approx(-0.66).epsilon(1e-15));
  CHECK(child.w(0, 1) == doctest::Approx(0.60).epsilon(1e-15));
  CHECK(child.bv(0) == doctest::Approx(-0.36).epsilon(1e-14));
  CHECK(child.bh(0) == doctest::Approx(10.44).epsilon(1e-14));
  CHECK(child.bh(1) == doctest::Approx(15.36).epsilon(1e-14));
  CHECK(child.q == fixtures::student_fit().q);
}

TEST_CASE("child density is the conditional: product rule") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 30; ++trial) {
    const int nv = 2 + trial % 3;
    const int nh = 1 + trial % 3;
    const RtbmParams p = fixtures::random_model(rng, nv, nh, trial % 2 ? Lattice::NonNeg : Lattice::Full);
    const Density parent(p);
    for (int m = 1; m < nv; ++m) {
      for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd v(nv);
        for (int k = 0; k < nv; ++k) v(k) = 1.5 * normal(rng);
        const Eigen::VectorXd d = v.tail(nv - m);
        const double lhs = parent.log_pdf(v);
        const double rhs = log_pdf(condition(p, m, d), v.head(m)) + log_marginal(p, m, d);
        CHECK(std::abs(lhs - rhs) <= 1e-9);
      }
    }
  }
}

TEST_CASE("chained conditioning equals one-shot conditioning") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int nv = 3 + trial % 2;
    const RtbmParams p = fixtures::random_model(rng, nv, 2);
    const int m = 1;
    const int k = nv - m - 1;  // first condition on the last coordinate only
    Eigen::VectorXd d(nv - m);
    for (int i = 0; i < d.size(); ++i) d(i) = normal(rng);
    const RtbmParams step = condition(p, m + k, d.tail(1));
    const RtbmParams chained = condition(step, m, d.head(k));
    const RtbmParams direct = condition(p, m, d);
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd y = Eigen::VectorXd::Constant(m, 2.0 * normal(rng));
      CHECK(std::abs(log_pdf(chained, y) - log_pdf(direct, y)) <= 1e-10);
    }
  }
}

TEST_CASE("child densities integrate to one") {
  const RtbmParams p = fixtures::student_fit();
  for (double x1 : {-2.0, 0.0, 1.0}) {
    const std::vector<int> on{0};
    const Density child(condition_on(p, on, Eigen::VectorXd::Constant(1, x1)));
    const std::vector<GridAxis> grid{{-40.0, 40.0, 4001}};
    const double mass = trapezoid_log_integral([&](const Eigen::VectorXd& y) { return child.log_pdf(y); }, grid);
    CHECK(std::abs(std::exp(mass) - 1.0) <= 1e-4);
  }
}

TEST_CASE("condition argument checks") {
  const RtbmParams p = fixtures::example_3d();
  CHECK_THROWS_AS(condition(p, 3, Eigen::VectorXd(0)), std::invalid_argument);
  CHECK_THROWS_AS(condition(p, 1, Eigen::VectorXd::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(condition(p, 1, Eigen::Vector2d(0.0, NAN)), std::invalid_argument);
  CHECK_THROWS_AS(condition_on(p, std::vector<int>{1, 1}, Eigen::Vector2d(0.0, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(condition_on(p, std::vector<int>{5}, Eigen::VectorXd::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(condition(fixtures::example_2d_printed(), 1, Eigen::VectorXd::Zero(1)), ModelError);
}

TEST_CASE("condition_on keeps free coordinates in original order") {
  const RtbmParams p = fixtures::example_3d();
  const RtbmParams child = condition_on(p, std::vector<int>{1}, Eigen::VectorXd::Constant(1, 0.3));
  CHECK(child.t(0, 0) == p.t(0, 0));
  CHECK(child.t(1, 1) == p.t(2, 2));
  CHECK(child.t(0, 1) == p.t(0, 2));
  const Density parent(p);
  const Eigen::Vector2d y(0.1, -0.2);
  const double joint = parent.log_pdf(Eigen::Vector3d(y(0), 0.3, y(1)));
  const std::vector<int> perm{0, 2, 1};
  const double marginal = log_marginal(permute(p, perm), 2, Eigen::VectorXd::Constant(1, 0.3));
  CHECK(std::abs(joint - log_pdf(child, y) - marginal) <= 1e-9);
}
