#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "rtbm/error.hpp"
#include "rtbm/theta.hpp"

#include <cmath>
#include <random>

using namespace rtbm;

namespace {

ThetaQuery query(Eigen::VectorXd z, Eigen::MatrixXd omega, Lattice lattice = Lattice::Full) {
  return {std::move(z), std::move(omega), lattice, kDefaultThetaEps};
}

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

}  // namespace

// Frozen from direct summation over |n| <= 6 (resp. 0 <= n <= 6).
TEST_CASE("one-dimensional values") {
  CHECK(log_theta(query(Eigen::VectorXd::Zero(1), scalar(2.0))) == doctest::Approx(0.5724683839469008).epsilon(1e-14));
  CHECK(log_theta(query(Eigen::VectorXd::Zero(1), scalar(2.0), Lattice::NonNeg)) ==
        doctest::Approx(0.3266517462223079).epsilon(1e-14));
}

TEST_CASE("full lattice is symmetric in z") {
  const double plus = log_theta(query(Eigen::VectorXd::Constant(1, 1.0), scalar(2.0)));
  const double minus = log_theta(query(Eigen::VectorXd::Constant(1, -1.0), scalar(2.0)));
  CHECK(plus == minus);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const Eigen::MatrixXd omega = fixtures::random_pd(rng, d, 0.5, 50.0);
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = u(rng);
    const ThetaSum sum(omega, Lattice::Full);
    CHECK(std::abs(sum.log_value(z) - sum.log_value(-z)) <= 1e-12);
  }
}

TEST_CASE("reference evaluator values") {
  const Eigen::MatrixXd omega = 50.0 * Eigen::MatrixXd::Identity(2, 2);
  CHECK(log_theta_reference(Eigen::VectorXd::Zero(2), omega, Lattice::Full, 3) ==
        doctest::Approx(5.5551785392416106e-11).epsilon(1e-9));
  CHECK(log_theta_reference(Eigen::VectorXd::Zero(2), omega, Lattice::Full, 0) == 0.0);
  CHECK(log_theta_reference(Eigen::VectorXd::Constant(2, 3.0), omega, Lattice::Full, 0) == 0.0);
}

TEST_CASE("reference evaluator enforces its enumeration cap") {
  const Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(log_theta_reference(Eigen::VectorXd::Zero(4), omega, Lattice::Full, 60), ThetaError);
  CHECK_THROWS_AS(log_theta_reference(Eigen::VectorXd::Zero(4), omega, Lattice::Full, -1), ThetaError);
}

TEST_CASE("truncated sum agrees with the exhaustive reference") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const Lattice lattice = (trial / 3) % 2 == 0 ? Lattice::Full : Lattice::NonNeg;
    const Eigen::MatrixXd omega = fixtures::random_pd(rng, d, 0.5, 50.0);
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = u(rng);
    const int radius = d == 1 ? 200 : (d == 2 ? 60 : 32);
    const double fast = log_theta(query(z, omega, lattice));
    const double slow = log_theta_reference(z, omega, lattice, radius);
    CHECK(std::abs(fast - slow) <= 1e-12 * std::max(1.0, std::abs(slow)));
  }
}

TEST_CASE("large biases do not overflow") {
  // Biases of the fitted model give term exponents in the hundreds.
  const RtbmParams p = fixtures::student_fit();
  const Eigen::VectorXd z = p.bh + p.w.transpose() * Eigen::Vector2d(-8.0, 6.0);
  const double value = log_theta(query(z, p.q));
  CHECK(std::isfinite(value));
  CHECK(std::abs(value - log_theta_reference(z, p.q, Lattice::Full, 20)) <= 1e-12 * std::abs(value));

  const Eigen::VectorXd huge = Eigen::VectorXd::Constant(2, 800.0);
  CHECK(std::isfinite(log_theta(query(huge, p.q))));
}

TEST_CASE("result is bounded below by the largest term") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const Lattice lattice = trial % 2 == 0 ? Lattice::Full : Lattice::NonNeg;
    const Eigen::MatrixXd omega = fixtures::random_pd(rng, d, 0.5, 20.0);
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = u(rng);
    const ThetaSum sum(omega, lattice);
    double largest = -INFINITY;
    for (const LatticeTerm& t : sum.terms(z)) largest = std::max(largest, t.log_term);
    CHECK(sum.log_value(z) >= largest);
  }
}

TEST_CASE("terms carry their exact exponent") {
  const Eigen::MatrixXd omega = fixtures::student_fit().q;
  const Eigen::Vector2d z(8.22, 17.40);
  const ThetaSum sum(omega, Lattice::Full);
  for (const LatticeTerm& t : sum.terms(z)) {
    const Eigen::VectorXd n = t.n.cast<double>();
    CHECK(t.log_term == doctest::Approx(-0.5 * n.dot(omega * n) + n.dot(z)).epsilon(1e-12));
  }
}

TEST_CASE("nonnegative lattice never visits negative points") {
  const Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(2, 2);
  const ThetaSum sum(omega, Lattice::NonNeg);
  for (const LatticeTerm& t : sum.terms(Eigen::Vector2d(-3.0, 1.0))) {
    CHECK(t.n.minCoeff() >= 0);
  }
}

TEST_CASE("tightening eps moves the result by at most the looser eps") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3;
    const Lattice lattice = trial % 2 == 0 ? Lattice::Full : Lattice::NonNeg;
    const Eigen::MatrixXd omega = fixtures::random_pd(rng, d, 0.5, 10.0);
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = u(rng);
    double previous = ThetaSum(omega, lattice, 1e-3).log_value(z);
    double loose = 1e-3;
    for (double eps : {1e-5, 1e-8, 1e-12, 1e-15}) {
      const double value = ThetaSum(omega, lattice, eps).log_value(z);
      CHECK(value >= previous - 1e-14 * std::max(1.0, std::abs(previous)));
      CHECK(std::expm1(value - previous) <= loose * (1.0 + 1e-12));
      previous = value;
      loose = eps;
    }
  }
}

TEST_CASE("errors are explicit") {
  CHECK_THROWS_AS(ThetaSum(scalar(-1.0), Lattice::Full), ThetaError);
  CHECK_THROWS_AS(ThetaSum(scalar(1.0), Lattice::Full, 0.0), ThetaError);
  CHECK_THROWS_AS(ThetaSum(scalar(1.0), Lattice::Full, 1e-2), ThetaError);
  // A nearly flat direction needs far more than 64 lattice steps.
  CHECK_THROWS_AS(ThetaSum(scalar(1e-4), Lattice::Full), ThetaError);
  CHECK_THROWS_AS(ThetaSum(scalar(1e-4), Lattice::Full, 1e-12, 64.0), ThetaError);
  CHECK_NOTHROW(ThetaSum(scalar(1e-4), Lattice::Full, 1e-12, 5000.0));
  const ThetaSum sum(scalar(1.0), Lattice::Full);
  CHECK_THROWS_AS(sum.log_value(Eigen::VectorXd::Zero(2)), ThetaError);
}
