#pragma once

#include "rtbm/model.hpp"
#include "rtbm/oracle.hpp"

#include <Eigen/Dense>

#include <random>

namespace rtbm::fixtures {

// Fitted to the Student-t below (N_v = 2, N_h = 2).
inline RtbmParams student_fit() {
  RtbmParams p;
  p.w.resize(2, 2);
  p.w << -1.11, 1.02, -0.66, 0.60;
  p.t.resize(2, 2);
  p.t << 0.56, 0.18, 0.18, 0.30;
  p.bv = Eigen::Vector2d(0.0, 0.0);
  p.bh = Eigen::Vector2d(8.22, 17.40);
  p.q.resize(2, 2);
  p.q << 24.15, -0.44, -0.44, 41.57;
  return p;
}

// Constructed 2D example (N_v = 2, N_h = 4) with Q(3,3) as given: -5.54.
inline RtbmParams example_2d_printed(double q33 = -5.54) {
  RtbmParams p;
  p.w.resize(2, 4);
  p.w << 18.54, 3.02, -12.89, -5.45, 0.46, 1.01, -1.32, -5.54;
  p.t.resize(2, 2);
  p.t << 28.77, 0.0, 0.0, 6.3;
  p.bv = Eigen::Vector2d(-1.76, -2.69);
  p.bh.resize(4);
  p.bh << -0.31, 2.29, 1.65, -2.73;
  p.q.resize(4, 4);
  p.q << 15.48, 8.82, -3.19, -3.67,  //
      8.82, 17.99, 8.94, -4.04,      //
      -3.19, 8.94, 15.74, 4.14,      //
      -3.67, -4.04, 4.14, q33;
  return p;
}

// The 2D example with Q(3,3) = 10: the smallest round value for which both
// Q and Q - W'T^{-1}W are positive definite with margin.
inline RtbmParams example_2d() { return example_2d_printed(10.0); }

// Constructed 3D example (N_v = 3, N_h = 1).
inline RtbmParams example_3d() {
  RtbmParams p;
  p.w.resize(3, 1);
  p.w << -15.76, 2.29, 2.09;
  p.t.resize(3, 3);
  p.t << 16.02, -6.52, -6.76,  //
      -6.52, 29.04, -2.56,     //
      -6.76, -2.56, 42.16;
  p.bv = Eigen::Vector3d(1.08, -0.67, 4.86);
  p.bh = Eigen::VectorXd::Constant(1, 3.17);
  p.q = Eigen::MatrixXd::Constant(1, 1, 19.18);
  return p;
}

inline StudentTParams student_t() {
  StudentTParams tp;
  tp.mu = Eigen::Vector2d(0.0, 0.0);
  tp.sigma.resize(2, 2);
  tp.sigma << 2.0, -1.0, -1.0, 4.0;
  tp.nu = 6.0;
  return tp;
}

// Symmetric PD matrix with eigenvalues drawn uniformly from [lo, hi].
template <class Rng>
Eigen::MatrixXd random_pd(Rng& rng, int dim, double lo, double hi) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(lo, hi);
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd basis = qr.householderQ();
  Eigen::VectorXd values(dim);
  for (int i = 0; i < dim; ++i) values(i) = eig(rng);
  Eigen::MatrixXd out = basis * values.asDiagonal() * basis.transpose();
  return 0.5 * (out + out.transpose());
}

// Random valid RTBM: T and Q well conditioned, W scaled so the hidden
// Schur complement stays positive definite.
template <class Rng>
RtbmParams random_model(Rng& rng, int nv, int nh, Lattice lattice = Lattice::Full) {
  std::normal_distribution<double> normal;
  RtbmParams p;
  p.lattice = lattice;
  do {
  p.t = random_pd(rng, nv, 0.5, 4.0);
  p.q = random_pd(rng, nh, 2.0, 10.0);
  p.w.resize(nv, nh);
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < nh; ++j) p.w(i, j) = 0.5 * normal(rng);
  p.bv.resize(nv);
  for (int i = 0; i < nv; ++i) p.bv(i) = normal(rng);
  p.bh.resize(nh);
  for (int i = 0; i < nh; ++i) p.bh(i) = 2.0 * normal(rng);
  } while (!validate(p).valid);
  return p;
}

}  // namespace rtbm::fixtures
