#pragma once

#include "rtbm/model.hpp"
#include "rtbm/theta.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>

namespace rtbm {

/// Multivariate Student-t with location mu, scale matrix sigma and nu
/// degrees of freedom.
struct StudentTParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double nu = 1.0;

  int p() const { return static_cast<int>(mu.size()); }
};

/// Law of x2 | x1 for a partitioned Student-t, itself a Student-t.
struct ConditionalTParams {
  Eigen::VectorXd loc;    // mu_2 + S21 S11^{-1} (x1 - mu_1)
  Eigen::MatrixXd scale;  // (nu + d1) / (nu + p1) * (S22 - S21 S11^{-1} S12)
  double df = 1.0;        // nu + p1
  int p1 = 0;
  int p2 = 0;

  StudentTParams as_student() const { return {loc, scale, df}; }
};

double student_logpdf(const StudentTParams& tp, const Eigen::VectorXd& x);

/// Conditions on the first p1 coordinates taking the values x1.
ConditionalTParams student_conditional(const StudentTParams& tp, int p1, const Eigen::VectorXd& x1);

/// Draws count x p samples as mu + L z sqrt(nu / chi2_nu) with L L' = sigma.
Eigen::MatrixXd sample_student(const StudentTParams& tp, int count, std::uint64_t seed);

/// log of the integral of exp(-1/2 x'Ax + b'x) over R^n:
///   n/2 log 2pi - 1/2 log det A + 1/2 b'A^{-1}b.
double log_gaussian_integral(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int nodes = 2;
};

/// Nodes of a tensor grid, one row per node, first axis slowest.
Eigen::MatrixXd grid_points(std::span<const GridAxis> grid);

inline constexpr double kQuadratureEdgeTolerance = 1e-10;
inline constexpr int kQuadratureMinNodes = 101;

/// Trapezoid rule over a 1D or 2D grid for a function given in log space;
/// returns the log of the integral. Throws OracleError if the integrand
/// mass on the grid boundary exceeds edge_tolerance of the total.
double trapezoid_log_integral(const std::function<double(const Eigen::VectorXd&)>& log_f,
                              std::span<const GridAxis> grid, double edge_tolerance = kQuadratureEdgeTolerance);

/// log P(d) by trapezoid integration of exp(log_pdf) over the first m
/// coordinates (m <= 2, every axis with at least 101 nodes).
double quadrature_marginal(const RtbmParams& params, int m, const Eigen::VectorXd& d,
                           std::span<const GridAxis> grid, double theta_eps = kDefaultThetaEps);

}  // namespace rtbm
