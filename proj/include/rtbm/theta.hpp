#pragma once

#include "rtbm/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rtbm {

inline constexpr double kDefaultThetaEps = 1e-12;
inline constexpr double kMaxThetaEps = 1e-3;
inline constexpr double kDefaultRadiusCap = 64.0;

/// Argument of the real lattice sum
///   theta(z | omega) = sum_{n in lattice} exp(-1/2 n'omega n + n'z).
struct ThetaQuery {
  Eigen::VectorXd z;
  Eigen::MatrixXd omega;
  Lattice lattice = Lattice::Full;
  double eps = kDefaultThetaEps;
};

/// One retained lattice point and its log term -1/2 n'omega n + n'z.
struct LatticeTerm {
  Eigen::VectorXi n;
  double log_term = 0.0;
};

/// Truncated lattice sum for a fixed omega, reusable across many z.
///
/// Terms are enumerated over the ellipsoid (n - c)'omega(n - c) <= R^2
/// around the continuous maximizer c (the nonnegative-orthant maximizer for
/// Lattice::NonNeg). R is the smallest radius for which a Gaussian tail bound
/// certifies that the omitted mass is below eps times the retained sum; it
/// depends on omega and eps only. Summation is log-sum-exp in a fixed order.
class ThetaSum {
 public:
  /// Throws ThetaError if omega is not symmetric PD, eps is outside
  /// (0, 1e-3], or the certified radius needs more than `radius_cap` lattice
  /// steps along some axis.
  ThetaSum(const Eigen::MatrixXd& omega, Lattice lattice, double eps = kDefaultThetaEps,
           double radius_cap = kDefaultRadiusCap);

  double log_value(const Eigen::VectorXd& z) const;

  /// Every retained lattice point with its log term, in summation order.
  std::vector<LatticeTerm> terms(const Eigen::VectorXd& z) const;

  int dim() const { return static_cast<int>(omega_.rows()); }
  Lattice lattice() const { return lattice_; }
  double ellipsoid_radius() const { return radius_; }
  double lambda_min() const { return lambda_min_; }

 private:
  struct Center {
    Eigen::VectorXd x;     // continuous (or orthant-constrained) maximizer
    Eigen::VectorXd grad;  // z - omega x, nonzero only on active bounds
    double log_peak = 0.0; // f(x)
  };

  Center center(const Eigen::VectorXd& z) const;

  template <class Visit>
  void enumerate(const Center& c, Visit&& visit) const;

  Eigen::MatrixXd omega_;
  Eigen::MatrixXd upper_;  // omega = upper' * upper
  Lattice lattice_;
  double radius_ = 0.0;
  double lambda_min_ = 0.0;
};

double log_theta(const ThetaQuery& query);

/// Exhaustive sum over every lattice point with max-norm <= radius around
/// the origin. Test oracle only. Throws ThetaError when
/// N_h * (2 radius + 1)^N_h exceeds 1e8.
double log_theta_reference(const Eigen::VectorXd& z, const Eigen::MatrixXd& omega, Lattice lattice,
                           int radius);

}  // namespace rtbm
