#pragma once

#include "rtbm/model.hpp"
#include "rtbm/theta.hpp"

#include <Eigen/Dense>

#include <span>

namespace rtbm {

/// Visible-sector density of a validated RTBM, prepared for repeated
/// evaluation. All values are natural-log densities.
class Density {
 public:
  /// Validates `params` (throws ModelError) and factors T once.
  explicit Density(const RtbmParams& params, double theta_eps = kDefaultThetaEps);

  double log_pdf(const Eigen::VectorXd& v) const;

  const RtbmParams& params() const { return params_; }
  /// log theta(b_h - W'T^{-1}b_v | Q - W'T^{-1}W), the normalizing sum.
  double log_partition() const { return log_partition_; }
  double theta_eps() const { return theta_eps_; }

 private:
  RtbmParams params_;
  double theta_eps_;
  Eigen::LLT<Eigen::MatrixXd> t_llt_;
  ThetaSum numerator_;
  double log_partition_ = 0.0;
  double log_const_ = 0.0;
};

double log_pdf(const RtbmParams& params, const Eigen::VectorXd& v, double theta_eps = kDefaultThetaEps);

/// log P(d): the density with the first m visible coordinates integrated out.
/// Requires 0 < m < N_v and d.size() == N_v - m.
double log_marginal(const RtbmParams& params, int m, const Eigen::VectorXd& d,
                    double theta_eps = kDefaultThetaEps);

/// Child RTBM over the first m coordinates whose density is P(y | d), where
/// d fixes the trailing N_v - m coordinates:
///   T -> T0,  W -> W0,  b_v -> b_v0 + T1'd,  b_h -> b_h + W1'd.
RtbmParams condition(const RtbmParams& params, int m, const Eigen::VectorXd& d);

/// Conditions on an arbitrary subset of visible coordinates (zero-based
/// indices, values aligned). The child's coordinates are the remaining ones
/// in their original order.
RtbmParams condition_on(const RtbmParams& params, std::span<const int> indices,
                        const Eigen::VectorXd& values);

}  // namespace rtbm
