#pragma once

#include "rtbm/cmaes.hpp"
#include "rtbm/model.hpp"
#include "rtbm/theta.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace rtbm {

struct FitConfig {
  int n_h = 2;
  int restarts = 5;
  int population = 0;  // 0: 4 + floor(3 ln dim)
  double sigma0 = 0.3;
  long max_evals = 50000;  // per restart
  std::uint64_t seed = 1;
  double theta_eps = kDefaultThetaEps;
  Lattice lattice = Lattice::Full;
  /// Fit on per-column standardized data and map the parameters back.
  bool standardize = false;
};

struct FitResult {
  RtbmParams params;
  double nll = 0.0;  // natural log, summed over rows
  /// Best-so-far objective across all restarts, with cumulative eval counts.
  std::vector<TracePoint> trace;
  long evals = 0;
  int best_restart = 0;
  std::vector<double> restart_objective;
};

/// -sum_i log P(v_i); +inf if any row has a non-finite log density.
/// `data` holds one sample per row.
double negative_log_likelihood(const RtbmParams& params, const Eigen::MatrixXd& data,
                               double theta_eps = kDefaultThetaEps);

/// Length of the unconstrained encoding:
/// N_v(N_v+1)/2 + N_h(N_h+1)/2 + N_v N_h + N_v + N_h.
int encoding_size(int nv, int nh);

/// T and Q are rebuilt as L L' from lower-triangular factors whose
/// diagonals are stored as logs; W, b_v, b_h are stored raw.
RtbmParams decode(const Eigen::VectorXd& x, int nv, int nh, Lattice lattice = Lattice::Full);
Eigen::VectorXd encode(const RtbmParams& params);

inline constexpr double kSchurFloor = 1e-8;
inline constexpr double kPenaltyBase = 1e12;

/// nll(decode(x)) when Q - W'T^{-1}W clears kSchurFloor; otherwise
/// kPenaltyBase + 1e6 (floor - lambda_min) without evaluating the density.
double penalized_nll(const Eigen::VectorXd& x, const Eigen::MatrixXd& data, int n_h, Lattice lattice,
                     double theta_eps);

/// Maximum-likelihood fit by restarted CMA-ES. Throws Error if every
/// restart ends at an invalid model.
FitResult fit_density(const Eigen::MatrixXd& data, const FitConfig& config);

}  // namespace rtbm
