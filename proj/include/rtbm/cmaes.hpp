#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rtbm {

struct CmaesConfig {
  /// Offspring per generation; 0 selects 4 + floor(3 ln dim).
  int population = 0;
  double sigma0 = 0.3;
  long max_evals = 50000;
  std::uint64_t seed = 1;
  /// Stop once sigma falls below this.
  double sigma_floor = 1e-12;
  /// Stop when the best value has not improved by more than
  /// stagnation_tol * |best| within stagnation_window evaluations
  /// (0 selects 50 * dim generations, i.e. 50 * dim * population).
  double stagnation_tol = 1e-10;
  long stagnation_window = 0;
};

struct TracePoint {
  long evals = 0;
  double best = 0.0;
};

struct CmaesResult {
  Eigen::VectorXd x_best;
  double f_best = 0.0;
  long evals = 0;
  std::vector<TracePoint> trace;  // best-so-far after each generation
  std::string stop_reason;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

int default_population(int dim);

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance updates. Non-finite objective values
/// rank last. Deterministic for a fixed seed.
CmaesResult minimize(const Objective& objective, const Eigen::VectorXd& x0, const CmaesConfig& config);

/// Same, starting from a mean drawn from N(0, I) with the config seed.
CmaesResult minimize(const Objective& objective, int dim, const CmaesConfig& config);

}  // namespace rtbm
