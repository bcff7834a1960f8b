#include "rtbm/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rtbm {

int default_population(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

CmaesResult minimize(const Objective& objective, const Eigen::VectorXd& x0, const CmaesConfig& config) {
  const int n = static_cast<int>(x0.size());
  if (n <= 0) throw std::invalid_argument("cmaes: dimension must be positive");
  if (!(config.sigma0 > 0.0)) throw std::invalid_argument("cmaes: sigma0 must be positive");
  if (config.max_evals < 1) throw std::invalid_argument("cmaes: max_evals must be positive");

  const int lambda = config.population > 0 ? config.population : default_population(n);
  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double dn = n;
  const double c_sigma = (mu_eff + 2.0) / (dn + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (dn + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / dn) / (dn + 4.0 + 2.0 * mu_eff / dn);
  const double c_1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mu_eff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dn + 2.0) * (dn + 2.0) + mu_eff));
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));
  const long stagnation_window = config.stagnation_window > 0 ? config.stagnation_window : 50L * n * lambda;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;

  Eigen::VectorXd mean = x0;
  double sigma = config.sigma0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd scales = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd path_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd path_c = Eigen::VectorXd::Zero(n);

  CmaesResult result;
  result.x_best = x0;
  result.f_best = std::numeric_limits<double>::infinity();
  double reference = result.f_best;
  long last_improvement = 0;

  Eigen::MatrixXd steps(n, lambda);
  Eigen::MatrixXd candidates(n, lambda);
  std::vector<double> values(lambda);
  std::vector<int> order(lambda);
  Eigen::VectorXd z(n);

  for (long generation = 1;; ++generation) {
    for (int k = 0; k < lambda; ++k) {
      for (int i = 0; i < n; ++i) z(i) = normal(rng);
      steps.col(k) = basis * scales.cwiseProduct(z);
      candidates.col(k) = mean + sigma * steps.col(k);
    }
    for (int k = 0; k < lambda; ++k) {
      if (result.evals >= config.max_evals) {
        values[k] = std::numeric_limits<double>::infinity();
        continue;
      }
      double f = objective(candidates.col(k));
      if (std::isnan(f)) f = std::numeric_limits<double>::infinity();
      values[k] = f;
      ++result.evals;
      if (f < result.f_best) {
        result.f_best = f;
        result.x_best = candidates.col(k);
      }
    }
    const bool improved = std::isinf(reference) ? std::isfinite(result.f_best)
                                                : result.f_best < reference - config.stagnation_tol *
                                                                                  std::abs(reference);
    if (improved) {
      reference = result.f_best;
      last_improvement = result.evals;
    }
    result.trace.push_back({result.evals, result.f_best});

    if (result.evals >= config.max_evals) {
      result.stop_reason = "max_evals";
      break;
    }
    if (result.evals - last_improvement >= stagnation_window) {
      result.stop_reason = "stagnation";
      break;
    }

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });

    Eigen::VectorXd step_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) step_w += weights(i) * steps.col(order[i]);
    mean += sigma * step_w;

    // C^{-1/2} step_w = B D^{-1} B' step_w
    const Eigen::VectorXd whitened = basis * (basis.transpose() * step_w).cwiseQuotient(scales);
    path_sigma = (1.0 - c_sigma) * path_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;
    const double ps_norm = path_sigma.norm();
    const double ps_expect = std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * generation));
    const bool h_sigma = ps_norm / ps_expect < (1.4 + 2.0 / (dn + 1.0)) * chi_n;
    path_c = (1.0 - c_c) * path_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * step_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto& s = steps.col(order[i]);
      rank_mu += weights(i) * s * s.transpose();
    }
    const double correction = h_sigma ? 0.0 : c_c * (2.0 - c_c);
    cov = (1.0 - c_1 - c_mu) * cov + c_1 * (path_c * path_c.transpose() + correction * cov) + c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    basis = eig.eigenvectors();
    scales = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    if (sigma < config.sigma_floor) {
      result.stop_reason = "sigma_collapse";
      break;
    }
    if (scales.maxCoeff() > 1e7 * scales.minCoeff()) {
      result.stop_reason = "ill_conditioned";
      break;
    }
    if (!std::isfinite(sigma) || !mean.allFinite()) {
      result.stop_reason = "numerical_breakdown";
      break;
    }
  }
  return result;
}

CmaesResult minimize(const Objective& objective, int dim, const CmaesConfig& config) {
  if (dim <= 0) throw std::invalid_argument("cmaes: dimension must be positive");
  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::normal_distribution<double> normal;
  Eigen::VectorXd x0(dim);
  for (int i = 0; i < dim; ++i) x0(i) = normal(rng);
  return minimize(objective, x0, config);
}

}  // namespace rtbm
