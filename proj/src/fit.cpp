#include "rtbm/fit.hpp"

#include "rtbm/density.hpp"
#include "rtbm/error.hpp"
#include "rtbm/sampling.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace rtbm {

double negative_log_likelihood(const RtbmParams& params, const Eigen::MatrixXd& data, double theta_eps) {
  if (data.cols() != params.nv()) {
    throw std::invalid_argument("negative_log_likelihood: data has " + std::to_string(data.cols()) +
                                " columns, model has " + std::to_string(params.nv()));
  }
  if (data.rows() == 0) throw std::invalid_argument("negative_log_likelihood: empty data");
  const Density density(params, theta_eps);
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (!data.row(i).allFinite()) return std::numeric_limits<double>::infinity();
    const double lp = density.log_pdf(data.row(i).transpose());
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    total -= lp;
  }
  return total;
}

int encoding_size(int nv, int nh) {
  return nv * (nv + 1) / 2 + nh * (nh + 1) / 2 + nv * nh + nv + nh;
}

namespace {

Eigen::MatrixXd decode_factor(const Eigen::VectorXd& x, int& pos, int dim) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) l(i, j) = i == j ? std::exp(x(pos++)) : x(pos++);
  }
  return l * l.transpose();
}

void encode_factor(const Eigen::MatrixXd& a, Eigen::VectorXd& x, int& pos) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw ModelError("encode: matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j <= i; ++j) x(pos++) = i == j ? std::log(l(i, i)) : l(i, j);
  }
}

}  // namespace

RtbmParams decode(const Eigen::VectorXd& x, int nv, int nh, Lattice lattice) {
  if (nv < 1 || nh < 1) throw std::invalid_argument("decode: dimensions must be positive");
  if (x.size() != encoding_size(nv, nh)) {
    throw std::invalid_argument("decode: expected " + std::to_string(encoding_size(nv, nh)) +
                                " entries, got " + std::to_string(x.size()));
  }
  RtbmParams p;
  p.lattice = lattice;
  int pos = 0;
  p.t = decode_factor(x, pos, nv);
  p.q = decode_factor(x, pos, nh);
  p.w.resize(nv, nh);
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < nh; ++j) p.w(i, j) = x(pos++);
  }
  p.bv = x.segment(pos, nv);
  pos += nv;
  p.bh = x.segment(pos, nh);
  return p;
}

Eigen::VectorXd encode(const RtbmParams& params) {
  const int nv = params.nv();
  const int nh = params.nh();
  Eigen::VectorXd x(encoding_size(nv, nh));
  int pos = 0;
  encode_factor(params.t, x, pos);
  encode_factor(params.q, x, pos);
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < nh; ++j) x(pos++) = params.w(i, j);
  }
  x.segment(pos, nv) = params.bv;
  pos += nv;
  x.segment(pos, nh) = params.bh;
  return x;
}

double penalized_nll(const Eigen::VectorXd& x, const Eigen::MatrixXd& data, int n_h, Lattice lattice,
                     double theta_eps) {
  const int nv = static_cast<int>(data.cols());
  const RtbmParams p = decode(x, nv, n_h, lattice);
  if (!p.t.allFinite() || !p.q.allFinite() || p.t.llt().info() != Eigen::Success) return kPenaltyBase * 10.0;
  const double lambda = min_eigenvalue(schur_hidden(p.t, p.q, p.w));
  if (!(lambda > kSchurFloor)) {
    return std::isfinite(lambda) ? kPenaltyBase + 1e6 * (kSchurFloor - lambda) : kPenaltyBase * 10.0;
  }
  try {
    return negative_log_likelihood(p, data, theta_eps);
  } catch (const Error&) {
    // Theta truncation cap or validity floor: as bad as an invalid model.
    return kPenaltyBase;
  }
}

namespace {

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  explicit Standardizer(const Eigen::MatrixXd& data) {
    mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
    scale = (centered.colwise().squaredNorm() / static_cast<double>(data.rows())).transpose().cwiseSqrt();
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      if (!(scale(i) > 0.0)) scale(i) = 1.0;
    }
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const {
    return (data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }

  // Parameters of the density of x when x' = (x - mean) / scale follows `p`.
  RtbmParams map_back(const RtbmParams& p) const {
    const Eigen::VectorXd inv = scale.cwiseInverse();
    RtbmParams out = p;
    out.t = inv.asDiagonal() * p.t * inv.asDiagonal();
    out.w = inv.asDiagonal() * p.w;
    out.bv = inv.cwiseProduct(p.bv) - out.t * mean;
    out.bh = p.bh - out.w.transpose() * mean;
    return out;
  }
};

}  // namespace

FitResult fit_density(const Eigen::MatrixXd& raw, const FitConfig& config) {
  if (raw.rows() < 1 || raw.cols() < 1) throw std::invalid_argument("fit_density: empty data");
  if (config.n_h < 1 || config.restarts < 1 || config.max_evals < 1 || !(config.sigma0 > 0.0)) {
    throw std::invalid_argument("fit_density: n_h, restarts, max_evals and sigma0 must be positive");
  }
  if (!raw.allFinite()) throw std::invalid_argument("fit_density: data has non-finite entries");

  const int nv = static_cast<int>(raw.cols());
  const int nh = config.n_h;
  const int dim = encoding_size(nv, nh);
  const Standardizer standardizer(raw);
  const Eigen::MatrixXd data = config.standardize ? standardizer.apply(raw) : raw;

  const Objective objective = [&](const Eigen::VectorXd& x) {
    return penalized_nll(x, data, nh, config.lattice, config.theta_eps);
  };

  FitResult result;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  for (int r = 0; r < config.restarts; ++r) {
    std::mt19937_64 init_rng(splitmix64(config.seed + 2 * static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> coord(0.0, 0.5);
    std::normal_distribution<double> bias_offset(0.0, 2.0);
    Eigen::VectorXd x0(dim);
    for (int i = 0; i < dim; ++i) x0(i) = coord(init_rng);
    for (int i = dim - nh; i < dim; ++i) x0(i) += bias_offset(init_rng);

    CmaesConfig cma;
    cma.population = config.population;
    cma.sigma0 = config.sigma0;
    cma.max_evals = config.max_evals;
    cma.seed = splitmix64(config.seed + 2 * static_cast<std::uint64_t>(r) + 1);
    const CmaesResult run = minimize(objective, x0, cma);

    for (const TracePoint& t : run.trace) {
      result.trace.push_back({result.evals + t.evals, std::min(best, t.best)});
    }
    result.evals += run.evals;
    result.restart_objective.push_back(run.f_best);
    if (run.f_best < best) {
      best = run.f_best;
      best_x = run.x_best;
      result.best_restart = r;
    }
  }

  if (!(best < kPenaltyBase)) {
    throw Error("fit_density: all " + std::to_string(config.restarts) +
                " restarts ended at invalid models (best penalized objective " + std::to_string(best) + ")");
  }
  RtbmParams params = decode(best_x, nv, nh, config.lattice);
  if (config.standardize) params = standardizer.map_back(params);
  result.params = checked(params);
  result.nll = negative_log_likelihood(result.params, raw, config.theta_eps);
  return result;
}

}  // namespace rtbm
