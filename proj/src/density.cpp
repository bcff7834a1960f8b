#include "rtbm/density.hpp"

#include "rtbm/error.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace rtbm {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double half_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

Density::Density(const RtbmParams& params, double theta_eps)
    : params_(checked(params)),
      theta_eps_(theta_eps),
      t_llt_(params_.t),
      numerator_(params_.q, params_.lattice, theta_eps) {
  const Eigen::MatrixXd half_w = t_llt_.matrixL().solve(params_.w);     // L^{-1}W
  const Eigen::VectorXd half_bv = t_llt_.matrixL().solve(params_.bv);   // L^{-1}b_v
  const Eigen::MatrixXd omega = params_.q - half_w.transpose() * half_w;
  const Eigen::VectorXd z = params_.bh - half_w.transpose() * half_bv;
  log_partition_ = ThetaSum(omega, params_.lattice, theta_eps).log_value(z);
  log_const_ = half_log_det(t_llt_) - 0.5 * params_.nv() * kLog2Pi - 0.5 * half_bv.squaredNorm() -
               log_partition_;
}

double Density::log_pdf(const Eigen::VectorXd& v) const {
  if (v.size() != params_.nv()) {
    throw std::invalid_argument("log_pdf: point has " + std::to_string(v.size()) + " entries, model has " +
                                std::to_string(params_.nv()));
  }
  const double quad = 0.5 * v.dot(params_.t * v) + params_.bv.dot(v);
  const Eigen::VectorXd z = params_.bh + params_.w.transpose() * v;
  return log_const_ - quad + numerator_.log_value(z);
}

double log_pdf(const RtbmParams& params, const Eigen::VectorXd& v, double theta_eps) {
  return Density(params, theta_eps).log_pdf(v);
}

double log_marginal(const RtbmParams& params, int m, const Eigen::VectorXd& d, double theta_eps) {
  const RtbmParams p = checked(params);
  const int nv = p.nv();
  if (m < 1 || m >= nv) {
    throw std::invalid_argument("log_marginal: m = " + std::to_string(m) + " outside [1, " +
                                std::to_string(nv - 1) + "]");
  }
  if (d.size() != nv - m) {
    throw std::invalid_argument("log_marginal: d must have " + std::to_string(nv - m) + " entries");
  }
  const BlockDecomposition b = block_split(p, m);

  // Full-model normalizer.
  Eigen::LLT<Eigen::MatrixXd> t_llt(p.t);
  const Eigen::MatrixXd half_w = t_llt.matrixL().solve(p.w);
  const Eigen::VectorXd half_bv = t_llt.matrixL().solve(p.bv);
  const double log_partition = ThetaSum(p.q - half_w.transpose() * half_w, p.lattice, theta_eps)
                                   .log_value(p.bh - half_w.transpose() * half_bv);

  // Gaussian integral over y with A = T0, linear term W0 n - a.
  Eigen::LLT<Eigen::MatrixXd> t0_llt(b.t0_bar);
  const Eigen::VectorXd a = b.bv0 + b.t1_bar.transpose() * d;
  const Eigen::VectorXd half_a = t0_llt.matrixL().solve(a);
  const Eigen::MatrixXd half_w0 = t0_llt.matrixL().solve(b.w0);
  const Eigen::MatrixXd omega = p.q - half_w0.transpose() * half_w0;
  const Eigen::VectorXd z = p.bh + b.w1.transpose() * d - half_w0.transpose() * half_a;

  double log_num = 0.0;
  try {
    log_num = ThetaSum(omega, p.lattice, theta_eps).log_value(z);
  } catch (const ThetaError& e) {
    throw ModelError(std::string("log_marginal: Q - W0'T0^-1 W0 unusable: ") + e.what());
  }

  return half_log_det(t_llt) - 0.5 * nv * kLog2Pi + 0.5 * m * kLog2Pi - half_log_det(t0_llt) -
         0.5 * d.dot(b.t_tilde * d) - b.bv1.dot(d) - 0.5 * half_bv.squaredNorm() +
         0.5 * half_a.squaredNorm() + log_num - log_partition;
}

RtbmParams condition(const RtbmParams& params, int m, const Eigen::VectorXd& d) {
  const RtbmParams p = checked(params);
  if (m < 1 || m >= p.nv()) {
    throw std::invalid_argument("condition: m = " + std::to_string(m) + " outside [1, " +
                                std::to_string(p.nv() - 1) + "]");
  }
  if (d.size() != p.nv() - m) {
    throw std::invalid_argument("condition: d must have " + std::to_string(p.nv() - m) + " entries");
  }
  if (!d.allFinite()) {
    throw std::invalid_argument("condition: d has non-finite entries");
  }
  const BlockDecomposition b = block_split(p, m);
  RtbmParams child;
  child.t = b.t0_bar;
  child.q = p.q;
  child.w = b.w0;
  child.bv = b.bv0 + b.t1_bar.transpose() * d;
  child.bh = p.bh + b.w1.transpose() * d;
  child.lattice = p.lattice;

  ValidationReport report = validate(child);
  if (!report.valid) {
    throw ModelError("condition: child of a valid parent failed validation (internal consistency): " +
                     report.summary());
  }
  return child;
}

RtbmParams condition_on(const RtbmParams& params, std::span<const int> indices,
                        const Eigen::VectorXd& values) {
  const int nv = params.nv();
  const int k = static_cast<int>(indices.size());
  if (k < 1 || k >= nv) {
    throw std::invalid_argument("condition_on: need between 1 and " + std::to_string(nv - 1) +
                                " conditioned coordinates");
  }
  if (values.size() != k) {
    throw std::invalid_argument("condition_on: one value per conditioned index required");
  }
  std::vector<bool> conditioned(nv, false);
  for (int idx : indices) {
    if (idx < 0 || idx >= nv) {
      throw std::invalid_argument("condition_on: index " + std::to_string(idx) + " out of range");
    }
    if (conditioned[idx]) {
      throw std::invalid_argument("condition_on: index " + std::to_string(idx) + " repeated");
    }
    conditioned[idx] = true;
  }
  std::vector<int> perm;
  perm.reserve(nv);
  for (int i = 0; i < nv; ++i) {
    if (!conditioned[i]) perm.push_back(i);
  }
  perm.insert(perm.end(), indices.begin(), indices.end());
  return condition(permute(params, perm), nv - k, values);
}

}  // namespace rtbm
