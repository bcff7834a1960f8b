#include "rtbm/oracle.hpp"

#include "rtbm/density.hpp"
#include "rtbm/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace rtbm {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_pd(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() < 1 || a.rows() != a.cols() || !a.allFinite()) {
    throw OracleError(std::string(what) + " must be a finite non-empty square matrix");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (a + a.transpose()));
  if (llt.info() != Eigen::Success) {
    throw OracleError(std::string(what) + " not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void check_student(const StudentTParams& tp) {
  if (!(tp.nu > 0.0)) throw OracleError("student-t: nu must be > 0");
  if (tp.sigma.rows() != tp.p() || tp.sigma.cols() != tp.p()) {
    throw OracleError("student-t: sigma must be p x p");
  }
}

}  // namespace

double student_logpdf(const StudentTParams& tp, const Eigen::VectorXd& x) {
  check_student(tp);
  if (x.size() != tp.p()) throw std::invalid_argument("student_logpdf: dimension mismatch");
  const auto llt = factor_pd(tp.sigma, "sigma");
  const double p = tp.p();
  const double maha = llt.matrixL().solve(x - tp.mu).squaredNorm();
  return std::lgamma(0.5 * (tp.nu + p)) - std::lgamma(0.5 * tp.nu) - 0.5 * p * std::log(tp.nu * std::numbers::pi) -
         0.5 * log_det(llt) - 0.5 * (tp.nu + p) * std::log1p(maha / tp.nu);
}

ConditionalTParams student_conditional(const StudentTParams& tp, int p1, const Eigen::VectorXd& x1) {
  check_student(tp);
  const int p = tp.p();
  if (p1 < 1 || p1 >= p) {
    throw std::invalid_argument("student_conditional: p1 must lie in [1, p-1]");
  }
  if (x1.size() != p1) throw std::invalid_argument("student_conditional: x1 must have p1 entries");
  const int p2 = p - p1;
  const Eigen::MatrixXd s11 = tp.sigma.topLeftCorner(p1, p1);
  const Eigen::MatrixXd s21 = tp.sigma.bottomLeftCorner(p2, p1);
  const Eigen::MatrixXd s22 = tp.sigma.bottomRightCorner(p2, p2);
  const auto llt = factor_pd(s11, "sigma_11");

  const Eigen::VectorXd dev = x1 - tp.mu.head(p1);
  const Eigen::VectorXd s11_inv_dev = llt.solve(dev);
  const double d1 = dev.dot(s11_inv_dev);

  ConditionalTParams out;
  out.p1 = p1;
  out.p2 = p2;
  out.loc = tp.mu.tail(p2) + s21 * s11_inv_dev;
  const Eigen::MatrixXd s22_1 = s22 - s21 * llt.solve(s21.transpose());
  out.scale = ((tp.nu + d1) / (tp.nu + p1)) * s22_1;
  out.df = tp.nu + p1;
  return out;
}

Eigen::MatrixXd sample_student(const StudentTParams& tp, int count, std::uint64_t seed) {
  check_student(tp);
  if (count < 1) throw std::invalid_argument("sample_student: count must be >= 1");
  const auto llt = factor_pd(tp.sigma, "sigma");
  const Eigen::MatrixXd lower = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(tp.nu);
  const int p = tp.p();
  Eigen::MatrixXd out(count, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < p; ++j) z(j) = normal(rng);
    const double w = chi2(rng);
    out.row(i) = (tp.mu + lower * z * std::sqrt(tp.nu / w)).transpose();
  }
  return out;
}

double log_gaussian_integral(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto llt = factor_pd(a, "A");
  if (b.size() != a.rows()) throw std::invalid_argument("log_gaussian_integral: dimension mismatch");
  const double n = static_cast<double>(a.rows());
  return 0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt) +
         0.5 * llt.matrixL().solve(b).squaredNorm();
}

Eigen::MatrixXd grid_points(std::span<const GridAxis> grid) {
  if (grid.empty()) throw std::invalid_argument("grid: at least one axis required");
  Eigen::Index total = 1;
  for (const auto& axis : grid) {
    if (!(axis.lo < axis.hi) || axis.nodes < 2) {
      throw std::invalid_argument("grid: each axis needs lo < hi and at least 2 nodes");
    }
    total *= axis.nodes;
  }
  const auto dims = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd out(total, dims);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rest = row;
    for (Eigen::Index k = dims - 1; k >= 0; --k) {
      const auto& axis = grid[k];
      const Eigen::Index i = rest % axis.nodes;
      rest /= axis.nodes;
      out(row, k) = i == axis.nodes - 1 ? axis.hi : axis.lo + (axis.hi - axis.lo) * i / (axis.nodes - 1);
    }
  }
  return out;
}

double trapezoid_log_integral(const std::function<double(const Eigen::VectorXd&)>& log_f,
                              std::span<const GridAxis> grid, double edge_tolerance) {
  if (grid.size() != 1 && grid.size() != 2) {
    throw std::invalid_argument("trapezoid: only 1D and 2D grids supported");
  }
  const Eigen::MatrixXd nodes = grid_points(grid);
  const auto dims = static_cast<Eigen::Index>(grid.size());
  std::vector<double> logs(static_cast<std::size_t>(nodes.rows()));
  double peak = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < nodes.rows(); ++r) {
    logs[r] = log_f(nodes.row(r).transpose());
    if (std::isnan(logs[r])) throw OracleError("trapezoid: integrand is NaN");
    peak = std::max(peak, logs[r]);
  }
  if (!std::isfinite(peak)) throw OracleError("trapezoid: integrand vanishes on the grid");

  double total = 0.0;
  double edge = 0.0;
  for (Eigen::Index r = 0; r < nodes.rows(); ++r) {
    Eigen::Index rest = r;
    double weight = 1.0;
    bool on_edge = false;
    for (Eigen::Index k = dims - 1; k >= 0; --k) {
      const auto& axis = grid[k];
      const Eigen::Index i = rest % axis.nodes;
      rest /= axis.nodes;
      const double h = (axis.hi - axis.lo) / (axis.nodes - 1);
      const bool end = i == 0 || i == axis.nodes - 1;
      weight *= end ? 0.5 * h : h;
      on_edge = on_edge || end;
    }
    const double value = std::exp(logs[r] - peak);
    total += weight * value;
    if (on_edge) edge += weight * value;
  }
  if (edge > edge_tolerance * total) {
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%.3e", edge / total);
    throw OracleError(std::string("trapezoid: grid too small, boundary carries ") + ratio + " of the integral");
  }
  return peak + std::log(total);
}

double quadrature_marginal(const RtbmParams& params, int m, const Eigen::VectorXd& d,
                           std::span<const GridAxis> grid, double theta_eps) {
  if (m < 1 || m > 2) throw std::invalid_argument("quadrature_marginal: m must be 1 or 2");
  if (static_cast<int>(grid.size()) != m) throw std::invalid_argument("quadrature_marginal: need m grid axes");
  for (const auto& axis : grid) {
    if (axis.nodes < kQuadratureMinNodes) {
      throw std::invalid_argument("quadrature_marginal: at least 101 nodes per axis required");
    }
  }
  if (d.size() != params.nv() - m) throw std::invalid_argument("quadrature_marginal: d has wrong length");
  const Density density(params, theta_eps);
  Eigen::VectorXd v(params.nv());
  v.tail(d.size()) = d;
  return trapezoid_log_integral(
      [&](const Eigen::VectorXd& y) {
        v.head(m) = y;
        return density.log_pdf(v);
      },
      grid);
}

}  // namespace rtbm
