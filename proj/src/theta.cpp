#include "rtbm/theta.hpp"

#include "rtbm/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rtbm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log-sum-exp with a fixed accumulation order.
struct LogSum {
  double anchor = kNegInf;
  double scaled = 0.0;

  void add(double log_term) {
    if (log_term <= anchor) {
      scaled += std::exp(log_term - anchor);
    } else {
      scaled = scaled * std::exp(anchor - log_term) + 1.0;
      anchor = log_term;
    }
  }
  double value() const { return anchor + std::log(scaled); }
};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log of the number of lattice points in the box |n_i - c_i| <= r * half_width_i.
double log_box_count(double r, const Eigen::VectorXd& half_width) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < half_width.size(); ++i) out += std::log(2.0 * r * half_width(i) + 1.0);
  return out;
}

// Bound on log sum_{q(n) > R^2} exp(-q(n)/2) using shells of width `step`.
double log_tail_bound(double radius, const Eigen::VectorXd& half_width) {
  constexpr double step = 0.25;
  double total = kNegInf;
  for (int j = 0; j < 100000; ++j) {
    const double inner = radius + j * step;
    const double term = log_box_count(inner + step, half_width) - 0.5 * inner * inner;
    total = log_add(total, term);
    if (inner > 1.0 && term < total - 60.0) break;
  }
  return total;
}

}  // namespace

ThetaSum::ThetaSum(const Eigen::MatrixXd& omega, Lattice lattice, double eps, double radius_cap)
    : omega_(omega), lattice_(lattice) {
  if (omega.rows() < 1 || omega.rows() != omega.cols()) {
    throw ThetaError("theta: omega must be a non-empty square matrix");
  }
  if (!(eps > 0.0 && eps <= kMaxThetaEps)) {
    throw ThetaError("theta: eps must lie in (0, 1e-3], got " + std::to_string(eps));
  }
  if (!omega.allFinite()) {
    throw ThetaError("theta: omega has non-finite entries");
  }
  omega_ = 0.5 * (omega + omega.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(omega_);
  if (llt.info() != Eigen::Success) {
    throw ThetaError("theta: omega is not positive definite");
  }
  upper_ = llt.matrixU();
  lambda_min_ = min_eigenvalue(omega_);
  if (!(lambda_min_ > 0.0)) {
    throw ThetaError("theta: omega is not positive definite (smallest eigenvalue " +
                     std::to_string(lambda_min_) + ")");
  }

  const Eigen::Index d = omega_.rows();
  const Eigen::VectorXd half_width =
      llt.solve(Eigen::MatrixXd::Identity(d, d)).diagonal().cwiseMax(0.0).cwiseSqrt();
  // The retained sum is at least the term at the rounded center, which lies
  // within omega_gap of the continuous peak.
  const double omega_gap = 0.125 * omega_.cwiseAbs().sum();
  const double target = std::log(eps) - omega_gap;

  const double max_radius = radius_cap / half_width.maxCoeff();
  double r = 0.0;
  while (log_tail_bound(r, half_width) > target) {
    r += 0.125;
    if (r > max_radius) {
      throw ThetaError("theta: tolerance " + std::to_string(eps) +
                       " unreachable within lattice radius cap " + std::to_string(radius_cap) +
                       " (smallest eigenvalue " + std::to_string(lambda_min_) + ")");
    }
  }
  radius_ = r;
}

ThetaSum::Center ThetaSum::center(const Eigen::VectorXd& z) const {
  const Eigen::Index d = omega_.rows();
  if (z.size() != d) {
    throw ThetaError("theta: z has " + std::to_string(z.size()) + " entries, omega is " +
                     std::to_string(d) + "x" + std::to_string(d));
  }
  if (!z.allFinite()) throw ThetaError("theta: z has non-finite entries");
  Center c;
  if (lattice_ == Lattice::Full) {
    Eigen::VectorXd y = upper_.transpose().triangularView<Eigen::Lower>().solve(z);
    c.x = upper_.triangularView<Eigen::Upper>().solve(y);
    c.grad = Eigen::VectorXd::Zero(d);
    c.log_peak = 0.5 * y.squaredNorm();
    return c;
  }

  // Orthant-constrained maximizer of -1/2 x'omega x + z'x: the best feasible
  // stationary point over all free/active splits.
  if (d > 20) {
    throw ThetaError("theta: nonnegative lattice supports at most 20 hidden units");
  }
  c.x = Eigen::VectorXd::Zero(d);
  c.log_peak = 0.0;
  const unsigned long subsets = 1UL << d;
  std::vector<Eigen::Index> free;
  for (unsigned long mask = 1; mask < subsets; ++mask) {
    free.clear();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (mask & (1UL << i)) free.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sub(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs(a) = z(free[a]);
      for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = omega_(free[a], free[b]);
    }
    Eigen::VectorXd xs = sub.llt().solve(rhs);
    if ((xs.array() < 0.0).any()) continue;
    const double value = 0.5 * rhs.dot(xs);
    if (value > c.log_peak) {
      c.log_peak = value;
      c.x.setZero();
      for (Eigen::Index a = 0; a < k; ++a) c.x(free[a]) = xs(a);
    }
  }
  c.grad = z - omega_ * c.x;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (c.x(i) > 0.0) c.grad(i) = 0.0;
    else c.grad(i) = std::min(c.grad(i), 0.0);
  }
  c.log_peak = -0.5 * c.x.dot(omega_ * c.x) + z.dot(c.x);
  return c;
}

// Visits lattice points with (n - c)'omega(n - c) <= R^2, last coordinate
// outermost, each coordinate ascending. visit(n, log_term - log_peak).
template <class Visit>
void ThetaSum::enumerate(const Center& c, Visit&& visit) const {
  const Eigen::Index d = omega_.rows();
  const double radius_sq = radius_ * radius_;
  Eigen::VectorXi n(d);
  Eigen::VectorXd offset(d);  // n - x
  Eigen::VectorXd remaining(d + 1);
  remaining(d) = radius_sq;
  const bool nonneg = lattice_ == Lattice::NonNeg;

  auto recurse = [&](auto&& self, Eigen::Index k) -> void {
    double shift = 0.0;
    for (Eigen::Index j = k + 1; j < d; ++j) shift += upper_(k, j) * offset(j);
    const double ukk = upper_(k, k);
    const double mid = c.x(k) - shift / ukk;
    const double half = std::sqrt(std::max(remaining(k + 1), 0.0)) / ukk;
    double lo = std::ceil(mid - half);
    const double hi = std::floor(mid + half);
    if (nonneg) lo = std::max(lo, 0.0);
    for (double v = lo; v <= hi; v += 1.0) {
      n(k) = static_cast<int>(v);
      offset(k) = v - c.x(k);
      const double u = ukk * (v - mid);
      remaining(k) = remaining(k + 1) - u * u;
      if (remaining(k) < 0.0) continue;
      if (k == 0) {
        const double q = radius_sq - remaining(0);
        visit(n, c.grad.dot(offset) - 0.5 * q);
      } else {
        self(self, k - 1);
      }
    }
  };
  recurse(recurse, d - 1);
}

double ThetaSum::log_value(const Eigen::VectorXd& z) const {
  const Center c = center(z);
  LogSum sum;
  enumerate(c, [&](const Eigen::VectorXi&, double rel) { sum.add(rel); });
  if (sum.anchor == kNegInf) {
    throw ThetaError("theta: truncation region contains no lattice points");
  }
  return c.log_peak + sum.value();
}

std::vector<LatticeTerm> ThetaSum::terms(const Eigen::VectorXd& z) const {
  const Center c = center(z);
  std::vector<LatticeTerm> out;
  enumerate(c, [&](const Eigen::VectorXi& n, double rel) { out.push_back({n, c.log_peak + rel}); });
  return out;
}

double log_theta(const ThetaQuery& query) {
  return ThetaSum(query.omega, query.lattice, query.eps).log_value(query.z);
}

double log_theta_reference(const Eigen::VectorXd& z, const Eigen::MatrixXd& omega, Lattice lattice,
                           int radius) {
  const Eigen::Index d = omega.rows();
  if (radius < 0) throw ThetaError("theta reference: radius must be non-negative");
  if (z.size() != d || omega.cols() != d) throw ThetaError("theta reference: dimension mismatch");
  const double points = static_cast<double>(d) * std::pow(2.0 * radius + 1.0, static_cast<double>(d));
  if (points > 1e8) {
    throw ThetaError("theta reference: enumeration of " + std::to_string(points) + " exceeds cap 1e8");
  }
  const int lo = lattice == Lattice::Full ? -radius : 0;
  auto for_each = [&](auto&& fn) {
    Eigen::VectorXd n = Eigen::VectorXd::Constant(d, lo);
    while (true) {
      fn(-0.5 * n.dot(omega * n) + n.dot(z));
      Eigen::Index k = 0;
      while (k < d && n(k) == radius) {
        n(k) = lo;
        ++k;
      }
      if (k == d) break;
      n(k) += 1.0;
    }
  };
  double peak = kNegInf;
  for_each([&](double t) { peak = std::max(peak, t); });
  double sum = 0.0;
  for_each([&](double t) { sum += std::exp(t - peak); });
  return peak + std::log(sum);
}

}  // namespace rtbm
