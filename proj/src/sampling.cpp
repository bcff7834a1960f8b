#include "rtbm/sampling.hpp"

#include "rtbm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace rtbm {

HiddenDistribution hidden_distribution(const RtbmParams& params, double eps) {
  const RtbmParams p = checked(params);
  Eigen::LLT<Eigen::MatrixXd> t_llt(p.t);
  const Eigen::MatrixXd half_w = t_llt.matrixL().solve(p.w);
  const Eigen::VectorXd half_bv = t_llt.matrixL().solve(p.bv);
  const ThetaSum sum(p.q - half_w.transpose() * half_w, p.lattice, eps);
  std::vector<LatticeTerm> terms = sum.terms(p.bh - half_w.transpose() * half_bv);

  HiddenDistribution out;
  out.coverage = eps;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) peak = std::max(peak, t.log_term);
  double total = 0.0;
  for (const auto& t : terms) total += std::exp(t.log_term - peak);
  const double log_total = peak + std::log(total);
  out.points.reserve(terms.size());
  out.log_weights.reserve(terms.size());
  for (auto& t : terms) {
    out.points.push_back(std::move(t.n));
    out.log_weights.push_back(t.log_term - log_total);
  }
  return out;
}

Eigen::VectorXd component_mean(const RtbmParams& params, const Eigen::VectorXi& n) {
  return params.t.llt().solve(params.w * n.cast<double>() - params.bv);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd sample_visible(const RtbmParams& params, int count, std::uint64_t seed, double eps) {
  if (count < 1) {
    throw std::invalid_argument("sample_visible: count must be >= 1");
  }
  const RtbmParams p = checked(params);
  const HiddenDistribution hidden = hidden_distribution(p, eps);
  const int nv = p.nv();

  std::vector<double> cdf(hidden.log_weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc += std::exp(hidden.log_weights[i]);
    cdf[i] = acc;
  }
  Eigen::LLT<Eigen::MatrixXd> t_llt(p.t);
  std::vector<Eigen::VectorXd> means;
  means.reserve(hidden.points.size());
  for (const auto& n : hidden.points) means.push_back(t_llt.solve(p.w * n.cast<double>() - p.bv));
  // x = L^{-T} xi has covariance (L L')^{-1} = T^{-1}.
  const auto upper = t_llt.matrixU();

  Eigen::MatrixXd out(count, nv);
  Eigen::VectorXd xi(nv);
  for (int start = 0, block = 0; start < count; start += kSampleBlockRows, ++block) {
    std::mt19937_64 rng(splitmix64(seed + static_cast<std::uint64_t>(block)));
    std::uniform_real_distribution<double> uniform(0.0, acc);
    std::normal_distribution<double> normal;
    const int end = std::min(count, start + kSampleBlockRows);
    for (int row = start; row < end; ++row) {
      const double u = uniform(rng);
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t k = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
      for (int j = 0; j < nv; ++j) xi(j) = normal(rng);
      out.row(row) = (means[k] + upper.solve(xi)).transpose();
    }
  }
  return out;
}

double Histogram::bin_volume(std::size_t flat) const {
  if (dims == 1) return edges[0][flat + 1] - edges[0][flat];
  const std::size_t nb1 = static_cast<std::size_t>(bins(1));
  const std::size_t i = flat / nb1;
  const std::size_t j = flat % nb1;
  return (edges[0][i + 1] - edges[0][i]) * (edges[1][j + 1] - edges[1][j]);
}

Eigen::MatrixXd Histogram::centers() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(density.size()), dims);
  auto mid = [&](int dim, int i) { return 0.5 * (edges[dim][i] + edges[dim][i + 1]); };
  if (dims == 1) {
    for (int i = 0; i < bins(0); ++i) out(i, 0) = mid(0, i);
    return out;
  }
  Eigen::Index row = 0;
  for (int i = 0; i < bins(0); ++i) {
    for (int j = 0; j < bins(1); ++j, ++row) {
      out(row, 0) = mid(0, i);
      out(row, 1) = mid(1, j);
    }
  }
  return out;
}

namespace {

double quantile(std::vector<double> values, double prob) {
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  std::nth_element(values.begin(), values.begin() + hi, values.end());
  const double b = values[hi];
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

}  // namespace

Histogram make_histogram(const Eigen::MatrixXd& samples, const BinSpec& spec) {
  const int dims = static_cast<int>(samples.cols());
  if (dims != 1 && dims != 2) {
    throw std::invalid_argument("histogram: only 1 or 2 dimensions supported, got " + std::to_string(dims));
  }
  if (samples.rows() == 0) {
    throw std::invalid_argument("histogram: no samples");
  }
  if (spec.bins < 1) {
    throw std::invalid_argument("histogram: bins must be >= 1");
  }
  if (!spec.ranges.empty() && static_cast<int>(spec.ranges.size()) != dims) {
    throw std::invalid_argument("histogram: need one range per dimension");
  }

  Histogram hist;
  hist.dims = dims;
  for (int k = 0; k < dims; ++k) {
    double lo = 0.0;
    double hi = 0.0;
    if (spec.ranges.empty()) {
      std::vector<double> col(samples.col(k).data(), samples.col(k).data() + samples.rows());
      const double tail = 0.5 * (1.0 - spec.coverage);
      lo = quantile(col, tail);
      hi = quantile(std::move(col), 1.0 - tail);
    } else {
      std::tie(lo, hi) = spec.ranges[k];
    }
    if (!(hi > lo)) {
      throw std::invalid_argument("histogram: empty bin range [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
    }
    std::vector<double> e(spec.bins + 1);
    for (int i = 0; i <= spec.bins; ++i) e[i] = lo + (hi - lo) * i / spec.bins;
    e.back() = hi;
    hist.edges.push_back(std::move(e));
  }

  std::size_t total_bins = 1;
  for (int k = 0; k < dims; ++k) total_bins *= static_cast<std::size_t>(hist.bins(k));
  hist.counts.assign(total_bins, 0);

  auto locate = [&](int dim, double x) -> int {
    const auto& e = hist.edges[dim];
    if (x < e.front() || x > e.back()) return -1;
    auto it = std::upper_bound(e.begin(), e.end(), x);
    int i = static_cast<int>(it - e.begin()) - 1;
    return std::min(i, hist.bins(dim) - 1);
  };
  long inside = 0;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    const int i = locate(0, samples(r, 0));
    if (i < 0) continue;
    std::size_t flat = static_cast<std::size_t>(i);
    if (dims == 2) {
      const int j = locate(1, samples(r, 1));
      if (j < 0) continue;
      flat = flat * static_cast<std::size_t>(hist.bins(1)) + static_cast<std::size_t>(j);
    }
    ++hist.counts[flat];
    ++inside;
  }
  if (inside == 0) {
    throw std::invalid_argument("histogram: no samples inside the bin range");
  }
  hist.density.resize(total_bins);
  for (std::size_t b = 0; b < total_bins; ++b) {
    hist.density[b] = static_cast<double>(hist.counts[b]) / (static_cast<double>(inside) * hist.bin_volume(b));
  }
  return hist;
}

Histogram empirical_conditional(const Eigen::MatrixXd& samples, std::span<const int> cond_indices,
                                const Eigen::VectorXd& cond_values, const Eigen::VectorXd& windows,
                                const BinSpec& spec) {
  const auto nv = static_cast<int>(samples.cols());
  const auto k = static_cast<int>(cond_indices.size());
  if (k < 1 || k >= nv) {
    throw std::invalid_argument("empirical_conditional: need between 1 and N_v - 1 conditioned indices");
  }
  if (cond_values.size() != k) {
    throw std::invalid_argument("empirical_conditional: one value per conditioned index required");
  }
  if (windows.size() != 1 && windows.size() != k) {
    throw std::invalid_argument("empirical_conditional: give one window or one per index");
  }
  if ((windows.array() <= 0.0).any()) {
    throw std::invalid_argument("empirical_conditional: window must be > 0");
  }
  std::vector<bool> conditioned(nv, false);
  for (int idx : cond_indices) {
    if (idx < 0 || idx >= nv || conditioned[idx]) {
      throw std::invalid_argument("empirical_conditional: bad conditioned index " + std::to_string(idx));
    }
    conditioned[idx] = true;
  }
  std::vector<int> free_cols;
  for (int i = 0; i < nv; ++i) {
    if (!conditioned[i]) free_cols.push_back(i);
  }

  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    bool in = true;
    for (int c = 0; c < k && in; ++c) {
      const double w = windows.size() == 1 ? windows(0) : windows(c);
      in = std::abs(samples(r, cond_indices[c]) - cond_values(c)) <= w;
    }
    if (in) keep.push_back(r);
  }
  if (static_cast<long>(keep.size()) < kMinConditionedSamples) {
    throw std::invalid_argument("insufficient conditioned sample: " + std::to_string(keep.size()) +
                                " rows inside the window, need " + std::to_string(kMinConditionedSamples));
  }
  Eigen::MatrixXd selected(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(free_cols.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    for (std::size_t c = 0; c < free_cols.size(); ++c) selected(r, c) = samples(keep[r], free_cols[c]);
  }
  return make_histogram(selected, spec);
}

std::string histogram_to_json(const Histogram& hist) {
  nlohmann::json doc;
  doc["dims"] = hist.dims;
  doc["edges"] = hist.edges;
  doc["density"] = hist.density;
  doc["counts"] = hist.counts;
  return doc.dump(2) + "\n";
}

}  // namespace rtbm
