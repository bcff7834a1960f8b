#pragma once

#include "rtbm/model.hpp"
#include "rtbm/theta.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rtbm {

/// Truncated distribution of the hidden lattice state:
///   p(n) ∝ exp(-1/2 n'(Q - W'T^{-1}W)n + (b_h - W'T^{-1}b_v)'n).
struct HiddenDistribution {
  std::vector<Eigen::VectorXi> points;
  std::vector<double> log_weights;  // log-sum-exp == 0
  double coverage = kDefaultThetaEps;
};

HiddenDistribution hidden_distribution(const RtbmParams& params, double eps = kDefaultThetaEps);

/// Mean of the Gaussian component for hidden state n: T^{-1}(W n - b_v).
Eigen::VectorXd component_mean(const RtbmParams& params, const Eigen::VectorXi& n);

/// Rows per independently seeded substream in sample_visible.
inline constexpr int kSampleBlockRows = 4096;

/// Draws `count` visible samples (count x N_v): n from the hidden
/// distribution by inverse CDF, then v | n ~ Normal(T^{-1}(W n - b_v), T^{-1}).
///
/// Generator: std::mt19937_64. Rows are produced in blocks of
/// kSampleBlockRows; block k is seeded with splitmix64(seed + k), so output
/// depends only on (seed, count) and blocks can be drawn independently.
Eigen::MatrixXd sample_visible(const RtbmParams& params, int count, std::uint64_t seed,
                               double eps = kDefaultThetaEps);

/// SplitMix64 finalizer; used to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

struct BinSpec {
  int bins = 60;
  /// Central fraction of the sample used for the default bin range.
  double coverage = 0.99;
  /// Explicit (lo, hi) per histogrammed dimension; overrides coverage.
  std::vector<std::pair<double, double>> ranges;
};

/// 1D or 2D histogram normalized as a density. Bins are flattened row-major
/// (first dimension slowest).
struct Histogram {
  int dims = 1;
  std::vector<std::vector<double>> edges;
  std::vector<double> density;
  std::vector<long> counts;

  int bins(int dim) const { return static_cast<int>(edges[dim].size()) - 1; }
  double bin_volume(std::size_t flat) const;
  /// One row per bin, one column per dimension.
  Eigen::MatrixXd centers() const;
};

/// Histogram of every column of `samples` (1 or 2 columns). Samples outside
/// the bin range are ignored.
Histogram make_histogram(const Eigen::MatrixXd& samples, const BinSpec& spec = {});

inline constexpr double kDefaultWindow = 0.05;
inline constexpr long kMinConditionedSamples = 100;

/// Keeps rows with |row[idx] - value| <= window for every conditioned index
/// and histograms the remaining coordinates (in original order). `windows`
/// holds one half-width per index, or a single shared value.
Histogram empirical_conditional(const Eigen::MatrixXd& samples, std::span<const int> cond_indices,
                                const Eigen::VectorXd& cond_values, const Eigen::VectorXd& windows,
                                const BinSpec& spec = {});

std::string histogram_to_json(const Histogram& hist);

}  // namespace rtbm
