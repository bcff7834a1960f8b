#pragma once

#include "rtbm/oracle.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rtbm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

/// Prefix for environment overrides of --theta-eps, --seed, --restarts and
/// --max-evals (RTBM_THETA_EPS, RTBM_SEED, RTBM_RESTARTS, RTBM_MAX_EVALS).
inline constexpr const char* kEnvPrefix = "RTBM_";

/// Per-dimension `lo:hi:nodes`, comma separated: "-5:5:101,-3:3:61".
using GridSpec = std::vector<GridAxis>;
GridSpec parse_grid(const std::string& text);

/// `idx=value[,idx=value...]` with zero-based indices.
std::pair<std::vector<int>, Eigen::VectorXd> parse_assignments(const std::string& text);

/// Mean of squared differences between two aligned density vectors.
double conditional_mse(std::span<const double> reference, std::span<const double> candidate);

/// Runs one command line (args exclude the program name). Exit codes: 0 on
/// success, 1 on invalid models or data, 2 on usage errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtbm::cli
