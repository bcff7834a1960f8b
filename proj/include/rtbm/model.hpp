#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rtbm {

/// Hidden-state lattice the theta sums run over.
enum class Lattice {
  Full,    // Z^{N_h}
  NonNeg,  // N^{N_h}
};

std::string to_string(Lattice lattice);
Lattice lattice_from_string(const std::string& name);

/// Parameters of a Riemann-Theta Boltzmann machine.
///
/// The visible density is
///   P(v) ∝ exp(-1/2 v'Tv - b_v'v) * theta(b_h + W'v | Q)
/// with theta the lattice sum over `lattice`. Instances are plain values;
/// call validate() or checked() before handing them to numerical code.
struct RtbmParams {
  Eigen::MatrixXd t;   // N_v x N_v, symmetric PD
  Eigen::MatrixXd q;   // N_h x N_h, symmetric PD
  Eigen::MatrixXd w;   // N_v x N_h
  Eigen::VectorXd bv;  // N_v
  Eigen::VectorXd bh;  // N_h
  Lattice lattice = Lattice::Full;

  int nv() const { return static_cast<int>(t.rows()); }
  int nh() const { return static_cast<int>(q.rows()); }

  bool operator==(const RtbmParams& other) const;
};

struct Violation {
  std::string rule;
  std::string message;
  double value = 0.0;  // offending quantity (eigenvalue, asymmetry, ...)
};

struct ValidationReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(const std::string& rule) const;
  std::string summary() const;
};

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kEigenRelativeFloor = 1e-12;

/// Checks dimensions, finiteness, symmetry of T and Q, and positive
/// definiteness of T, Q and Q - W'T^{-1}W. Never throws; every failed rule is
/// listed in the report.
ValidationReport validate(const RtbmParams& params);

/// Validates and returns a copy with T and Q replaced by (A + A')/2.
/// Throws ModelError carrying the report summary on failure.
RtbmParams checked(const RtbmParams& params);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& symmetric);

/// Q - W'T^{-1}W, computed through a Cholesky factor of T.
Eigen::MatrixXd schur_hidden(const Eigen::MatrixXd& t, const Eigen::MatrixXd& q,
                             const Eigen::MatrixXd& w);

/// Split of the visible parameters into a free block y (first m
/// coordinates) and a conditioned block d (remaining n coordinates):
///
///   T = [ t0_bar   t1_bar' ]    W = [ w0 ]    b_v = [ bv0 ]
///       [ t1_bar   t_tilde ]        [ w1 ]          [ bv1 ]
struct BlockDecomposition {
  int m = 0;
  int n = 0;
  Eigen::MatrixXd t0_bar;   // m x m
  Eigen::MatrixXd t1_bar;   // n x m
  Eigen::MatrixXd t_tilde;  // n x n
  Eigen::MatrixXd w0;       // m x N_h
  Eigen::MatrixXd w1;       // n x N_h
  Eigen::VectorXd bv0;      // m
  Eigen::VectorXd bv1;      // n

  Eigen::MatrixXd t() const;
  Eigen::MatrixXd w() const;
  Eigen::VectorXd bv() const;
};

/// Requires 1 <= m <= N_v. With m == N_v the d-block is empty.
BlockDecomposition block_split(const RtbmParams& params, int m);

/// Reorders visible coordinates: new coordinate i is old coordinate perm[i]
/// (zero-based). The result satisfies P'(v[perm]) = P(v).
RtbmParams permute(const RtbmParams& params, std::span<const int> perm);

/// Structured-text (JSON) model file. Doubles round-trip bit-exactly.
std::string to_json_text(const RtbmParams& params);
RtbmParams from_json_text(const std::string& text);
void save_model(const RtbmParams& params, const std::filesystem::path& path);
RtbmParams load_model(const std::filesystem::path& path);

}  // namespace rtbm
