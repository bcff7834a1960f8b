#include "rtbm/model.hpp"

#include "rtbm/error.hpp"
#include "rtbm/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rtbm {

std::string to_string(Lattice lattice) {
  return lattice == Lattice::Full ? "full" : "nonneg";
}

Lattice lattice_from_string(const std::string& name) {
  if (name == "full") return Lattice::Full;
  if (name == "nonneg") return Lattice::NonNeg;
  throw ModelError("unknown lattice '" + name + "' (expected full or nonneg)");
}

bool RtbmParams::operator==(const RtbmParams& other) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
  };
  return lattice == other.lattice && same(t, other.t) && same(q, other.q) && same(w, other.w) &&
         same(bv, other.bv) && same(bh, other.bh);
}

bool ValidationReport::has(const std::string& rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

std::string ValidationReport::summary() const {
  if (valid) return "valid";
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i > 0) out << "; ";
    out << violations[i].rule << ": " << violations[i].message;
  }
  return out.str();
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

Eigen::MatrixXd schur_hidden(const Eigen::MatrixXd& t, const Eigen::MatrixXd& q,
                             const Eigen::MatrixXd& w) {
  Eigen::LLT<Eigen::MatrixXd> llt(t);
  // W'T^{-1}W = (L^{-1}W)'(L^{-1}W)
  Eigen::MatrixXd half = llt.matrixL().solve(w);
  return q - half.transpose() * half;
}

namespace {

double asymmetry(const Eigen::MatrixXd& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

// Cholesky must succeed and the spectrum must clear a relative floor.
bool positive_definite(const Eigen::MatrixXd& sym, double* lambda_min) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  *lambda_min = ev.minCoeff();
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  return llt.info() == Eigen::Success && *lambda_min > kEigenRelativeFloor * ev.cwiseAbs().maxCoeff();
}

std::string fmt_num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

ValidationReport validate(const RtbmParams& p) {
  ValidationReport report;
  auto fail = [&](std::string rule, std::string message, double value) {
    report.violations.push_back({std::move(rule), std::move(message), value});
  };

  const auto nv = p.t.rows();
  const auto nh = p.q.rows();
  if (nv < 1 || p.t.cols() != nv) fail("dimension", "T must be a non-empty square matrix", double(nv));
  if (nh < 1 || p.q.cols() != nh) fail("dimension", "Q must be a non-empty square matrix", double(nh));
  if (p.w.rows() != nv || p.w.cols() != nh) fail("dimension", "W must be N_v x N_h", double(p.w.rows()));
  if (p.bv.size() != nv) fail("dimension", "b_v must have N_v entries", double(p.bv.size()));
  if (p.bh.size() != nh) fail("dimension", "b_h must have N_h entries", double(p.bh.size()));
  if (!report.violations.empty()) {
    report.valid = false;
    return report;
  }

  const bool finite = p.t.allFinite() && p.q.allFinite() && p.w.allFinite() && p.bv.allFinite() &&
                      p.bh.allFinite();
  if (!finite) {
    fail("finite", "parameters contain non-finite entries", 0.0);
    report.valid = false;
    return report;
  }

  bool t_ok = true;
  bool q_ok = true;
  if (double a = asymmetry(p.t); a > kSymmetryTolerance) {
    fail("T_symmetric", "T not symmetric (max |T - T'| = " + fmt_num(a) + ")", a);
    t_ok = false;
  }
  if (double a = asymmetry(p.q); a > kSymmetryTolerance) {
    fail("Q_symmetric", "Q not symmetric (max |Q - Q'| = " + fmt_num(a) + ")", a);
    q_ok = false;
  }

  const Eigen::MatrixXd t = 0.5 * (p.t + p.t.transpose());
  const Eigen::MatrixXd q = 0.5 * (p.q + p.q.transpose());
  double lambda = 0.0;
  if (!positive_definite(t, &lambda)) {
    fail("T_pd", "T not positive definite (smallest eigenvalue " + fmt_num(lambda) + ")", lambda);
    t_ok = false;
  }
  if (!positive_definite(q, &lambda)) {
    fail("Q_pd", "Q not positive definite (smallest eigenvalue " + fmt_num(lambda) + ")", lambda);
    q_ok = false;
  }
  if (t_ok && q_ok) {
    Eigen::MatrixXd s = schur_hidden(t, q, p.w);
    s = 0.5 * (s + s.transpose());
    if (!positive_definite(s, &lambda)) {
      fail("schur_pd",
           "Q - W'T^-1 W not positive definite (smallest eigenvalue " + fmt_num(lambda) + ")", lambda);
    }
  }
  report.valid = report.violations.empty();
  return report;
}

RtbmParams checked(const RtbmParams& params) {
  ValidationReport report = validate(params);
  if (!report.valid) {
    throw ModelError("invalid RTBM parameters: " + report.summary());
  }
  RtbmParams out = params;
  out.t = 0.5 * (params.t + params.t.transpose());
  out.q = 0.5 * (params.q + params.q.transpose());
  return out;
}

Eigen::MatrixXd BlockDecomposition::t() const {
  Eigen::MatrixXd out(m + n, m + n);
  out.topLeftCorner(m, m) = t0_bar;
  out.topRightCorner(m, n) = t1_bar.transpose();
  out.bottomLeftCorner(n, m) = t1_bar;
  out.bottomRightCorner(n, n) = t_tilde;
  return out;
}

Eigen::MatrixXd BlockDecomposition::w() const {
  Eigen::MatrixXd out(m + n, w0.cols());
  out.topRows(m) = w0;
  out.bottomRows(n) = w1;
  return out;
}

Eigen::VectorXd BlockDecomposition::bv() const {
  Eigen::VectorXd out(m + n);
  out.head(m) = bv0;
  out.tail(n) = bv1;
  return out;
}

BlockDecomposition block_split(const RtbmParams& p, int m) {
  const int nv = p.nv();
  if (m < 1 || m > nv) {
    throw std::invalid_argument("block_split: m = " + std::to_string(m) + " outside [1, " +
                                std::to_string(nv) + "]");
  }
  const int n = nv - m;
  BlockDecomposition b;
  b.m = m;
  b.n = n;
  b.t0_bar = p.t.topLeftCorner(m, m);
  b.t1_bar = p.t.bottomLeftCorner(n, m);
  b.t_tilde = p.t.bottomRightCorner(n, n);
  b.w0 = p.w.topRows(m);
  b.w1 = p.w.bottomRows(n);
  b.bv0 = p.bv.head(m);
  b.bv1 = p.bv.tail(n);
  return b;
}

RtbmParams permute(const RtbmParams& p, std::span<const int> perm) {
  const int nv = p.nv();
  if (static_cast<int>(perm.size()) != nv) {
    throw std::invalid_argument("permute: permutation has " + std::to_string(perm.size()) +
                                " entries, model has " + std::to_string(nv));
  }
  std::vector<bool> seen(nv, false);
  for (int idx : perm) {
    if (idx < 0 || idx >= nv || seen[idx]) {
      throw std::invalid_argument("permute: not a bijection on visible indices");
    }
    seen[idx] = true;
  }
  RtbmParams out = p;
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < nv; ++j) out.t(i, j) = p.t(perm[i], perm[j]);
    out.w.row(i) = p.w.row(perm[i]);
    out.bv(i) = p.bv(perm[i]);
  }
  return out;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ModelError(std::string("model field '") + name + "' must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelError(std::string("model field '") + name + "' row " + std::to_string(i) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (Eigen::Index k = 0; k < cols; ++k) a(i, k) = row[k].get<double>();
  }
  return a;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw ModelError(std::string("model field '") + name + "' must have " + std::to_string(size) + " entries");
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

std::string to_json_text(const RtbmParams& p) {
  json doc;
  doc["nv"] = p.nv();
  doc["nh"] = p.nh();
  doc["lattice"] = to_string(p.lattice);
  doc["T"] = matrix_to_json(p.t);
  doc["Q"] = matrix_to_json(p.q);
  doc["W"] = matrix_to_json(p.w);
  doc["bv"] = vector_to_json(p.bv);
  doc["bh"] = vector_to_json(p.bh);
  return doc.dump(2) + "\n";
}

RtbmParams from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    for (const char* key : {"nv", "nh", "T", "Q", "W", "bv", "bh"}) {
      if (!doc.contains(key)) throw ModelError(std::string("model file missing field '") + key + "'");
    }
    const int nv = doc.at("nv").get<int>();
    const int nh = doc.at("nh").get<int>();
    if (nv < 1 || nh < 1) throw ModelError("model file: nv and nh must be positive");
    RtbmParams p;
    p.lattice = lattice_from_string(doc.value("lattice", std::string("full")));
    p.t = matrix_from_json(doc["T"], nv, nv, "T");
    p.q = matrix_from_json(doc["Q"], nh, nh, "Q");
    p.w = matrix_from_json(doc["W"], nv, nh, "W");
    p.bv = vector_from_json(doc["bv"], nv, "bv");
    p.bh = vector_from_json(doc["bh"], nh, "bh");
    return p;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const RtbmParams& params, const std::filesystem::path& path) {
  io::write_atomic(path, to_json_text(params));
}

RtbmParams load_model(const std::filesystem::path& path) {
  return from_json_text(io::read_text(path));
}

}  // namespace rtbm
