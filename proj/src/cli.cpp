#include "rtbm/cli.hpp"

#include "rtbm/density.hpp"
#include "rtbm/error.hpp"
#include "rtbm/fit.hpp"
#include "rtbm/io.hpp"
#include "rtbm/model.hpp"
#include "rtbm/sampling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtbm::cli {

namespace {

using nlohmann::json;

// Malformed flag values discovered after CLI11 parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("not a number: '" + text + "'");
  }
}

int parse_int(const std::string& text) {
  const double v = parse_number(text);
  if (v != std::floor(v)) throw UsageError("not an integer: '" + text + "'");
  return static_cast<int>(v);
}

Eigen::VectorXd parse_vector(const std::string& text) {
  const auto parts = split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(i) = parse_number(parts[i]);
  return v;
}

// Rows separated by ';', entries by ','.
Eigen::MatrixXd parse_matrix(const std::string& text) {
  const auto rows = split(text, ';');
  Eigen::MatrixXd m;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::VectorXd row = parse_vector(rows[r]);
    if (r == 0) m.resize(static_cast<Eigen::Index>(rows.size()), row.size());
    if (row.size() != m.cols()) throw UsageError("ragged matrix '" + text + "'");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

std::vector<int> parse_indices(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_int(part));
  return out;
}

void emit(const std::string& path, const std::string& contents, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << contents;
  } else {
    io::write_atomic(path, contents);
  }
}

RtbmParams load_valid_model(const std::string& path) {
  RtbmParams p = load_model(path);
  const ValidationReport report = validate(p);
  if (!report.valid) throw ModelError("model '" + path + "' invalid: " + report.summary());
  return p;
}

json student_to_json(const StudentTParams& tp) {
  json doc;
  doc["mu"] = std::vector<double>(tp.mu.data(), tp.mu.data() + tp.mu.size());
  json rows = json::array();
  for (Eigen::Index i = 0; i < tp.sigma.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(tp.sigma.cols()));
    for (Eigen::Index j = 0; j < tp.sigma.cols(); ++j) row[j] = tp.sigma(i, j);
    rows.push_back(row);
  }
  doc["sigma"] = rows;
  doc["nu"] = tp.nu;
  return doc;
}

StudentTParams student_from_json(const json& doc) {
  StudentTParams tp;
  const auto mu = doc.at("mu").get<std::vector<double>>();
  const auto sigma = doc.at("sigma").get<std::vector<std::vector<double>>>();
  tp.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  tp.sigma.resize(tp.mu.size(), tp.mu.size());
  if (sigma.size() != mu.size()) throw ModelError("student file: sigma must be p x p");
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (sigma[i].size() != mu.size()) throw ModelError("student file: sigma must be p x p");
    for (std::size_t j = 0; j < sigma[i].size(); ++j) tp.sigma(i, j) = sigma[i][j];
  }
  tp.nu = doc.at("nu").get<double>();
  return tp;
}

// A density evaluable at arbitrary points, or known only on fixed nodes.
class Source {
 public:
  Source(const std::string& path, double theta_eps) : path_(path) {
    if (std::filesystem::path(path).extension() == ".csv") {
      const Eigen::MatrixXd table = io::load_csv(path);
      if (table.cols() < 3) throw Error("grid csv '" + path + "' needs coordinates, density, log-density");
      nodes_ = table.leftCols(table.cols() - 2);
      values_ = table.col(table.cols() - 2);
      return;
    }
    const std::string text = io::read_text(path);
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw Error("'" + path + "' is neither a model, a student-t file nor a grid csv");
    }
    if (doc.contains("T")) {
      model_.emplace(load_valid_model(path), theta_eps);
    } else if (doc.contains("nu")) {
      student_ = student_from_json(doc);
    } else {
      throw Error("'" + path + "' is neither a model, a student-t file nor a grid csv");
    }
  }

  bool has_nodes() const { return nodes_.size() > 0; }
  const Eigen::MatrixXd& nodes() const { return nodes_; }

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& points) const {
    Eigen::VectorXd out(points.rows());
    if (has_nodes()) {
      if (points.rows() != nodes_.rows() || points.cols() != nodes_.cols() ||
          (points - nodes_).cwiseAbs().maxCoeff() > 1e-12) {
        throw Error("grid csv '" + path_ + "' does not cover the requested points");
      }
      return values_;
    }
    const int dim = model_ ? model_->params().nv() : student_.p();
    if (points.cols() != dim) {
      throw Error("'" + path_ + "' has dimension " + std::to_string(dim) + ", points have " +
                  std::to_string(points.cols()));
    }
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const Eigen::VectorXd x = points.row(i).transpose();
      out(i) = std::exp(model_ ? model_->log_pdf(x) : student_logpdf(student_, x));
    }
    return out;
  }

 private:
  std::string path_;
  std::optional<Density> model_;
  StudentTParams student_;
  Eigen::MatrixXd nodes_;
  Eigen::VectorXd values_;
};

std::string grid_table(const Eigen::MatrixXd& points, const std::function<double(const Eigen::VectorXd&)>& log_f) {
  Eigen::MatrixXd table(points.rows(), points.cols() + 2);
  table.leftCols(points.cols()) = points;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double lp = log_f(points.row(i).transpose());
    table(i, points.cols()) = std::exp(lp);
    table(i, points.cols() + 1) = lp;
  }
  return io::to_csv(table);
}

struct StudentOptions {
  std::string params_file;
  std::string mu;
  std::string sigma;
  double nu = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--params", params_file, "Student-t JSON file {mu, sigma, nu}");
    cmd->add_option("--mu", mu, "location, comma separated");
    cmd->add_option("--sigma", sigma, "scale matrix, rows separated by ';'");
    cmd->add_option("--nu", nu, "degrees of freedom");
  }

  StudentTParams resolve() const {
    if (!params_file.empty()) return student_from_json(json::parse(io::read_text(params_file)));
    if (mu.empty() || sigma.empty() || !(nu > 0.0)) {
      throw UsageError("student-t needs --params or all of --mu, --sigma, --nu");
    }
    StudentTParams tp{parse_vector(mu), parse_matrix(sigma), nu};
    if (tp.sigma.rows() != tp.p() || tp.sigma.cols() != tp.p()) throw UsageError("--sigma must be p x p");
    return tp;
  }
};

}  // namespace

GridSpec parse_grid(const std::string& text) {
  GridSpec grid;
  for (const auto& axis : split(text, ',')) {
    const auto parts = split(axis, ':');
    if (parts.size() != 3) throw UsageError("grid axis '" + axis + "' must be lo:hi:nodes");
    GridAxis g{parse_number(parts[0]), parse_number(parts[1]), parse_int(parts[2])};
    if (!(g.lo < g.hi) || g.nodes < 2) throw UsageError("grid axis '" + axis + "' needs lo < hi, nodes >= 2");
    grid.push_back(g);
  }
  if (grid.empty()) throw UsageError("empty grid");
  return grid;
}

std::pair<std::vector<int>, Eigen::VectorXd> parse_assignments(const std::string& text) {
  std::vector<int> indices;
  std::vector<double> values;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("expected idx=value, got '" + item + "'");
    indices.push_back(parse_int(item.substr(0, eq)));
    values.push_back(parse_number(item.substr(eq + 1)));
  }
  if (indices.empty()) throw UsageError("no conditioned coordinates given");
  return {indices, Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

double conditional_mse(std::span<const double> reference, std::span<const double> candidate) {
  if (reference.size() != candidate.size()) {
    throw std::invalid_argument("conditional_mse: length mismatch (" + std::to_string(reference.size()) +
                                " vs " + std::to_string(candidate.size()) + ")");
  }
  if (reference.empty()) throw std::invalid_argument("conditional_mse: no points");
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double diff = candidate[i] - reference[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(reference.size());
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Riemann-Theta Boltzmann machine densities: fit, evaluate, condition, sample", "rtbm"};
  app.require_subcommand(1);
  const std::string env = kEnvPrefix;
  double theta_eps = kDefaultThetaEps;
  auto add_eps = [&](CLI::App* cmd) {
    cmd->add_option("--theta-eps", theta_eps, "relative truncation tolerance of theta sums")
        ->envname(env + "THETA_EPS");
  };

  // fit
  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit of an RTBM to a data CSV");
  std::string fit_data;
  std::string fit_out = "rtbm.model";
  std::string fit_trace;
  std::string fit_meta;
  std::string fit_lattice = "full";
  FitConfig fit_cfg;
  fit->add_option("--data", fit_data, "headerless CSV, one sample per row")->required();
  fit->add_option("--nh", fit_cfg.n_h, "hidden units")->capture_default_str();
  fit->add_option("--out", fit_out, "model file")->capture_default_str();
  fit->add_option("--trace", fit_trace, "trace CSV (default <out>.trace.csv)");
  fit->add_option("--meta", fit_meta, "run metadata JSON (default <out>.meta.json)");
  fit->add_option("--restarts", fit_cfg.restarts)->envname(env + "RESTARTS")->capture_default_str();
  fit->add_option("--max-evals", fit_cfg.max_evals, "per restart")->envname(env + "MAX_EVALS")->capture_default_str();
  fit->add_option("--seed", fit_cfg.seed)->envname(env + "SEED")->capture_default_str();
  fit->add_option("--sigma0", fit_cfg.sigma0)->capture_default_str();
  fit->add_option("--population", fit_cfg.population, "0 = 4 + floor(3 ln dim)")->capture_default_str();
  fit->add_option("--lattice", fit_lattice)->check(CLI::IsMember({"full", "nonneg"}))->capture_default_str();
  fit->add_flag("--standardize", fit_cfg.standardize, "fit standardized data, map parameters back");
  add_eps(fit);

  // density
  auto* dens = app.add_subcommand("density", "evaluate a model on a grid");
  std::string dens_model;
  std::string dens_grid;
  std::string dens_out;
  dens->add_option("--model", dens_model)->required();
  dens->add_option("--grid", dens_grid, "lo:hi:nodes per dimension, comma separated")->required();
  dens->add_option("--out", dens_out, "grid CSV (default stdout)");
  add_eps(dens);

  // conditional
  auto* cond = app.add_subcommand("conditional", "derive the conditional (child) model");
  std::string cond_model;
  std::string cond_on;
  std::string cond_out;
  cond->add_option("--model", cond_model)->required();
  cond->add_option("--on", cond_on, "idx=value[,idx=value...], zero-based")->required();
  cond->add_option("--out", cond_out, "child model file")->required();

  // sample
  auto* samp = app.add_subcommand("sample", "draw samples from a model");
  std::string samp_model;
  std::string samp_out;
  int samp_count = 1000;
  std::uint64_t samp_seed = 1;
  samp->add_option("--model", samp_model)->required();
  samp->add_option("--count", samp_count)->capture_default_str();
  samp->add_option("--seed", samp_seed)->envname(env + "SEED")->capture_default_str();
  samp->add_option("--out", samp_out, "CSV (default stdout)");
  add_eps(samp);

  // mse
  auto* mse = app.add_subcommand("mse", "mean squared error between two densities");
  std::string mse_ref;
  std::string mse_cand;
  std::string mse_grid;
  std::string mse_points;
  std::string mse_columns;
  std::string mse_empirical;
  std::string mse_on;
  std::string mse_hist_out;
  std::string mse_window = "0.05";
  int mse_bins = 60;
  mse->add_option("--ref", mse_ref, "reference: model, student-t JSON or grid CSV");
  mse->add_option("--cand", mse_cand, "candidate: model, student-t JSON or grid CSV")->required();
  mse->add_option("--grid", mse_grid, "evaluate on this grid");
  mse->add_option("--points", mse_points, "evaluate at rows of this CSV");
  mse->add_option("--columns", mse_columns, "columns of --points to use (default all)");
  mse->add_option("--empirical", mse_empirical, "sample CSV; reference becomes the empirical conditional");
  mse->add_option("--on", mse_on, "conditioning for --empirical: idx=value[,...]");
  mse->add_option("--window", mse_window, "half-width(s) for --empirical")->capture_default_str();
  mse->add_option("--bins", mse_bins, "bins per axis for --empirical")->capture_default_str();
  mse->add_option("--hist-out", mse_hist_out, "write the empirical histogram JSON here");
  add_eps(mse);

  // student
  auto* student = app.add_subcommand("student", "multivariate Student-t reference");
  student->require_subcommand(1);
  StudentOptions st_sample_opts;
  StudentOptions st_cond_opts;
  StudentOptions st_dens_opts;
  auto* st_sample = student->add_subcommand("sample", "draw samples");
  int st_count = 5000;
  std::uint64_t st_seed = 1;
  std::string st_sample_out;
  st_sample_opts.attach(st_sample);
  st_sample->add_option("--count", st_count)->capture_default_str();
  st_sample->add_option("--seed", st_seed)->envname(env + "SEED")->capture_default_str();
  st_sample->add_option("--out", st_sample_out, "CSV (default stdout)");
  auto* st_cond = student->add_subcommand("conditional", "analytic conditional as a student-t file");
  std::string st_on;
  std::string st_cond_out;
  st_cond_opts.attach(st_cond);
  st_cond->add_option("--on", st_on, "idx=value[,...], zero-based")->required();
  st_cond->add_option("--out", st_cond_out, "student-t JSON (default stdout)");
  auto* st_dens = student->add_subcommand("density", "evaluate on a grid");
  std::string st_grid;
  std::string st_dens_out;
  st_dens_opts.attach(st_dens);
  st_dens->add_option("--grid", st_grid)->required();
  st_dens->add_option("--out", st_dens_out, "grid CSV (default stdout)");

  // validate
  auto* val = app.add_subcommand("validate", "check a model file");
  std::string val_model;
  val->add_option("--model", val_model)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*fit) {
      fit_cfg.theta_eps = theta_eps;
      fit_cfg.lattice = lattice_from_string(fit_lattice);
      const Eigen::MatrixXd data = io::load_csv(fit_data);
      if (data.rows() == 0) throw Error("data file '" + fit_data + "' is empty");
      const auto start = std::chrono::steady_clock::now();
      const FitResult result = fit_density(data, fit_cfg);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      save_model(result.params, fit_out);
      Eigen::MatrixXd trace(static_cast<Eigen::Index>(result.trace.size()), 2);
      for (std::size_t i = 0; i < result.trace.size(); ++i) {
        trace(i, 0) = static_cast<double>(result.trace[i].evals);
        trace(i, 1) = result.trace[i].best;
      }
      io::write_atomic(fit_trace.empty() ? fit_out + ".trace.csv" : fit_trace, io::to_csv(trace));
      json meta;
      meta["seed"] = fit_cfg.seed;
      meta["rng"] = "std::mt19937_64; restart r uses splitmix64(seed + 2r) for initialization and "
                    "splitmix64(seed + 2r + 1) for CMA-ES";
      meta["config"] = {{"nh", fit_cfg.n_h},
                        {"restarts", fit_cfg.restarts},
                        {"population", fit_cfg.population},
                        {"sigma0", fit_cfg.sigma0},
                        {"max_evals", fit_cfg.max_evals},
                        {"theta_eps", fit_cfg.theta_eps},
                        {"lattice", fit_lattice},
                        {"standardize", fit_cfg.standardize}};
      meta["data"] = {{"path", fit_data}, {"rows", data.rows()}, {"cols", data.cols()}};
      meta["wall_time_s"] = wall;
      meta["nll"] = result.nll;
      meta["evals"] = result.evals;
      meta["best_restart"] = result.best_restart;
      meta["restart_objective"] = result.restart_objective;
      io::write_atomic(fit_meta.empty() ? fit_out + ".meta.json" : fit_meta, meta.dump(2) + "\n");
      out << "nll " << io::format_double(result.nll) << "\nevals " << result.evals << "\n";
      return kExitOk;
    }

    if (*dens) {
      const Density density(load_valid_model(dens_model), theta_eps);
      const GridSpec grid = parse_grid(dens_grid);
      if (static_cast<int>(grid.size()) != density.params().nv()) {
        throw UsageError("--grid has " + std::to_string(grid.size()) + " axes, model has " +
                         std::to_string(density.params().nv()) + " visible units");
      }
      emit(dens_out, grid_table(grid_points(grid), [&](const Eigen::VectorXd& v) { return density.log_pdf(v); }),
           out);
      return kExitOk;
    }

    if (*cond) {
      const RtbmParams parent = load_valid_model(cond_model);
      const auto [indices, values] = parse_assignments(cond_on);
      save_model(condition_on(parent, indices, values), cond_out);
      return kExitOk;
    }

    if (*samp) {
      if (samp_count < 1) throw UsageError("--count must be >= 1");
      emit(samp_out, io::to_csv(sample_visible(load_valid_model(samp_model), samp_count, samp_seed, theta_eps)),
           out);
      return kExitOk;
    }

    if (*mse) {
      const Source cand(mse_cand, theta_eps);
      Eigen::VectorXd reference;
      Eigen::VectorXd candidate;
      if (!mse_empirical.empty()) {
        if (mse_on.empty()) throw UsageError("--empirical needs --on");
        if (!mse_ref.empty()) throw UsageError("--empirical replaces --ref");
        const auto [indices, values] = parse_assignments(mse_on);
        BinSpec bins;
        bins.bins = mse_bins;
        const Histogram hist =
            empirical_conditional(io::load_csv(mse_empirical), indices, values, parse_vector(mse_window), bins);
        if (!mse_hist_out.empty()) io::write_atomic(mse_hist_out, histogram_to_json(hist));
        reference = Eigen::Map<const Eigen::VectorXd>(hist.density.data(),
                                                      static_cast<Eigen::Index>(hist.density.size()));
        candidate = cand.evaluate(hist.centers());
      } else {
        if (mse_ref.empty()) throw UsageError("mse needs --ref (or --empirical)");
        const Source ref(mse_ref, theta_eps);
        Eigen::MatrixXd points;
        if (!mse_grid.empty()) {
          points = grid_points(parse_grid(mse_grid));
        } else if (!mse_points.empty()) {
          const Eigen::MatrixXd table = io::load_csv(mse_points);
          if (mse_columns.empty()) {
            points = table;
          } else {
            const auto cols = parse_indices(mse_columns);
            points.resize(table.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) {
              if (cols[c] < 0 || cols[c] >= table.cols()) throw UsageError("--columns index out of range");
              points.col(static_cast<Eigen::Index>(c)) = table.col(cols[c]);
            }
          }
        } else if (ref.has_nodes()) {
          points = ref.nodes();
        } else if (cand.has_nodes()) {
          points = cand.nodes();
        } else {
          throw UsageError("mse needs --grid, --points or a grid CSV source");
        }
        reference = ref.evaluate(points);
        candidate = cand.evaluate(points);
      }
      const double value = conditional_mse(std::span<const double>(reference.data(), reference.size()),
                                            std::span<const double>(candidate.data(), candidate.size()));
      out << "mse " << io::format_double(value) << "\npoints " << reference.size() << "\n";
      return kExitOk;
    }

    if (*st_sample) {
      if (st_count < 1) throw UsageError("--count must be >= 1");
      emit(st_sample_out, io::to_csv(sample_student(st_sample_opts.resolve(), st_count, st_seed)), out);
      return kExitOk;
    }

    if (*st_cond) {
      const StudentTParams tp = st_cond_opts.resolve();
      const auto [indices, values] = parse_assignments(st_on);
      const int p = tp.p();
      std::vector<bool> taken(p, false);
      std::vector<int> order(indices.begin(), indices.end());
      for (int idx : indices) {
        if (idx < 0 || idx >= p || taken[idx]) throw UsageError("bad conditioned index " + std::to_string(idx));
        taken[idx] = true;
      }
      for (int i = 0; i < p; ++i) {
        if (!taken[i]) order.push_back(i);
      }
      StudentTParams reordered{Eigen::VectorXd(p), Eigen::MatrixXd(p, p), tp.nu};
      for (int i = 0; i < p; ++i) {
        reordered.mu(i) = tp.mu(order[i]);
        for (int j = 0; j < p; ++j) reordered.sigma(i, j) = tp.sigma(order[i], order[j]);
      }
      const ConditionalTParams c =
          student_conditional(reordered, static_cast<int>(indices.size()), values);
      emit(st_cond_out, student_to_json(c.as_student()).dump(2) + "\n", out);
      return kExitOk;
    }

    if (*st_dens) {
      const StudentTParams tp = st_dens_opts.resolve();
      const GridSpec grid = parse_grid(st_grid);
      if (static_cast<int>(grid.size()) != tp.p()) throw UsageError("--grid dimension must match the student-t");
      emit(st_dens_out, grid_table(grid_points(grid), [&](const Eigen::VectorXd& x) { return student_logpdf(tp, x); }),
           out);
      return kExitOk;
    }

    if (*val) {
      const RtbmParams p = load_model(val_model);
      const ValidationReport report = validate(p);
      out << report.summary() << "\n";
      return report.valid ? kExitOk : kExitInvalid;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

}  // namespace rtbm::cli
