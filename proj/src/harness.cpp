#include "dbmc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "dbmc/cv.hpp"
#include "dbmc/error.hpp"
#include "dbmc/noise.hpp"

namespace dbmc {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Seed for one (theta index, arm) pair; macro seeds are derived from it.
std::uint64_t arm_seed(std::uint64_t seed, std::size_t theta_index, std::uint64_t arm) {
  return mix_seed(mix_seed(seed, theta_index), arm);
}

constexpr std::uint64_t kCrudeArm = 0;
constexpr std::uint64_t kSharedI1Arm = 1;
constexpr std::uint64_t kFirstEstimatorArm = 2;

// Shortest text that parses back to the same double.
std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

MacroMicroStats macro_micro_variance(const MacroEstimateFn& estimate_fn, std::size_t n_macro,
                                     std::size_t n_micro, std::uint64_t base_seed) {
  if (n_macro < 2) throw Error(ErrorCode::invalid_argument, "n_macro must be at least 2");
  MacroMicroStats stats;
  stats.macro_estimates.reserve(n_macro);
  stats.macro_variances.reserve(n_macro);
  for (std::size_t m = 0; m < n_macro; ++m) {
    ControlledEstimate est;
    try {
      est = estimate_fn(m, mix_seed(base_seed, m), n_micro);
    } catch (const Error& e) {
      throw e.with_context("macro " + std::to_string(m));
    }
    stats.macro_estimates.push_back(est.estimate);
    stats.macro_variances.push_back(est.sample_variance);
  }
  stats.mean = mean_of(stats.macro_estimates);
  stats.variance = mean_of(stats.macro_variances);
  stats.variance_of_variance = variance_of(stats.macro_variances);
  stats.variance_of_means = variance_of(stats.macro_estimates);
  return stats;
}

void SweepConfig::validate(std::size_t k) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  if (theta_grid.empty()) fail("sweep.theta_grid must not be empty");
  if (estimators.empty()) fail("sweep.estimators must not be empty");
  if (n_macro < 2) fail("sweep.n_macro must be at least 2");
  for (const auto& e : estimators) {
    if (e.label.empty()) fail("estimator labels must not be empty");
    if (e.scheme == Scheme::crude) {
      if (n_micro < 2) fail("sweep.n_micro must be at least 2");
      continue;
    }
    if (e.controls.empty()) fail("estimator '" + e.label + "' selects no controls");
    for (std::size_t i : e.controls)
      if (i >= k) fail("estimator '" + e.label + "' refers to a control the database lacks");
    if (n_micro < e.controls.size() + 2)
      fail("sweep.n_micro must be at least k + 2 for estimator '" + e.label + "'");
  }
}

const VrrRow* VrrReport::find(const std::string& estimator, double theta) const {
  for (const auto& row : rows)
    if (row.estimator == estimator && std::fabs(row.theta - theta) < 1e-12) return &row;
  return nullptr;
}

VrrReport vrr_sweep(const SweepConfig& cfg, const Database& db) {
  cfg.validate(db.k());

  // Per-macro databases are built on first use and shared across the grid.
  std::vector<std::unique_ptr<Database>> rebuilt(cfg.n_macro);
  auto database_for = [&](std::size_t macro) -> const Database& {
    if (!cfg.rebuild_per_macro) return db;
    if (!rebuilt[macro])
      rebuilt[macro] = std::make_unique<Database>(
          build_database(db.model, db.nominals, db.observable, db.n_paths,
                         mix_seed(db.master_seed, macro + 1), cfg.workers));
    return *rebuilt[macro];
  };

  VrrReport report;
  for (std::size_t t = 0; t < cfg.theta_grid.size(); ++t) {
    const double theta = cfg.theta_grid[t];

    std::optional<MacroMicroStats> crude;
    std::string crude_error;
    try {
      crude = macro_micro_variance(
          [&](std::size_t, std::uint64_t seed, std::size_t n) {
            return estimate_crude(db.model, db.observable, theta, n, seed, cfg.workers);
          },
          cfg.n_macro, cfg.n_micro, arm_seed(cfg.seed, t, kCrudeArm));
    } catch (const Error& e) {
      crude_error = std::string("crude baseline: ") + e.what();
    }

    // Re-simulated I1 samples, one set per macro, shared by all I1 estimators.
    std::map<std::size_t, I1Samples> i1_cache;

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      const EstimatorSpec& spec = cfg.estimators[e];
      VrrRow row;
      row.estimator = spec.label;
      row.theta = theta;
      row.n_micro = cfg.n_micro;
      row.n_macro = cfg.n_macro;
      row.vrr = row.vrr_stderr = row.mean = row.cv_var = std::numeric_limits<double>::quiet_NaN();
      row.crude_var = crude ? crude->variance : std::numeric_limits<double>::quiet_NaN();
      if (!crude) {
        row.error = crude_error;
        report.rows.push_back(row);
        continue;
      }

      CvOptions options;
      options.controls = spec.controls;
      options.workers = cfg.workers;

      MacroEstimateFn fn;
      std::uint64_t base = arm_seed(cfg.seed, t, kFirstEstimatorArm + e);
      switch (spec.scheme) {
        case Scheme::crude:
          fn = [&](std::size_t, std::uint64_t seed, std::size_t n) {
            return estimate_crude(db.model, db.observable, theta, n, seed, cfg.workers);
          };
          break;
        case Scheme::i1:
          base = arm_seed(cfg.seed, t, kSharedI1Arm);
          fn = [&](std::size_t macro, std::uint64_t seed, std::size_t n) {
            const Database& source = database_for(macro);
            auto it = i1_cache.find(macro);
            if (it == i1_cache.end())
              it = i1_cache.emplace(macro, resimulate_i1(source, theta, n, seed, cfg.workers))
                       .first;
            return controlled_from_i1(source, theta, it->second, options);
          };
          break;
        case Scheme::i2:
          fn = [&](std::size_t macro, std::uint64_t seed, std::size_t n) {
            const Database& source = database_for(macro);
            return estimate_cv_i2(source.model, source.observable, theta, source.nominals,
                                  source.means, n, seed, options);
          };
          break;
      }

      try {
        const MacroMicroStats controlled =
            macro_micro_variance(fn, cfg.n_macro, cfg.n_micro, base);
        row.mean = controlled.mean;
        row.cv_var = controlled.variance;
        row.vrr = empirical_vrr(crude->variance, controlled.variance);
        std::vector<double> per_macro;
        for (std::size_t m = 0; m < cfg.n_macro; ++m)
          per_macro.push_back(
              empirical_vrr(crude->macro_variances[m], controlled.macro_variances[m]));
        row.vrr_stderr = std::sqrt(variance_of(per_macro));
      } catch (const Error& err) {
        row.error = err.what();
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_vrr_csv(const VrrReport& report, std::ostream& out) {
  out << "estimator,theta,vrr,vrr_stderr,mean,crude_var,cv_var,n_micro,n_macro\n";
  for (const auto& r : report.rows) {
    out << r.estimator << ',' << format_number(r.theta) << ',' << format_number(r.vrr) << ','
        << format_number(r.vrr_stderr) << ',' << format_number(r.mean) << ','
        << format_number(r.crude_var) << ',' << format_number(r.cv_var) << ',' << r.n_micro
        << ',' << r.n_macro << '\n';
  }
}

void write_vrr_csv(const VrrReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  write_vrr_csv(report, out);
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

VrrReport read_vrr_csv(std::istream& in) {
  VrrReport report;
  std::string line;
  if (!std::getline(in, line) ||
      line != "estimator,theta,vrr,vrr_stderr,mean,crude_var,cv_var,n_micro,n_macro")
    throw Error(ErrorCode::format, "unexpected VRR CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw Error(ErrorCode::format, "VRR CSV row has the wrong arity");
    try {
      VrrRow r;
      r.estimator = cells[0];
      r.theta = std::stod(cells[1]);
      r.vrr = std::stod(cells[2]);
      r.vrr_stderr = std::stod(cells[3]);
      r.mean = std::stod(cells[4]);
      r.crude_var = std::stod(cells[5]);
      r.cv_var = std::stod(cells[6]);
      r.n_micro = std::stoull(cells[7]);
      r.n_macro = std::stoull(cells[8]);
      report.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::format, "malformed number in VRR CSV row: " + line);
    }
  }
  return report;
}

void write_plot_table(const VrrReport& report, std::ostream& out) {
  std::vector<std::string> labels;
  std::vector<double> thetas;
  for (const auto& r : report.rows) {
    if (std::find(labels.begin(), labels.end(), r.estimator) == labels.end())
      labels.push_back(r.estimator);
    bool seen = false;
    for (double t : thetas) seen = seen || std::fabs(t - r.theta) < 1e-12;
    if (!seen) thetas.push_back(r.theta);
  }
  out << "# theta";
  for (const auto& l : labels) out << ' ' << l;
  out << '\n';
  for (double t : thetas) {
    out << format_number(t);
    for (const auto& l : labels) {
      const VrrRow* row = report.find(l, t);
      out << ' ' << format_number(row ? row->vrr : std::numeric_limits<double>::quiet_NaN());
    }
    out << '\n';
  }
}

void write_plot_table(const VrrReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  write_plot_table(report, out);
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

double gaussian_r_squared(const std::vector<double>& rho_xy,
                          const std::vector<std::vector<double>>& corr_x) {
  const auto k = static_cast<Eigen::Index>(rho_xy.size());
  Eigen::MatrixXd sigma(k, k);
  Eigen::VectorXd c(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    c[i] = rho_xy[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      sigma(i, j) = corr_x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return c.dot(sigma.ldlt().solve(c));
}

namespace {

// n draws of (X_1..X_k, Y) with unit variances, zero means and the given
// correlations; columns 0..k-1 are X, column k is Y.
Eigen::MatrixXd correlated_gaussians(std::size_t n, const std::vector<double>& rho_xy,
                                     const std::vector<std::vector<double>>& corr_x,
                                     std::uint64_t seed) {
  const auto k = static_cast<Eigen::Index>(rho_xy.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(k + 1, k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    cov(i, k) = cov(k, i) = rho_xy[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      cov(i, j) = corr_x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const Eigen::MatrixXd lower = cov.llt().matrixL();
  NoiseStream normals(seed, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), k + 1);
  Eigen::VectorXd z(k + 1);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c <= k; ++c) z[c] = normals.next();
    out.row(r) = (lower * z).transpose();
  }
  return out;
}

// Crude arm and controlled arm drawn independently, n each, known means 0.
double synthetic_vrr(std::size_t n, const std::vector<double>& rho_xy,
                     const std::vector<std::vector<double>>& corr_x, std::uint64_t seed) {
  const auto k = static_cast<Eigen::Index>(rho_xy.size());
  const Eigen::MatrixXd crude = correlated_gaussians(n, rho_xy, corr_x, mix_seed(seed, 1));
  const Eigen::MatrixXd controlled = correlated_gaussians(n, rho_xy, corr_x, mix_seed(seed, 2));
  CvSamples s;
  s.y = controlled.col(k);
  s.x = controlled.leftCols(k);
  s.mu = Eigen::VectorXd::Zero(k);
  const BetaSolution beta = optimal_beta(s);
  const double var_cv = controlled_mean(s, beta.beta).variance;
  const double var_crude = sample_moments(crude.col(k)).variance;
  return empirical_vrr(var_crude, var_cv);
}

// Ordinary least squares of Y on (1, X1, X2) from raw sums, 2x2 system solved
// by Cramer's rule; returns Var(Y) / Var(residual).
double brute_force_two_control_vrr(const Eigen::MatrixXd& data) {
  const double n = static_cast<double>(data.rows());
  double s1 = 0, s2 = 0, sy = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    s1 += data(r, 0);
    s2 += data(r, 1);
    sy += data(r, 2);
  }
  const double m1 = s1 / n, m2 = s2 / n, my = sy / n;
  double c11 = 0, c22 = 0, c12 = 0, c1y = 0, c2y = 0, cyy = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double a = data(r, 0) - m1, b = data(r, 1) - m2, y = data(r, 2) - my;
    c11 += a * a;
    c22 += b * b;
    c12 += a * b;
    c1y += a * y;
    c2y += b * y;
    cyy += y * y;
  }
  const double det = c11 * c22 - c12 * c12;
  const double b1 = (c1y * c22 - c12 * c2y) / det;
  const double b2 = (c11 * c2y - c12 * c1y) / det;
  double rss = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double resid = (data(r, 2) - my) - b1 * (data(r, 0) - m1) - b2 * (data(r, 1) - m2);
    rss += resid * resid;
  }
  return cyy / rss;
}

OracleCheck relative_check(std::string name, double value, double expected, double tolerance) {
  OracleCheck c;
  c.name = std::move(name);
  c.value = value;
  c.expected = expected;
  c.tolerance = tolerance;
  c.passed = std::fabs(value - expected) <= tolerance * std::fabs(expected);
  std::ostringstream d;
  d << "relative delta " << std::fabs(value - expected) / std::fabs(expected);
  c.detail = d.str();
  return c;
}

}  // namespace

std::vector<OracleCheck> gaussian_oracle_suite(std::uint64_t seed) {
  std::vector<OracleCheck> checks;
  constexpr std::size_t kArm = 100'000;
  const std::vector<std::vector<double>> one_control{{1.0}};

  auto guarded = [&](const std::string& name, auto&& run) {
    try {
      checks.push_back(run());
    } catch (const std::exception& e) {
      OracleCheck c;
      c.name = name;
      c.detail = e.what();
      checks.push_back(c);
    }
  };

  guarded("rho=0 single control, VRR in [0.9, 1.1]", [&] {
    return relative_check("rho=0 single control, VRR in [0.9, 1.1]",
                          synthetic_vrr(kArm, {0.0}, one_control, mix_seed(seed, 10)), 1.0, 0.1);
  });
  guarded("rho=0.9 single control vs (1-0.81)^-1", [&] {
    return relative_check("rho=0.9 single control vs (1-0.81)^-1",
                          synthetic_vrr(kArm, {0.9}, one_control, mix_seed(seed, 11)),
                          theoretical_vrr(0.81), 0.1);
  });

  const std::vector<double> rho2{0.8, 0.6};
  const std::vector<std::vector<double>> corr2{{1.0, 0.5}, {0.5, 1.0}};
  guarded("two controls: closed form vs 1e6-sample regression", [&] {
    const double closed = theoretical_vrr(gaussian_r_squared(rho2, corr2));
    const Eigen::MatrixXd data = correlated_gaussians(1'000'000, rho2, corr2, mix_seed(seed, 12));
    return relative_check("two controls: closed form vs 1e6-sample regression", closed,
                          brute_force_two_control_vrr(data), 0.05);
  });
  guarded("two controls: empirical CV VRR vs closed form", [&] {
    return relative_check("two controls: empirical CV VRR vs closed form",
                          synthetic_vrr(kArm, rho2, corr2, mix_seed(seed, 13)),
                          theoretical_vrr(gaussian_r_squared(rho2, corr2)), 0.1);
  });
  return checks;
}

std::vector<OracleCheck> validation_suite(std::uint64_t seed,
                                          const std::optional<std::filesystem::path>& database_path,
                                          unsigned workers) {
  std::vector<OracleCheck> checks = gaussian_oracle_suite(seed);

  auto flag = [&](std::string name, auto&& run) {
    OracleCheck c;
    c.name = std::move(name);
    try {
      c.detail = run();
      c.passed = c.detail.empty();
      if (c.passed) c.detail = "ok";
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    checks.push_back(c);
  };

  const LatticeModel tiny = LatticeModel::with_size(8, 50);
  const std::vector<double> nominals{1.2, 1.35};
  const std::uint64_t db_seed = mix_seed(seed, 20);

  flag("database rebuild is byte-identical across worker counts", [&]() -> std::string {
    const Database a = build_database(tiny, nominals, Observable::spacetime, 64, db_seed, 1);
    const Database b = build_database(tiny, nominals, Observable::spacetime, 64, db_seed,
                                      std::max(2u, workers));
    return serialize_database(a) == serialize_database(b) ? "" : "serialized bytes differ";
  });
  flag("database save/load roundtrip", [&]() -> std::string {
    const Database a = build_database(tiny, nominals, Observable::point, 16, db_seed, workers);
    return deserialize_database(serialize_database(a)) == a ? "" : "loaded database differs";
  });
  flag("I1 re-simulation reproduces stored controls bitwise", [&]() -> std::string {
    const Database db = build_database(tiny, nominals, Observable::spacetime, 32, db_seed, workers);
    const I1Samples s = resimulate_i1(db, nominals[0], 64, mix_seed(seed, 21), workers);
    for (std::size_t j = 0; j < s.y.size(); ++j)
      if (s.y[j] != db.control(s.indices[j], 0))
        return "mismatch at database path " + std::to_string(s.indices[j]);
    return "";
  });
  if (database_path) {
    flag("database file '" + database_path->string() + "' loads", [&]() -> std::string {
      const Database db = load_database(*database_path);
      const std::vector<double> means = column_means(db.controls, db.n_paths, db.k());
      for (std::size_t i = 0; i < db.k(); ++i)
        if (std::fabs(means[i] - db.means[i]) > 1e-12 * std::max(1.0, std::fabs(means[i])))
          return "stored mean " + std::to_string(i) + " does not match its column";
      return "";
    });
  }
  return checks;
}

}  // namespace dbmc
