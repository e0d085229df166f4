// dbmc: command-line front end over the C API.
//
//   dbmc build-db  [--preset desk] [--config run.ini] [--set key=value]...
//   dbmc estimate  --theta 1.225 --scheme i1 [--samples 256] [--seed 7] [--json]
//   dbmc sweep     [--db file] [--output vrr.csv]
//   dbmc validate  [--seed 1] [--db file]
//   dbmc info      file
//
// Exit codes: 0 ok, 1 configuration/usage error, 2 numerical blow-up,
// 3 I/O or database-format error, 4 singular covariance or degenerate
// variance, 5 internal error, 6 validation failure.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dbmc/dbmc.h"

namespace {

constexpr int kExitValidationFailed = 6;

// Shortest round-trip text for a double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int exit_code(dbmc_status status) {
  switch (status) {
    case DBMC_OK: return 0;
    case DBMC_ERR_CONFIG:
    case DBMC_ERR_INVALID_ARGUMENT: return 1;
    case DBMC_ERR_BLOWUP: return 2;
    case DBMC_ERR_IO:
    case DBMC_ERR_FORMAT:
    case DBMC_ERR_CHECKSUM: return 3;
    case DBMC_ERR_SINGULAR:
    case DBMC_ERR_UNBOUNDED:
    case DBMC_ERR_DEGENERATE: return 4;
    case DBMC_ERR_INTERNAL: return 5;
  }
  return 5;
}

// Thrown to unwind to main with a status already reported.
struct Failure {
  dbmc_status status;
};

void check(dbmc_status status, const std::string& what) {
  if (status == DBMC_OK) return;
  std::cerr << "dbmc: " << what << ": " << dbmc_status_name(status) << ": "
            << dbmc_last_error_message() << "\n";
  throw Failure{status};
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<dbmc_config, Deleter<dbmc_config, dbmc_config_destroy>>;
using DatabasePtr = std::unique_ptr<dbmc_database, Deleter<dbmc_database, dbmc_database_destroy>>;
using EstimatePtr = std::unique_ptr<dbmc_estimate, Deleter<dbmc_estimate, dbmc_estimate_destroy>>;
using ReportPtr = std::unique_ptr<dbmc_report, Deleter<dbmc_report, dbmc_report_destroy>>;
using ValidationPtr =
    std::unique_ptr<dbmc_validation, Deleter<dbmc_validation, dbmc_validation_destroy>>;

struct CommonOptions {
  std::string preset;
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--preset", opts.preset, "Built-in preset: desk or paper");
  cmd->add_option("-c,--config", opts.config_file, "INI config file");
  cmd->add_option("--set", opts.overrides, "Override a config key, e.g. model.n_steps=200");
  cmd->add_option("-j,--workers", opts.workers,
                  "Worker threads (default: $DBMC_WORKERS or all cores)");
}

void set_key(dbmc_config* config, const std::string& key, const std::string& value) {
  check(dbmc_config_set(config, key.c_str(), value.c_str()), "setting " + key);
}

ConfigPtr make_config(const CommonOptions& opts) {
  dbmc_config* raw = nullptr;
  check(dbmc_config_create(opts.preset.empty() ? nullptr : opts.preset.c_str(), &raw),
        "creating config");
  ConfigPtr config(raw);
  if (!opts.config_file.empty())
    check(dbmc_config_load_file(config.get(), opts.config_file.c_str()), "loading config");
  for (const auto& item : opts.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      std::cerr << "dbmc: --set expects key=value, got '" << item << "'\n";
      throw Failure{DBMC_ERR_CONFIG};
    }
    set_key(config.get(), item.substr(0, eq), item.substr(eq + 1));
  }
  if (opts.workers) set_key(config.get(), "run.workers", std::to_string(*opts.workers));
  return config;
}

std::string config_string(const dbmc_config* config, const char* key) {
  size_t needed = 0;
  check(dbmc_config_get(config, key, nullptr, 0, &needed), std::string("reading ") + key);
  std::string out(needed, '\0');
  check(dbmc_config_get(config, key, out.data(), out.size(), &needed), std::string("reading ") + key);
  out.resize(needed - 1);
  return out;
}

// Writes the fully resolved configuration next to an output file.
void echo_config(const dbmc_config* config, const std::string& output_path) {
  size_t needed = 0;
  check(dbmc_config_dump(config, nullptr, 0, &needed), "dumping config");
  std::string text(needed, '\0');
  check(dbmc_config_dump(config, text.data(), text.size(), &needed), "dumping config");
  text.resize(needed - 1);
  const std::string path = output_path + ".config.ini";
  std::ofstream out(path);
  out << text;
  if (!out) {
    std::cerr << "dbmc: cannot write config echo '" << path << "'\n";
    throw Failure{DBMC_ERR_IO};
  }
}

DatabasePtr load(const std::string& path) {
  dbmc_database* raw = nullptr;
  check(dbmc_database_load(path.c_str(), &raw), "loading database '" + path + "'");
  return DatabasePtr(raw);
}

dbmc_database_info info_of(const dbmc_database* db) {
  dbmc_database_info info{};
  check(dbmc_database_info_get(db, &info), "reading database header");
  return info;
}

std::vector<double> nominals_of(const dbmc_database* db) {
  std::vector<double> v(info_of(db).k);
  check(dbmc_database_nominals(db, v.data(), v.size()), "reading nominals");
  return v;
}

std::vector<double> means_of(const dbmc_database* db) {
  std::vector<double> v(info_of(db).k);
  check(dbmc_database_means(db, v.data(), v.size()), "reading means");
  return v;
}

int cmd_build_db(const CommonOptions& common, const std::optional<std::string>& output,
                 const std::optional<std::uint64_t>& seed) {
  ConfigPtr config = make_config(common);
  if (output) set_key(config.get(), "database.path", *output);
  if (seed) set_key(config.get(), "database.master_seed", std::to_string(*seed));
  check(dbmc_config_validate(config.get(), "build-db"), "invalid configuration");
  const std::string path = config_string(config.get(), "database.path");

  const auto start = std::chrono::steady_clock::now();
  dbmc_database* raw = nullptr;
  check(dbmc_database_build(config.get(), &raw), "building database");
  DatabasePtr db(raw);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check(dbmc_database_save(db.get(), path.c_str()), "saving database");
  echo_config(config.get(), path);

  const dbmc_database_info info = info_of(db.get());
  const auto nominals = nominals_of(db.get());
  const auto means = means_of(db.get());
  std::printf("database   %s\n", path.c_str());
  std::printf("N          %llu\n", static_cast<unsigned long long>(info.n_paths));
  std::printf("k          %u\n", info.k);
  for (std::size_t i = 0; i < nominals.size(); ++i)
    std::printf("mean[theta=%s]  %s\n", num(nominals[i]).c_str(), num(means[i]).c_str());
  std::printf("elapsed    %.3f s\n", elapsed);
  return 0;
}

dbmc_scheme scheme_from(const std::string& name) {
  if (name == "crude") return DBMC_SCHEME_CRUDE;
  if (name == "i1") return DBMC_SCHEME_I1;
  if (name == "i2") return DBMC_SCHEME_I2;
  std::cerr << "dbmc: unknown scheme '" << name << "' (expected crude, i1 or i2)\n";
  throw Failure{DBMC_ERR_CONFIG};
}

struct EstimateOptions {
  std::optional<double> theta;
  std::optional<std::string> scheme;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> db;
  std::optional<std::string> output;
  bool json = false;
};

nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

int cmd_estimate(const CommonOptions& common, const EstimateOptions& opts) {
  ConfigPtr config = make_config(common);
  if (opts.theta) set_key(config.get(), "estimate.theta", std::to_string(*opts.theta));
  if (opts.scheme) set_key(config.get(), "estimate.scheme", *opts.scheme);
  if (opts.samples) set_key(config.get(), "estimate.samples", std::to_string(*opts.samples));
  if (opts.seed) set_key(config.get(), "estimate.seed", std::to_string(*opts.seed));
  if (opts.db) set_key(config.get(), "database.path", *opts.db);
  check(dbmc_config_validate(config.get(), "estimate"), "invalid configuration");

  // Read back through the config so file values and flags resolve the same way.
  const double theta = std::stod(config_string(config.get(), "estimate.theta"));
  const dbmc_scheme scheme = scheme_from(config_string(config.get(), "estimate.scheme"));
  const auto samples = std::stoull(config_string(config.get(), "estimate.samples"));
  const auto seed = std::stoull(config_string(config.get(), "estimate.seed"));

  DatabasePtr db;
  if (scheme != DBMC_SCHEME_CRUDE) db = load(config_string(config.get(), "database.path"));

  dbmc_estimate* raw = nullptr;
  check(dbmc_estimate_run(config.get(), db.get(), scheme, theta, samples, seed, &raw),
        "estimating");
  EstimatePtr est(raw);
  dbmc_estimate_summary s{};
  check(dbmc_estimate_get_summary(est.get(), &s), "reading estimate");
  std::vector<double> beta(s.k);
  if (s.k) check(dbmc_estimate_beta(est.get(), beta.data(), beta.size()), "reading beta");
  for (std::size_t i = 0; i < dbmc_estimate_warning_count(est.get()); ++i)
    std::cerr << "dbmc: warning: " << dbmc_estimate_warning(est.get(), i) << "\n";

  static const char* kSchemes[] = {"crude", "i1", "i2"};
  nlohmann::json j;
  j["scheme"] = kSchemes[s.scheme];
  j["theta"] = s.theta;
  j["estimate"] = nullable(s.estimate);
  j["std_error"] = nullable(s.std_error);
  j["sample_variance"] = nullable(s.sample_variance);
  j["r_squared"] = nullable(s.r_squared);
  j["beta"] = beta;
  j["n"] = s.n;

  if (opts.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("scheme     %s\n", kSchemes[s.scheme]);
    std::printf("theta      %s\n", num(s.theta).c_str());
    std::printf("estimate   %s\n", num(s.estimate).c_str());
    std::printf("std_error  %s\n", num(s.std_error).c_str());
    std::printf("beta      ");
    for (double b : beta) std::printf(" %s", num(b).c_str());
    std::printf("\nn          %llu\n", static_cast<unsigned long long>(s.n));
  }
  if (opts.output) {
    std::ofstream out(*opts.output);
    out << j.dump(2) << "\n";
    if (!out) {
      std::cerr << "dbmc: cannot write '" << *opts.output << "'\n";
      throw Failure{DBMC_ERR_IO};
    }
    echo_config(config.get(), *opts.output);
  }
  return 0;
}

int cmd_sweep(const CommonOptions& common, const std::optional<std::string>& db_path,
              const std::optional<std::string>& output,
              const std::optional<std::string>& plot_output) {
  ConfigPtr config = make_config(common);
  if (db_path) set_key(config.get(), "database.path", *db_path);
  if (output) set_key(config.get(), "sweep.output", *output);
  if (plot_output) set_key(config.get(), "sweep.plot_output", *plot_output);
  check(dbmc_config_validate(config.get(), "sweep"), "invalid configuration");

  DatabasePtr db = load(config_string(config.get(), "database.path"));
  const auto start = std::chrono::steady_clock::now();
  dbmc_report* raw = nullptr;
  check(dbmc_sweep_run(config.get(), db.get(), &raw), "running sweep");
  ReportPtr report(raw);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string csv = config_string(config.get(), "sweep.output");
  const std::string plot = config_string(config.get(), "sweep.plot_output");
  check(dbmc_report_write_csv(report.get(), csv.c_str()), "writing CSV");
  if (!plot.empty())
    check(dbmc_report_write_plot_table(report.get(), plot.c_str()), "writing plot table");
  echo_config(config.get(), csv);

  std::printf("%-10s %8s %14s %14s\n", "estimator", "theta", "vrr", "vrr_sd");
  int failed_cells = 0;
  for (std::size_t i = 0; i < dbmc_report_row_count(report.get()); ++i) {
    dbmc_report_row row{};
    check(dbmc_report_row_get(report.get(), i, &row), "reading report");
    std::printf("%-10s %8.4g %14.6g %14.6g\n", row.estimator, row.theta, row.vrr, row.vrr_stderr);
    if (row.error[0] != '\0') {
      ++failed_cells;
      std::cerr << "dbmc: cell " << row.estimator << " at theta=" << row.theta
                << " failed: " << row.error << "\n";
    }
  }
  std::printf("csv        %s\n", csv.c_str());
  if (!plot.empty()) std::printf("plot       %s\n", plot.c_str());
  std::printf("elapsed    %.3f s\n", elapsed);
  return failed_cells ? 4 : 0;
}

int cmd_validate(const std::optional<unsigned>& workers, std::uint64_t seed,
                 const std::optional<std::string>& db_path) {
  dbmc_validation* raw = nullptr;
  unsigned w = workers.value_or(0);
  if (w == 0) {
    ConfigPtr config = make_config(CommonOptions{});
    w = static_cast<unsigned>(std::stoul(config_string(config.get(), "run.workers")));
  }
  check(dbmc_validate_run(seed, db_path ? db_path->c_str() : nullptr, w, &raw), "validating");
  ValidationPtr v(raw);
  for (std::size_t i = 0; i < dbmc_validation_count(v.get()); ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int passed = 0;
    check(dbmc_validation_get(v.get(), i, &name, &passed, &detail), "reading validation");
    std::printf("[%s] %s (%s)\n", passed ? "PASS" : "FAIL", name, detail);
  }
  return dbmc_validation_all_passed(v.get()) ? 0 : kExitValidationFailed;
}

int cmd_info(const std::string& path) {
  DatabasePtr db = load(path);
  const dbmc_database_info info = info_of(db.get());
  static const char* kObservables[] = {"?", "p1", "p2", "p3"};
  std::printf("file            %s\n", path.c_str());
  std::printf("format_version  %u\n", info.format_version);
  std::printf("generator_id    %u\n", info.generator_id);
  std::printf("observable      %s\n", kObservables[info.observable]);
  std::printf("master_seed     %llu\n", static_cast<unsigned long long>(info.master_seed));
  std::printf("n_paths         %llu\n", static_cast<unsigned long long>(info.n_paths));
  std::printf("k               %u\n", info.k);
  std::printf("lattice_size    %u\n", info.lattice_size);
  std::printf("n_steps         %u\n", info.n_steps);
  std::printf("dt              %s\n", num(info.dt).c_str());
  std::printf("dx              %s\n", num(info.dx).c_str());
  std::printf("chi             %s\n", num(info.chi).c_str());
  std::printf("diffusion       %s\n", num(info.diffusion).c_str());
  std::printf("initial         %s %s\n", info.initial_condition ? "constant" : "zero",
              num(info.initial_value).c_str());
  std::printf("point_site      %u,%u\n", info.point_row, info.point_col);
  std::printf("point_time_step %u\n", info.point_time_step);
  const auto nominals = nominals_of(db.get());
  const auto means = means_of(db.get());
  for (std::size_t i = 0; i < nominals.size(); ++i)
    std::printf("nominal[%zu]      %s  mean %s\n", i, num(nominals[i]).c_str(), num(means[i]).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Database Monte Carlo control variates for the stochastic TDGL model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dbmc_version());

  CommonOptions build_common, estimate_common, sweep_common;

  auto* build = app.add_subcommand("build-db", "Build and save a control database");
  add_common(build, build_common);
  std::optional<std::string> build_output;
  std::optional<std::uint64_t> build_seed;
  build->add_option("-o,--output", build_output, "Database file (database.path)");
  build->add_option("--seed", build_seed, "Master seed (database.master_seed)");

  auto* estimate = app.add_subcommand("estimate", "Estimate J(theta) with one scheme");
  add_common(estimate, estimate_common);
  EstimateOptions est;
  estimate->add_option("--theta", est.theta, "Target parameter");
  estimate->add_option("--scheme", est.scheme, "crude, i1 or i2")
      ->check(CLI::IsMember({"crude", "i1", "i2"}));
  estimate->add_option("-n,--samples", est.samples, "Number of samples");
  estimate->add_option("--seed", est.seed, "Resample / fresh-input seed");
  estimate->add_option("--db", est.db, "Database file (database.path)");
  estimate->add_option("-o,--output", est.output, "Also write the JSON result here");
  estimate->add_flag("--json", est.json, "Print JSON instead of text");

  auto* sweep = app.add_subcommand("sweep", "VRR sweep over a theta grid");
  add_common(sweep, sweep_common);
  std::optional<std::string> sweep_db, sweep_output, sweep_plot;
  sweep->add_option("--db", sweep_db, "Database file (database.path)");
  sweep->add_option("-o,--output", sweep_output, "CSV output (sweep.output)");
  sweep->add_option("--plot-output", sweep_plot, "Plot table output (sweep.plot_output)");

  auto* validate = app.add_subcommand("validate", "Run the built-in validation suite");
  std::uint64_t validate_seed = 1;
  std::optional<std::string> validate_db;
  std::optional<unsigned> validate_workers;
  validate->add_option("--seed", validate_seed, "Seed for the synthetic checks");
  validate->add_option("--db", validate_db, "Also check this database file");
  validate->add_option("-j,--workers", validate_workers, "Worker threads");

  auto* info = app.add_subcommand("info", "Print a database header");
  std::string info_path;
  info->add_option("database", info_path, "Database file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*build) return cmd_build_db(build_common, build_output, build_seed);
    if (*estimate) return cmd_estimate(estimate_common, est);
    if (*sweep) return cmd_sweep(sweep_common, sweep_db, sweep_output, sweep_plot);
    if (*validate) return cmd_validate(validate_workers, validate_seed, validate_db);
    if (*info) return cmd_info(info_path);
  } catch (const Failure& f) {
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "dbmc: " << e.what() << "\n";
    return 5;
  }
  return 1;
}
