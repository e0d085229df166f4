#include "dbmc/dbmc.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "dbmc/config.hpp"
#include "dbmc/database.hpp"
#include "dbmc/error.hpp"
#include "dbmc/estimator.hpp"
#include "dbmc/harness.hpp"

struct dbmc_config {
  dbmc::RunConfig value;
};
struct dbmc_database {
  dbmc::Database value;
};
struct dbmc_estimate {
  dbmc::ControlledEstimate value;
};
struct dbmc_report {
  dbmc::VrrReport value;
};
struct dbmc_validation {
  std::vector<dbmc::OracleCheck> checks;
};

namespace {

thread_local std::string last_error;

dbmc_status to_status(dbmc::ErrorCode code) {
  using dbmc::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return DBMC_ERR_INVALID_ARGUMENT;
    case ErrorCode::config: return DBMC_ERR_CONFIG;
    case ErrorCode::blow_up: return DBMC_ERR_BLOWUP;
    case ErrorCode::io: return DBMC_ERR_IO;
    case ErrorCode::format: return DBMC_ERR_FORMAT;
    case ErrorCode::checksum: return DBMC_ERR_CHECKSUM;
    case ErrorCode::singular_covariance: return DBMC_ERR_SINGULAR;
    case ErrorCode::unbounded: return DBMC_ERR_UNBOUNDED;
    case ErrorCode::degenerate_variance: return DBMC_ERR_DEGENERATE;
  }
  return DBMC_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes at the C boundary.
template <typename Fn>
dbmc_status guarded(Fn&& fn) noexcept {
  try {
    last_error.clear();
    fn();
    return DBMC_OK;
  } catch (const dbmc::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DBMC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DBMC_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw dbmc::Error(dbmc::ErrorCode::invalid_argument, what);
}

void copy_out(const std::string& text, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buf) return;
  if (capacity < text.size() + 1)
    throw dbmc::Error(dbmc::ErrorCode::invalid_argument, "output buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
}

void copy_values(const std::vector<double>& values, double* out, size_t capacity) {
  require(out != nullptr, "output pointer is null");
  require(capacity >= values.size(), "output buffer too small");
  std::copy(values.begin(), values.end(), out);
}

dbmc::Command parse_command(const char* command) {
  require(command != nullptr, "command is null");
  const std::string c = command;
  if (c == "build-db") return dbmc::Command::build_db;
  if (c == "estimate") return dbmc::Command::estimate;
  if (c == "sweep") return dbmc::Command::sweep;
  if (c == "validate") return dbmc::Command::validate;
  if (c == "info") return dbmc::Command::info;
  throw dbmc::Error(dbmc::ErrorCode::invalid_argument, "unknown command '" + c + "'");
}

}  // namespace

extern "C" {

const char* dbmc_last_error_message(void) { return last_error.c_str(); }

const char* dbmc_status_name(dbmc_status status) {
  switch (status) {
    case DBMC_OK: return "ok";
    case DBMC_ERR_CONFIG: return "configuration error";
    case DBMC_ERR_BLOWUP: return "numerical blow-up";
    case DBMC_ERR_IO: return "I/O error";
    case DBMC_ERR_SINGULAR: return "singular covariance";
    case DBMC_ERR_FORMAT: return "format error";
    case DBMC_ERR_CHECKSUM: return "checksum error";
    case DBMC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DBMC_ERR_UNBOUNDED: return "unbounded";
    case DBMC_ERR_DEGENERATE: return "degenerate variance";
    case DBMC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dbmc_version(void) { return "1.0.0"; }

dbmc_status dbmc_config_create(const char* preset, dbmc_config** out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is null");
    auto config = std::make_unique<dbmc_config>();
    if (preset) config->value.apply_preset(preset);
    *out = config.release();
  });
}

void dbmc_config_destroy(dbmc_config* config) { delete config; }

dbmc_status dbmc_config_load_file(dbmc_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "null argument");
    config->value.load_file(path);
  });
}

dbmc_status dbmc_config_set(dbmc_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "null argument");
    config->value.set(key, value);
  });
}

dbmc_status dbmc_config_validate(const dbmc_config* config, const char* command) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    config->value.validate(parse_command(command));
  });
}

dbmc_status dbmc_config_dump(const dbmc_config* config, char* buf, size_t capacity,
                             size_t* needed) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    copy_out(config->value.dump(), buf, capacity, needed);
  });
}

dbmc_status dbmc_config_get(const dbmc_config* config, const char* key, char* buf,
                            size_t capacity, size_t* needed) {
  return guarded([&] {
    require(config && key, "null argument");
    boost::property_tree::ptree tree;
    std::istringstream in(config->value.dump());
    boost::property_tree::ini_parser::read_ini(in, tree);
    const auto value = tree.get_optional<std::string>(key);
    if (!value) throw dbmc::Error(dbmc::ErrorCode::config, std::string("no value for '") + key + "'");
    copy_out(*value, buf, capacity, needed);
  });
}

dbmc_status dbmc_database_build(const dbmc_config* config, dbmc_database** out) {
  return guarded([&] {
    require(config && out, "null argument");
    const dbmc::RunConfig& c = config->value;
    c.validate(dbmc::Command::build_db);
    auto db = std::make_unique<dbmc_database>();
    db->value = dbmc::build_database(c.resolved_model(), c.nominals, c.observable, c.n_paths,
                                     c.master_seed, c.workers);
    *out = db.release();
  });
}

dbmc_status dbmc_database_load(const char* path, dbmc_database** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto db = std::make_unique<dbmc_database>();
    db->value = dbmc::load_database(path);
    *out = db.release();
  });
}

dbmc_status dbmc_database_save(const dbmc_database* db, const char* path) {
  return guarded([&] {
    require(db && path, "null argument");
    dbmc::save_database(db->value, path);
  });
}

void dbmc_database_destroy(dbmc_database* db) { delete db; }

dbmc_status dbmc_database_info_get(const dbmc_database* db, dbmc_database_info* out) {
  return guarded([&] {
    require(db && out, "null argument");
    const dbmc::Database& d = db->value;
    *out = dbmc_database_info{};
    out->master_seed = d.master_seed;
    out->n_paths = d.n_paths;
    out->k = static_cast<uint32_t>(d.k());
    out->generator_id = d.generator_id;
    out->format_version = static_cast<uint8_t>(dbmc::kDatabaseFormatVersion);
    out->observable = static_cast<dbmc_observable>(d.observable);
    out->lattice_size = d.model.lattice_size;
    out->n_steps = d.model.n_steps;
    out->dt = d.model.dt;
    out->dx = d.model.dx;
    out->chi = d.model.chi;
    out->diffusion = d.model.diffusion;
    out->initial_condition = static_cast<uint8_t>(d.model.initial.kind);
    out->initial_value = d.model.initial.value;
    out->point_row = d.model.point_site.row;
    out->point_col = d.model.point_site.col;
    out->point_time_step = d.model.point_time_step;
  });
}

dbmc_status dbmc_database_nominals(const dbmc_database* db, double* out, size_t capacity) {
  return guarded([&] {
    require(db != nullptr, "database is null");
    copy_values(db->value.nominals, out, capacity);
  });
}

dbmc_status dbmc_database_means(const dbmc_database* db, double* out, size_t capacity) {
  return guarded([&] {
    require(db != nullptr, "database is null");
    copy_values(db->value.means, out, capacity);
  });
}

dbmc_status dbmc_database_control(const dbmc_database* db, uint64_t path, uint32_t i,
                                  double* out) {
  return guarded([&] {
    require(db && out, "null argument");
    require(path < db->value.n_paths && i < db->value.k(), "control index out of range");
    *out = db->value.control(path, i);
  });
}

dbmc_status dbmc_database_equal(const dbmc_database* a, const dbmc_database* b, int* equal) {
  return guarded([&] {
    require(a && b && equal, "null argument");
    *equal = dbmc::serialize_database(a->value) == dbmc::serialize_database(b->value) ? 1 : 0;
  });
}

dbmc_status dbmc_estimate_run(const dbmc_config* config, const dbmc_database* db,
                              dbmc_scheme scheme, double theta, uint64_t n, uint64_t seed,
                              dbmc_estimate** out) {
  return guarded([&] {
    require(config && out, "null argument");
    require(std::isfinite(theta), "theta must be finite");
    const dbmc::RunConfig& c = config->value;
    dbmc::CvOptions options;
    options.workers = c.workers;
    auto result = std::make_unique<dbmc_estimate>();
    switch (scheme) {
      case DBMC_SCHEME_CRUDE:
        if (db)
          result->value = dbmc::estimate_crude(db->value.model, db->value.observable, theta, n,
                                               seed, c.workers);
        else
          result->value =
              dbmc::estimate_crude(c.resolved_model(), c.observable, theta, n, seed, c.workers);
        break;
      case DBMC_SCHEME_I1:
        require(db != nullptr, "the i1 scheme needs a database");
        result->value = dbmc::estimate_cv_i1(db->value, theta, n, seed, options);
        break;
      case DBMC_SCHEME_I2:
        require(db != nullptr, "the i2 scheme needs a database");
        result->value = dbmc::estimate_cv_i2(db->value.model, db->value.observable, theta,
                                             db->value.nominals, db->value.means, n, seed,
                                             options);
        break;
      default:
        throw dbmc::Error(dbmc::ErrorCode::invalid_argument, "unknown scheme");
    }
    *out = result.release();
  });
}

void dbmc_estimate_destroy(dbmc_estimate* estimate) { delete estimate; }

dbmc_status dbmc_estimate_get_summary(const dbmc_estimate* estimate, dbmc_estimate_summary* out) {
  return guarded([&] {
    require(estimate && out, "null argument");
    const dbmc::ControlledEstimate& e = estimate->value;
    out->estimate = e.estimate;
    out->sample_variance = e.sample_variance;
    out->std_error = e.std_error;
    out->r_squared =
        e.scheme == dbmc::Scheme::crude ? std::numeric_limits<double>::quiet_NaN() : e.r_squared;
    out->theta = e.theta;
    out->n = e.n;
    out->k = static_cast<uint32_t>(e.beta.size());
    out->scheme = static_cast<dbmc_scheme>(e.scheme);
  });
}

dbmc_status dbmc_estimate_beta(const dbmc_estimate* estimate, double* out, size_t capacity) {
  return guarded([&] {
    require(estimate != nullptr, "estimate is null");
    if (estimate->value.beta.empty()) return;
    copy_values(estimate->value.beta, out, capacity);
  });
}

size_t dbmc_estimate_warning_count(const dbmc_estimate* estimate) {
  return estimate ? estimate->value.warnings.size() : 0;
}

const char* dbmc_estimate_warning(const dbmc_estimate* estimate, size_t index) {
  if (!estimate || index >= estimate->value.warnings.size()) return nullptr;
  return estimate->value.warnings[index].c_str();
}

dbmc_status dbmc_sweep_run(const dbmc_config* config, const dbmc_database* db,
                           dbmc_report** out) {
  return guarded([&] {
    require(config && db && out, "null argument");
    config->value.validate(dbmc::Command::sweep);
    auto report = std::make_unique<dbmc_report>();
    report->value = dbmc::vrr_sweep(config->value.sweep_config(db->value.nominals), db->value);
    *out = report.release();
  });
}

void dbmc_report_destroy(dbmc_report* report) { delete report; }

size_t dbmc_report_row_count(const dbmc_report* report) {
  return report ? report->value.rows.size() : 0;
}

dbmc_status dbmc_report_row_get(const dbmc_report* report, size_t index, dbmc_report_row* out) {
  return guarded([&] {
    require(report && out, "null argument");
    require(index < report->value.rows.size(), "row index out of range");
    const dbmc::VrrRow& r = report->value.rows[index];
    out->estimator = r.estimator.c_str();
    out->theta = r.theta;
    out->vrr = r.vrr;
    out->vrr_stderr = r.vrr_stderr;
    out->mean = r.mean;
    out->crude_var = r.crude_var;
    out->cv_var = r.cv_var;
    out->n_micro = r.n_micro;
    out->n_macro = r.n_macro;
    out->error = r.error.c_str();
  });
}

dbmc_status dbmc_report_write_csv(const dbmc_report* report, const char* path) {
  return guarded([&] {
    require(report && path, "null argument");
    dbmc::write_vrr_csv(report->value, std::filesystem::path(path));
  });
}

dbmc_status dbmc_report_write_plot_table(const dbmc_report* report, const char* path) {
  return guarded([&] {
    require(report && path, "null argument");
    dbmc::write_plot_table(report->value, std::filesystem::path(path));
  });
}

dbmc_status dbmc_report_read_csv(const char* path, dbmc_report** out) {
  return guarded([&] {
    require(path && out, "null argument");
    std::ifstream in(path);
    if (!in) throw dbmc::Error(dbmc::ErrorCode::io, std::string("cannot open '") + path + "'");
    auto report = std::make_unique<dbmc_report>();
    report->value = dbmc::read_vrr_csv(in);
    *out = report.release();
  });
}

dbmc_status dbmc_validate_run(uint64_t seed, const char* db_path, unsigned workers,
                              dbmc_validation** out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is null");
    auto v = std::make_unique<dbmc_validation>();
    std::optional<std::filesystem::path> path;
    if (db_path) path = db_path;
    v->checks = dbmc::validation_suite(seed, path, workers ? workers : 1);
    *out = v.release();
  });
}

void dbmc_validation_destroy(dbmc_validation* validation) { delete validation; }

size_t dbmc_validation_count(const dbmc_validation* validation) {
  return validation ? validation->checks.size() : 0;
}

dbmc_status dbmc_validation_get(const dbmc_validation* validation, size_t index,
                                const char** name, int* passed, const char** detail) {
  return guarded([&] {
    require(validation != nullptr, "validation is null");
    require(index < validation->checks.size(), "index out of range");
    const dbmc::OracleCheck& c = validation->checks[index];
    if (name) *name = c.name.c_str();
    if (passed) *passed = c.passed ? 1 : 0;
    if (detail) *detail = c.detail.c_str();
  });
}

int dbmc_validation_all_passed(const dbmc_validation* validation) {
  if (!validation) return 0;
  for (const auto& c : validation->checks)
    if (!c.passed) return 0;
  return 1;
}

}  // extern "C"
