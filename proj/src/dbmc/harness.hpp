#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dbmc/database.hpp"
#include "dbmc/estimator.hpp"

namespace dbmc {

// ---- micro-macro variance estimation ---------------------------------------

struct MacroMicroStats {
  double mean = 0.0;                  // average of the per-macro estimates
  double variance = 0.0;              // average of the per-macro sample variances
  double variance_of_variance = 0.0;  // spread of the per-macro sample variances
  double variance_of_means = 0.0;     // spread of the per-macro estimates
  std::vector<double> macro_estimates;
  std::vector<double> macro_variances;
};

// One macro replication: gets its index, a seed unique to it and n_micro.
using MacroEstimateFn =
    std::function<ControlledEstimate(std::size_t macro, std::uint64_t seed, std::size_t n_micro)>;

MacroMicroStats macro_micro_variance(const MacroEstimateFn& estimate_fn, std::size_t n_macro,
                                     std::size_t n_micro, std::uint64_t base_seed = 0);

// ---- VRR sweep ----------------------------------------------------------------

struct EstimatorSpec {
  std::string label;
  Scheme scheme = Scheme::i1;
  std::vector<std::size_t> controls;  // indices into the database nominals

  bool operator==(const EstimatorSpec&) const = default;
};

struct SweepConfig {
  std::vector<double> theta_grid;
  std::vector<EstimatorSpec> estimators;
  std::size_t n_micro = 256;
  std::size_t n_macro = 20;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  // Build a fresh database (seed derived from the macro index) for every macro
  // replication instead of sharing the given one.
  bool rebuild_per_macro = false;

  void validate(std::size_t k) const;
};

struct VrrRow {
  std::string estimator;
  double theta = 0.0;
  double vrr = 0.0;
  double vrr_stderr = 0.0;  // standard deviation of the per-macro VRRs
  double mean = 0.0;
  double crude_var = 0.0;
  double cv_var = 0.0;
  std::size_t n_micro = 0;
  std::size_t n_macro = 0;
  std::string error;  // non-empty when the cell failed

  bool ok() const { return error.empty(); }
};

struct VrrReport {
  std::vector<VrrRow> rows;  // ordered by theta, then estimator

  const VrrRow* find(const std::string& estimator, double theta) const;
};

// Crude baseline per (theta, macro) uses fresh streams; I1 estimators within
// one (theta, macro) share the same resampled inputs.
VrrReport vrr_sweep(const SweepConfig& cfg, const Database& db);

// estimator,theta,vrr,vrr_stderr,mean,crude_var,cv_var,n_micro,n_macro
void write_vrr_csv(const VrrReport& report, std::ostream& out);
void write_vrr_csv(const VrrReport& report, const std::filesystem::path& path);
VrrReport read_vrr_csv(std::istream& in);

// Whitespace table: theta followed by one VRR column per estimator.
void write_plot_table(const VrrReport& report, std::ostream& out);
void write_plot_table(const VrrReport& report, const std::filesystem::path& path);

// ---- synthetic Gaussian validation ---------------------------------------------

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  // relative unless noted in the name
  bool passed = false;
  std::string detail;
};

// Closed-form R^2 for unit-variance controls with Y-correlations rho_xy and
// control correlation matrix corr_x.
double gaussian_r_squared(const std::vector<double>& rho_xy,
                          const std::vector<std::vector<double>>& corr_x);

std::vector<OracleCheck> gaussian_oracle_suite(std::uint64_t seed);

// Gaussian suite plus determinism, roundtrip and I1-exactness checks on a tiny
// model; if `database_path` is set that file must also load cleanly.
std::vector<OracleCheck> validation_suite(std::uint64_t seed,
                                          const std::optional<std::filesystem::path>& database_path,
                                          unsigned workers);

}  // namespace dbmc
