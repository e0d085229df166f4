#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dbmc/database.hpp"
#include "dbmc/estimator.hpp"
#include "dbmc/harness.hpp"
#include "dbmc/tdgl.hpp"

namespace dbmc {

// A sweep estimator as written in a config file: controls are named by their
// nominal theta and resolved against a database later.
struct EstimatorEntry {
  std::string label;
  Scheme scheme = Scheme::i1;
  std::vector<double> control_thetas;

  bool operator==(const EstimatorEntry&) const = default;
};

enum class Command { build_db, estimate, sweep, validate, info };

// Everything a CLI run needs. Values come from a preset, then a config file,
// then individual key=value overrides, in that order.
//
// Config files are INI-style: [model], [database], [estimate], [sweep] and
// [run] sections of `key = value` lines; ';' starts a comment. Unknown
// sections or keys are rejected.
class RunConfig {
 public:
  RunConfig();

  static std::vector<std::string> preset_names();
  void apply_preset(const std::string& name);

  void load_file(const std::filesystem::path& path);
  void load_string(const std::string& text);

  // `key` is "section.name", e.g. "model.lattice_size".
  void set(const std::string& key, const std::string& value);

  // Throws Error(config) naming the first bad or missing key for `command`.
  void validate(Command command) const;

  // Fully resolved configuration in the same INI format load_string reads.
  std::string dump() const;

  static std::vector<std::string> known_keys();

  // Model with point-site / evaluation-time defaults resolved.
  LatticeModel resolved_model() const;

  // Sweep configuration with estimator controls mapped to database columns.
  SweepConfig sweep_config(const std::vector<double>& database_nominals) const;

  LatticeModel model;
  std::optional<Site> point_site;
  std::optional<std::uint32_t> point_time_step;
  Observable observable = Observable::spacetime;

  std::vector<double> nominals;
  std::uint64_t n_paths = 4096;
  std::uint64_t master_seed = 1;
  std::string db_path = "dbmc.db";

  std::optional<double> theta;
  Scheme scheme = Scheme::i1;
  std::size_t samples = 256;
  std::uint64_t estimate_seed = 1;

  std::vector<double> theta_grid;
  std::vector<EstimatorEntry> estimators;
  std::size_t n_micro = 256;
  std::size_t n_macro = 20;
  std::uint64_t sweep_seed = 1;
  std::string csv_path = "vrr.csv";
  std::string plot_path = "vrr.dat";
  bool rebuild_per_macro = false;

  unsigned workers;
};

// "CV1.2:i1:1.2; CV2C:i1:1.2,1.35; crude2:crude"
std::vector<EstimatorEntry> parse_estimators(const std::string& text);
std::string format_estimators(const std::vector<EstimatorEntry>& entries);

std::vector<double> parse_real_list(const std::string& text, const std::string& key);

}  // namespace dbmc
