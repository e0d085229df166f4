#include "dbmc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dbmc/error.hpp"
#include "dbmc/parallel.hpp"

namespace dbmc {

namespace {

const std::vector<double> kDefaultThetaGrid{1.150, 1.175, 1.225, 1.250, 1.265,
                                      1.300, 1.325, 1.375, 1.400};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw Error(ErrorCode::config, "invalid value '" + value + "' for " + key + " (expected " +
                                     expected + ")");
}

double parse_real(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::logic_error&) {
    bad_value(key, value, "a real number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, value, "a finite real number");
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    bad_value(key, value, "a non-negative integer");
  try {
    return std::stoull(v);
  } catch (const std::logic_error&) {
    bad_value(key, value, "an integer in range");
  }
}

std::uint32_t parse_u32(const std::string& key, const std::string& value) {
  const std::uint64_t v = parse_unsigned(key, value);
  if (v > std::numeric_limits<std::uint32_t>::max()) bad_value(key, value, "a 32-bit integer");
  return static_cast<std::uint32_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "true or false");
}

// Shortest text that parses back to the same double.
std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_reals(const std::vector<double>& values, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += format_real(values[i]);
  }
  return out;
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(key, item));
  return out;
}

std::vector<EstimatorEntry> parse_estimators(const std::string& text) {
  std::vector<EstimatorEntry> out;
  for (const auto& item : split(text, ';')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
      bad_value("sweep.estimators", item, "label:scheme[:theta,theta...]");
    if (parts[0].find_first_of(" \t,") != std::string::npos)
      bad_value("sweep.estimators", item, "a label without spaces or commas");
    EstimatorEntry e;
    e.label = parts[0];
    e.scheme = scheme_from_string(parts[1]);
    if (parts.size() == 3) e.control_thetas = parse_real_list(parts[2], "sweep.estimators");
    if (e.scheme == Scheme::crude && !e.control_thetas.empty())
      bad_value("sweep.estimators", item, "no controls for a crude estimator");
    if (e.scheme != Scheme::crude && e.control_thetas.empty())
      bad_value("sweep.estimators", item, "at least one control theta");
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_estimators(const std::vector<EstimatorEntry>& entries) {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += "; ";
    out += entries[i].label + ":" + to_string(entries[i].scheme);
    if (!entries[i].control_thetas.empty()) out += ":" + join_reals(entries[i].control_thetas, ",");
  }
  return out;
}

RunConfig::RunConfig() : workers(default_workers()) {}

std::vector<std::string> RunConfig::preset_names() { return {"desk", "paper"}; }

void RunConfig::apply_preset(const std::string& name) {
  if (name != "desk" && name != "paper")
    throw Error(ErrorCode::config, "unknown preset '" + name + "' (expected desk or paper)");
  const bool paper = name == "paper";
  model = LatticeModel{};
  model.lattice_size = paper ? 40 : 16;
  model.n_steps = paper ? 5000 : 1000;
  model.dt = 0.01;
  model.dx = 1.0;
  model.chi = 1.0;
  model.diffusion = 1.0;
  point_site.reset();
  point_time_step.reset();
  observable = Observable::spacetime;
  nominals = {1.2, 1.35};
  n_paths = paper ? (1u << 14) : (1u << 12);
  samples = 1u << 8;
  n_micro = 1u << 8;
  n_macro = paper ? 40 : 20;
  theta_grid = kDefaultThetaGrid;
  estimators = {{"CV1.2", Scheme::i1, {1.2}},
                {"CV1.35", Scheme::i1, {1.35}},
                {"CV2C", Scheme::i1, {1.2, 1.35}}};
}

std::vector<std::string> RunConfig::known_keys() {
  return {"model.chi",          "model.diffusion",        "model.dt",
          "model.dx",           "model.lattice_size",     "model.n_steps",
          "model.boundary",     "model.initial_condition", "model.initial_value",
          "model.point_site",   "model.point_time_step",  "model.observable",
          "database.nominals",  "database.n_paths",       "database.master_seed",
          "database.path",      "estimate.theta",         "estimate.scheme",
          "estimate.samples",   "estimate.seed",          "sweep.theta_grid",
          "sweep.estimators",   "sweep.n_micro",          "sweep.n_macro",
          "sweep.seed",         "sweep.output",           "sweep.plot_output",
          "sweep.rebuild_per_macro", "run.workers"};
}

void RunConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "model.chi") model.chi = parse_real(key, v);
  else if (key == "model.diffusion") model.diffusion = parse_real(key, v);
  else if (key == "model.dt") model.dt = parse_real(key, v);
  else if (key == "model.dx") model.dx = parse_real(key, v);
  else if (key == "model.lattice_size") model.lattice_size = parse_u32(key, v);
  else if (key == "model.n_steps") model.n_steps = parse_u32(key, v);
  else if (key == "model.boundary") {
    if (v != "periodic") bad_value(key, v, "periodic");
    model.boundary = Boundary::periodic;
  } else if (key == "model.initial_condition") {
    if (v == "zero") model.initial.kind = InitialKind::zero;
    else if (v == "constant") model.initial.kind = InitialKind::constant;
    else bad_value(key, v, "zero or constant");
  } else if (key == "model.initial_value") {
    model.initial.value = parse_real(key, v);
  } else if (key == "model.point_site") {
    const auto parts = split(v, ',');
    if (parts.size() != 2) bad_value(key, v, "row,col");
    point_site = Site{parse_u32(key, parts[0]), parse_u32(key, parts[1])};
  } else if (key == "model.point_time_step") {
    point_time_step = parse_u32(key, v);
  } else if (key == "model.observable") {
    observable = observable_from_string(v);
  } else if (key == "database.nominals") {
    nominals = parse_real_list(v, key);
  } else if (key == "database.n_paths") {
    n_paths = parse_unsigned(key, v);
  } else if (key == "database.master_seed") {
    master_seed = parse_unsigned(key, v);
  } else if (key == "database.path") {
    db_path = v;
  } else if (key == "estimate.theta") {
    theta = parse_real(key, v);
  } else if (key == "estimate.scheme") {
    scheme = scheme_from_string(v);
  } else if (key == "estimate.samples") {
    samples = parse_unsigned(key, v);
  } else if (key == "estimate.seed") {
    estimate_seed = parse_unsigned(key, v);
  } else if (key == "sweep.theta_grid") {
    theta_grid = parse_real_list(v, key);
  } else if (key == "sweep.estimators") {
    estimators = parse_estimators(v);
  } else if (key == "sweep.n_micro") {
    n_micro = parse_unsigned(key, v);
  } else if (key == "sweep.n_macro") {
    n_macro = parse_unsigned(key, v);
  } else if (key == "sweep.seed") {
    sweep_seed = parse_unsigned(key, v);
  } else if (key == "sweep.output") {
    csv_path = v;
  } else if (key == "sweep.plot_output") {
    plot_path = v;
  } else if (key == "sweep.rebuild_per_macro") {
    rebuild_per_macro = parse_bool(key, v);
  } else if (key == "run.workers") {
    const std::uint64_t w = parse_unsigned(key, v);
    if (w < 1 || w > 4096) bad_value(key, v, "1..4096");
    workers = static_cast<unsigned>(w);
  } else {
    throw Error(ErrorCode::config, "unknown config key '" + key + "'");
  }
}

void RunConfig::load_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::config, std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty())
      throw Error(ErrorCode::config, "config key '" + section + "' must be inside a section");
    for (const auto& [name, node] : entries) set(section + "." + name, node.data());
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  load_string(buffer.str());
}

LatticeModel RunConfig::resolved_model() const {
  LatticeModel m = model;
  m.point_site = point_site.value_or(Site{model.lattice_size / 2, model.lattice_size / 2});
  m.point_time_step = point_time_step.value_or(model.n_steps);
  return m;
}

void RunConfig::validate(Command command) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  resolved_model().validate();

  if (command == Command::build_db || command == Command::sweep) {
    if (nominals.empty()) fail("database.nominals is required (comma-separated thetas)");
    for (std::size_t i = 1; i < nominals.size(); ++i)
      if (!(nominals[i] > nominals[i - 1]))
        fail("database.nominals must be strictly increasing");
    if (n_paths < 2) fail("database.n_paths must be at least 2");
  }
  if (command == Command::estimate) {
    if (!theta) fail("estimate.theta is required");
    if (samples < 2) fail("estimate.samples must be at least 2");
  }
  if (command == Command::sweep) {
    if (theta_grid.empty()) fail("sweep.theta_grid must not be empty");
    if (estimators.empty()) fail("sweep.estimators must not be empty");
    if (n_macro < 2) fail("sweep.n_macro must be at least 2");
    for (const auto& e : estimators) {
      for (double t : e.control_thetas)
        if (std::none_of(nominals.begin(), nominals.end(),
                         [&](double n) { return std::fabs(n - t) < 1e-9; }))
          fail("sweep.estimators: '" + e.label + "' uses control theta " + format_real(t) +
               " which is not in database.nominals");
      if (n_micro < e.control_thetas.size() + 2)
        fail("sweep.n_micro must be at least k + 2 for estimator '" + e.label + "'");
    }
    if (csv_path.empty()) fail("sweep.output must not be empty");
  }
}

SweepConfig RunConfig::sweep_config(const std::vector<double>& database_nominals) const {
  SweepConfig cfg;
  cfg.theta_grid = theta_grid;
  cfg.n_micro = n_micro;
  cfg.n_macro = n_macro;
  cfg.seed = sweep_seed;
  cfg.workers = workers;
  cfg.rebuild_per_macro = rebuild_per_macro;
  for (const auto& e : estimators) {
    EstimatorSpec spec{e.label, e.scheme, {}};
    for (double t : e.control_thetas) {
      const auto it = std::find_if(database_nominals.begin(), database_nominals.end(),
                                   [&](double n) { return std::fabs(n - t) < 1e-9; });
      if (it == database_nominals.end())
        throw Error(ErrorCode::config, "estimator '" + e.label + "' uses control theta " +
                                           format_real(t) + " which the database lacks");
      spec.controls.push_back(static_cast<std::size_t>(it - database_nominals.begin()));
    }
    cfg.estimators.push_back(std::move(spec));
  }
  return cfg;
}

std::string RunConfig::dump() const {
  const LatticeModel m = resolved_model();
  std::ostringstream out;
  out << "[model]\n"
      << "chi = " << format_real(m.chi) << "\n"
      << "diffusion = " << format_real(m.diffusion) << "\n"
      << "dt = " << format_real(m.dt) << "\n"
      << "dx = " << format_real(m.dx) << "\n"
      << "lattice_size = " << m.lattice_size << "\n"
      << "n_steps = " << m.n_steps << "\n"
      << "boundary = periodic\n"
      << "initial_condition = " << (m.initial.kind == InitialKind::zero ? "zero" : "constant")
      << "\n"
      << "initial_value = " << format_real(m.initial.value) << "\n"
      << "point_site = " << m.point_site.row << "," << m.point_site.col << "\n"
      << "point_time_step = " << m.point_time_step << "\n"
      << "observable = " << to_string(observable) << "\n\n"
      << "[database]\n"
      << "nominals = " << join_reals(nominals) << "\n"
      << "n_paths = " << n_paths << "\n"
      << "master_seed = " << master_seed << "\n"
      << "path = " << db_path << "\n\n"
      << "[estimate]\n";
  if (theta) out << "theta = " << format_real(*theta) << "\n";
  out << "scheme = " << to_string(scheme) << "\n"
      << "samples = " << samples << "\n"
      << "seed = " << estimate_seed << "\n\n"
      << "[sweep]\n"
      << "theta_grid = " << join_reals(theta_grid) << "\n"
      << "estimators = " << format_estimators(estimators) << "\n"
      << "n_micro = " << n_micro << "\n"
      << "n_macro = " << n_macro << "\n"
      << "seed = " << sweep_seed << "\n"
      << "output = " << csv_path << "\n"
      << "plot_output = " << plot_path << "\n"
      << "rebuild_per_macro = " << (rebuild_per_macro ? "true" : "false") << "\n\n"
      << "[run]\n"
      << "workers = " << workers << "\n";
  return out.str();
}

}  // namespace dbmc
