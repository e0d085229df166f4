#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dbmc/error.hpp"
#include "dbmc/harness.hpp"
#include "dbmc/noise.hpp"

using namespace dbmc;

namespace {

ControlledEstimate normal_dummy(std::uint64_t seed, std::size_t n) {
  NoiseStream s(seed, 0);
  double sum = 0, sum2 = 0;
  std::vector<double> v(n);
  for (auto& x : v) {
    x = s.next();
    sum += x;
  }
  const double mean = sum / n;
  for (double x : v) sum2 += (x - mean) * (x - mean);
  ControlledEstimate e;
  e.estimate = mean;
  e.sample_variance = sum2 / (n - 1);
  e.n = n;
  return e;
}

const Database& tiny_db() {
  static const Database db =
      build_database(LatticeModel::with_size(8, 50), {1.2, 1.35}, Observable::spacetime, 256, 5);
  return db;
}

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.theta_grid = {1.2, 1.3};
  cfg.estimators = {{"CV1.2", Scheme::i1, {0}},
                    {"CV1.35", Scheme::i1, {1}},
                    {"CV2C", Scheme::i1, {0, 1}},
                    {"I2", Scheme::i2, {0, 1}},
                    {"crude", Scheme::crude, {}}};
  cfg.n_micro = 32;
  cfg.n_macro = 4;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("constant estimator has zero variance") {
  const MacroMicroStats s = macro_micro_variance(
      [](std::size_t, std::uint64_t, std::size_t n) {
        ControlledEstimate e;
        e.estimate = 4.0;
        e.n = n;
        return e;
      },
      10, 16);
  CHECK(s.mean == 4.0);
  CHECK(s.variance == 0.0);
  CHECK(s.variance_of_means == 0.0);
  CHECK(s.variance_of_variance == 0.0);
}

TEST_CASE("normal dummy: averaged variance near 1 and 1/n scaling") {
  auto fn = [](std::size_t, std::uint64_t seed, std::size_t n) { return normal_dummy(seed, n); };
  const MacroMicroStats a = macro_micro_variance(fn, 40, 256, 1);
  CHECK(std::abs(a.variance - 1.0) < 0.10);
  CHECK(a.macro_estimates.size() == 40);

  // Spread of per-macro means needs many macros to resolve a factor of 2.
  const MacroMicroStats small = macro_micro_variance(fn, 2000, 256, 2);
  const MacroMicroStats big = macro_micro_variance(fn, 2000, 512, 3);
  const double ratio = small.variance_of_means / big.variance_of_means;
  CHECK(std::abs(ratio - 2.0) < 0.15 * 2.0);
}

TEST_CASE("macros get distinct seeds and errors carry the macro index") {
  std::vector<std::uint64_t> seeds;
  macro_micro_variance(
      [&](std::size_t, std::uint64_t seed, std::size_t n) {
        seeds.push_back(seed);
        return normal_dummy(seed, n);
      },
      5, 4, 7);
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::unique(seeds.begin(), seeds.end()) == seeds.end());

  try {
    macro_micro_variance(
        [](std::size_t m, std::uint64_t seed, std::size_t n) {
          if (m == 2) throw Error(ErrorCode::blow_up, "boom");
          return normal_dummy(seed, n);
        },
        4, 4);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::blow_up);
    CHECK(std::string(e.what()).find("macro 2") != std::string::npos);
  }
  CHECK_THROWS_AS(macro_micro_variance([](auto, auto s, auto n) { return normal_dummy(s, n); }, 1, 4),
                  Error);
}

TEST_CASE("sweep shape, determinism and CSV parse-back") {
  const SweepConfig cfg = small_sweep();
  const VrrReport a = vrr_sweep(cfg, tiny_db());
  REQUIRE(a.rows.size() == cfg.theta_grid.size() * cfg.estimators.size());
  for (const auto& r : a.rows) {
    CHECK(r.ok());
    CHECK(r.vrr > 0);
    CHECK(r.n_micro == 32);
    CHECK(r.n_macro == 4);
  }
  // Rows ordered by theta then estimator.
  CHECK(a.rows[0].estimator == "CV1.2");
  CHECK(a.rows[0].theta == 1.2);
  CHECK(a.rows[5].theta == 1.3);

  const VrrReport b = vrr_sweep(cfg, tiny_db());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].vrr == b.rows[i].vrr);
    CHECK(a.rows[i].mean == b.rows[i].mean);
  }

  std::stringstream csv;
  write_vrr_csv(a, csv);
  const VrrReport back = read_vrr_csv(csv);
  REQUIRE(back.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(back.rows[i].estimator == a.rows[i].estimator);
    CHECK(back.rows[i].theta == a.rows[i].theta);
    CHECK(back.rows[i].vrr == a.rows[i].vrr);
    CHECK(back.rows[i].vrr_stderr == a.rows[i].vrr_stderr);
    CHECK(back.rows[i].mean == a.rows[i].mean);
    CHECK(back.rows[i].crude_var == a.rows[i].crude_var);
    CHECK(back.rows[i].cv_var == a.rows[i].cv_var);
  }

  // Self-control: CV1.2 at theta = 1.2 removes essentially all variance.
  CHECK(a.find("CV1.2", 1.2)->vrr > 1e6);
  // Adding a control never hurts in-sample (away from the round-off floor at
  // the nominal itself).
  CHECK(a.find("CV2C", 1.3)->cv_var <= a.find("CV1.2", 1.3)->cv_var * (1 + 1e-9));
  CHECK(a.find("CV2C", 1.3)->cv_var <= a.find("CV1.35", 1.3)->cv_var * (1 + 1e-9));

  std::stringstream plot;
  write_plot_table(a, plot);
  std::string header;
  std::getline(plot, header);
  CHECK(header == "# theta CV1.2 CV1.35 CV2C I2 crude");
  std::string line;
  int lines = 0;
  while (std::getline(plot, line)) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("crude against crude is about 1") {
  SweepConfig cfg;
  cfg.theta_grid = {1.25};
  cfg.estimators = {{"crude", Scheme::crude, {}}};
  cfg.n_micro = 64;
  cfg.n_macro = 20;
  const VrrRow row = vrr_sweep(cfg, tiny_db()).rows.at(0);
  // The ratio of two averaged sample variances over 20 x 63 degrees of freedom.
  CHECK(std::abs(row.vrr - 1.0) < 4 * std::sqrt(2.0 * 2.0 / (20 * 63)));
}

TEST_CASE("per-macro rebuild produces a complete report") {
  SweepConfig cfg = small_sweep();
  cfg.estimators.resize(1);
  cfg.theta_grid = {1.25};
  cfg.rebuild_per_macro = true;
  const VrrReport r = vrr_sweep(cfg, tiny_db());
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].ok());
  cfg.rebuild_per_macro = false;
  CHECK(vrr_sweep(cfg, tiny_db()).rows[0].vrr != r.rows[0].vrr);
}

TEST_CASE("a failing cell becomes an error row") {
  // Duplicate nominals in one estimator make the control covariance singular.
  SweepConfig cfg = small_sweep();
  cfg.estimators = {{"dup", Scheme::i1, {0, 0}}, {"CV1.2", Scheme::i1, {0}}};
  cfg.theta_grid = {1.25};
  const VrrReport r = vrr_sweep(cfg, tiny_db());
  REQUIRE(r.rows.size() == 2);
  CHECK_FALSE(r.rows[0].ok());
  CHECK(std::isnan(r.rows[0].vrr));
  CHECK(r.rows[1].ok());
  std::stringstream csv;
  write_vrr_csv(r, csv);
  CHECK(std::isnan(read_vrr_csv(csv).rows[0].vrr));
}

TEST_CASE("sweep validation") {
  SweepConfig cfg = small_sweep();
  cfg.theta_grid.clear();
  CHECK_THROWS_AS(cfg.validate(2), Error);
  cfg = small_sweep();
  cfg.n_macro = 1;
  CHECK_THROWS_AS(cfg.validate(2), Error);
  cfg = small_sweep();
  cfg.n_micro = 3;  // two controls need n >= 4
  CHECK_THROWS_AS(cfg.validate(2), Error);
  cfg = small_sweep();
  CHECK_THROWS_AS(cfg.validate(1), Error);  // CV1.35 refers to column 1
}

TEST_CASE("malformed CSV is rejected") {
  std::stringstream bad_header("a,b\n");
  CHECK_THROWS_AS(read_vrr_csv(bad_header), Error);
  std::stringstream bad_row(
      "estimator,theta,vrr,vrr_stderr,mean,crude_var,cv_var,n_micro,n_macro\nx,1,2\n");
  CHECK_THROWS_AS(read_vrr_csv(bad_row), Error);
}

TEST_CASE("gaussian oracles") {
  CHECK(gaussian_r_squared({0.9}, {{1.0}}) == doctest::Approx(0.81));
  // (0.8, 0.6) with cross-correlation 0.5: c^T S^-1 c = (0.64 + 0.36 - 0.48) / 0.75
  CHECK(gaussian_r_squared({0.8, 0.6}, {{1.0, 0.5}, {0.5, 1.0}}) ==
        doctest::Approx(0.52 / 0.75).epsilon(1e-12));
  const auto checks = gaussian_oracle_suite(3);
  CHECK(checks.size() == 4);
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("validation suite flags a corrupted database") {
  const auto checks = validation_suite(1, std::filesystem::path("/nonexistent/dir/x.db"), 1);
  bool any_failed = false;
  for (const auto& c : checks) any_failed = any_failed || !c.passed;
  CHECK(any_failed);
}
