// Runs the dbmc binary end to end on a tiny model.
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dbmc/dbmc.h"
#include "json.hpp"
#include "test_support.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout
  std::string err;  // stderr
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run dbmc(const std::string& args) {
  const auto dir = test_support::scratch_dir();
  const auto out = dir / "cli_stdout.txt", err = dir / "cli_stderr.txt";
  const std::string cmd = std::string("cd '") + dir.string() + "' && DBMC_WORKERS=1 '" +
                          DBMC_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const std::string kTiny =
    "--preset desk --set model.lattice_size=8 --set model.n_steps=50 --set database.n_paths=64 ";

std::string tiny_db() {
  static const bool built = [] {
    const Run r = dbmc("build-db " + kTiny + "-o cli_tiny.db");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return true;
  }();
  (void)built;
  return "cli_tiny.db";
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(dbmc("").code == 1);
  CHECK(dbmc("frobnicate").code == 1);
  CHECK(dbmc("estimate --scheme i7").code == 1);
  CHECK(dbmc("--help").code == 0);
}

TEST_CASE("build-db: missing nominals names the key") {
  const Run r = dbmc("build-db --set model.lattice_size=8 --set model.n_steps=5");
  CHECK(r.code == 1);
  CHECK(r.err.find("database.nominals") != std::string::npos);
}

TEST_CASE("build-db: tiny config writes a loadable database") {
  const Run r = dbmc("build-db " + kTiny + "-o cli_build.db");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("N          64") != std::string::npos);
  CHECK(r.out.find("k          2") != std::string::npos);
  CHECK(r.out.find("elapsed") != std::string::npos);
  const auto path = test_support::scratch_file("cli_build.db");
  REQUIRE(std::filesystem::exists(path));
  CHECK(std::filesystem::exists(path.string() + ".config.ini"));

  dbmc_database* db = nullptr;
  REQUIRE(dbmc_database_load(path.string().c_str(), &db) == DBMC_OK);
  double means[2];
  dbmc_database_means(db, means, 2);
  for (uint32_t i = 0; i < 2; ++i) {
    double sum = 0;
    for (uint64_t j = 0; j < 64; ++j) {
      double v;
      dbmc_database_control(db, j, i, &v);
      sum += v;
    }
    CHECK(means[i] == doctest::Approx(sum / 64).epsilon(1e-12));
  }
  dbmc_database_destroy(db);

  SUBCASE("rebuild with the same seed is byte-identical") {
    const Run again = dbmc("build-db " + kTiny + "-o cli_build2.db");
    REQUIRE(again.code == 0);
    CHECK(test_support::read_bytes(path) ==
          test_support::read_bytes(test_support::scratch_file("cli_build2.db")));
  }
  SUBCASE("the config echo reproduces the run") {
    const Run again = dbmc("build-db --config cli_build.db.config.ini -o cli_build3.db");
    REQUIRE_MESSAGE(again.code == 0, again.err);
    CHECK(test_support::read_bytes(path) ==
          test_support::read_bytes(test_support::scratch_file("cli_build3.db")));
  }
}

TEST_CASE("build-db: blow-up exits 2") {
  const Run r = dbmc("build-db " + kTiny + "--set model.dt=5 -o cli_blowup.db");
  CHECK(r.code == 2);
  CHECK(r.err.find("blow-up") != std::string::npos);
}

TEST_CASE("estimate") {
  const std::string db = tiny_db();
  SUBCASE("crude matches the library call") {
    const Run r = dbmc("estimate " + kTiny + "--scheme crude --theta 1.25 --samples 16 --seed 4 --json");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = nlohmann::json::parse(r.out);
    dbmc_config* c = nullptr;
    dbmc_config_create("desk", &c);
    dbmc_config_set(c, "model.lattice_size", "8");
    dbmc_config_set(c, "model.n_steps", "50");
    dbmc_estimate* e = nullptr;
    REQUIRE(dbmc_estimate_run(c, nullptr, DBMC_SCHEME_CRUDE, 1.25, 16, 4, &e) == DBMC_OK);
    dbmc_estimate_summary s{};
    dbmc_estimate_get_summary(e, &s);
    CHECK(j["estimate"].get<double>() == s.estimate);
    CHECK(j["std_error"].get<double>() == s.std_error);
    CHECK(j["scheme"] == "crude");
    CHECK(j["beta"].empty());
    CHECK(j["r_squared"].is_null());
    dbmc_estimate_destroy(e);
    dbmc_config_destroy(c);
  }
  SUBCASE("i1 at a nominal has near-zero standard error") {
    const Run r = dbmc("estimate " + kTiny + "--db " + db + " --scheme i1 --theta 1.2 --json");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = nlohmann::json::parse(r.out);
    const Run crude = dbmc("estimate " + kTiny + "--scheme crude --theta 1.2 --json");
    const auto jc = nlohmann::json::parse(crude.out);
    CHECK(j["std_error"].get<double>() < 1e-6 * jc["std_error"].get<double>());
    CHECK(j["beta"].size() == 2);
    CHECK(j["n"] == 256);
  }
  SUBCASE("i1 and i2 agree within 4 sigma") {
    const auto a = nlohmann::json::parse(
        dbmc("estimate " + kTiny + "--db " + db + " --scheme i1 --theta 1.28 --json").out);
    const auto b = nlohmann::json::parse(
        dbmc("estimate " + kTiny + "--db " + db + " --scheme i2 --theta 1.28 --json --seed 9").out);
    const double se = std::hypot(a["std_error"].get<double>(), b["std_error"].get<double>());
    CHECK(std::abs(a["estimate"].get<double>() - b["estimate"].get<double>()) < 4 * se);
  }
  SUBCASE("text output and result file") {
    const Run r = dbmc("estimate " + kTiny + "--db " + db + " --theta 1.3 -o cli_est.json");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("estimate") != std::string::npos);
    CHECK(r.out.find("beta") != std::string::npos);
    CHECK(nlohmann::json::parse(slurp(test_support::scratch_file("cli_est.json")))["scheme"] == "i1");
    CHECK(std::filesystem::exists(test_support::scratch_file("cli_est.json.config.ini")));
  }
  SUBCASE("is deterministic") {
    const std::string args = "estimate " + kTiny + "--db " + db + " --theta 1.3 --seed 5 --json";
    CHECK(dbmc(args).out == dbmc(args).out);
  }
  SUBCASE("missing theta exits 1") { CHECK(dbmc("estimate " + kTiny + "--db " + db).code == 1); }
  SUBCASE("missing database exits 3") {
    CHECK(dbmc("estimate " + kTiny + "--db nope.db --theta 1.2").code == 3);
  }
  SUBCASE("degenerate controls exit 4") {
    // P1 at the initial state is identically zero, so the controls are constant.
    const std::string zero = kTiny + "--set model.observable=p1 --set model.point_time_step=0 ";
    REQUIRE(dbmc("build-db " + zero + "-o cli_zero.db").code == 0);
    const Run r = dbmc("estimate " + zero + "--db cli_zero.db --theta 1.25");
    CHECK(r.code == 4);
  }
}

TEST_CASE("sweep") {
  const std::string db = tiny_db();
  const std::string small = kTiny + "--db " + db + " --set sweep.n_micro=16 --set sweep.n_macro=3 ";
  SUBCASE("empty grid exits 1") {
    CHECK(dbmc("sweep " + small + "--set sweep.theta_grid=").code == 1);
  }
  SUBCASE("shape and parse-back of the printed summary") {
    const Run r = dbmc("sweep " + small + "-o cli_sweep.csv --plot-output cli_sweep.dat");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto csv = test_support::scratch_file("cli_sweep.csv");
    CHECK(std::filesystem::exists(csv.string() + ".config.ini"));
    CHECK(std::filesystem::exists(test_support::scratch_file("cli_sweep.dat")));

    dbmc_report* report = nullptr;
    REQUIRE(dbmc_report_read_csv(csv.string().c_str(), &report) == DBMC_OK);
    REQUIRE(dbmc_report_row_count(report) == 9 * 3);
    // Reformat each CSV row the way the summary prints it and compare.
    const auto printed = lines(r.out);
    REQUIRE(printed.size() >= 28);
    for (size_t i = 0; i < 27; ++i) {
      dbmc_report_row row{};
      dbmc_report_row_get(report, i, &row);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-10s %8.4g %14.6g %14.6g", row.estimator, row.theta,
                    row.vrr, row.vrr_stderr);
      CHECK(printed[i + 1] == buf);
    }
    dbmc_report_destroy(report);

    // Deterministic across invocations.
    const Run again = dbmc("sweep " + small + "-o cli_sweep2.csv --plot-output cli_sweep2.dat");
    CHECK(slurp(csv) == slurp(test_support::scratch_file("cli_sweep2.csv")));
  }
  SUBCASE("unknown control theta exits 1") {
    CHECK(dbmc("sweep " + small + "--set sweep.estimators=X:i1:1.3").code == 1);
  }
}

TEST_CASE("validate") {
  const Run r = dbmc("validate --seed 3");
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("[FAIL]") == std::string::npos);
  CHECK(lines(r.out).size() >= 7);
  CHECK(dbmc("validate --seed 3").out == r.out);

  const std::string db = tiny_db();
  CHECK(dbmc("validate --db " + db).code == 0);

  auto bytes = test_support::read_bytes(test_support::scratch_file(db));
  bytes[bytes.size() / 2] ^= 0x10;
  test_support::write_bytes(test_support::scratch_file("cli_corrupt.db"), bytes);
  const Run bad = dbmc("validate --db cli_corrupt.db");
  CHECK(bad.code == 6);
  CHECK(bad.out.find("[FAIL]") != std::string::npos);
}

TEST_CASE("info") {
  const Run r = dbmc("info " + tiny_db());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("n_paths         64") != std::string::npos);
  CHECK(r.out.find("generator_id    1") != std::string::npos);
  CHECK(r.out.find("observable      p3") != std::string::npos);
  CHECK(dbmc("info missing.db").code == 3);
}
