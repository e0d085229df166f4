#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "dbmc/database.hpp"
#include "dbmc/error.hpp"
#include "dbmc/estimator.hpp"
#include "test_support.hpp"

using namespace dbmc;

namespace {

LatticeModel tiny() { return LatticeModel::with_size(8, 50); }

ErrorCode load_error(const std::filesystem::path& path) {
  try {
    load_database(path);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load succeeded");
  return ErrorCode::invalid_argument;
}

// Byte offset of dt in the header: magic 4, version 2, generator 1,
// observable 1, seed 8, n_paths 8, k 2, L 4, n_steps 4.
constexpr std::size_t kDtOffset = 34;

}  // namespace

TEST_CASE("two paths, one control: mean is the exact average") {
  const Database db = build_database(tiny(), {1.2}, Observable::spacetime, 2, 11);
  REQUIRE(db.controls.size() == 2);
  CHECK(db.means[0] == (db.controls[0] + db.controls[1]) / 2);
  CHECK(db.generator_id == kGeneratorId);
}

TEST_CASE("database invariants") {
  const Database db = build_database(tiny(), {1.2, 1.35}, Observable::spacetime, 64, 3);
  CHECK(db.k() == 2);
  CHECK(db.n_paths == 64);
  CHECK(db.controls.size() == 128);
  for (double v : db.controls) CHECK(std::isfinite(v));
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < 64; ++j) sum += db.control(j, i);
    CHECK(db.means[i] == doctest::Approx(sum / 64).epsilon(1e-12));
  }
  // Control values are the path observables for stream (seed, j).
  for (std::size_t j : {0u, 17u, 63u})
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(db.control(j, i) ==
            simulate_path({tiny(), db.nominals[i]}, make_stream(3, j)).spacetime_mag);
}

TEST_CASE("other observables are stored as requested") {
  const Database db = build_database(tiny(), {1.2}, Observable::point, 4, 3);
  CHECK(db.control(2, 0) == simulate_path({tiny(), 1.2}, make_stream(3, 2)).point_mag);
}

TEST_CASE("build is deterministic and independent of workers") {
  const Database a = build_database(tiny(), {1.2, 1.35}, Observable::spacetime, 40, 5, 1);
  const Database b = build_database(tiny(), {1.2, 1.35}, Observable::spacetime, 40, 5, 1);
  const Database c = build_database(tiny(), {1.2, 1.35}, Observable::spacetime, 40, 5, 4);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(serialize_database(a) == serialize_database(c));
  const Database d = build_database(tiny(), {1.2, 1.35}, Observable::spacetime, 40, 6, 1);
  CHECK_FALSE(a == d);
}

TEST_CASE("build rejects bad arguments") {
  auto code_of = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::degenerate_variance;  // sentinel: nothing thrown
  };
  CHECK(code_of([] { build_database(tiny(), {}, Observable::spacetime, 4, 1); }) !=
        ErrorCode::degenerate_variance);
  CHECK(code_of([] { build_database(tiny(), {1.2}, Observable::spacetime, 1, 1); }) !=
        ErrorCode::degenerate_variance);
  CHECK(code_of([] { build_database(tiny(), {1.3, 1.2}, Observable::spacetime, 4, 1); }) !=
        ErrorCode::degenerate_variance);
  CHECK(code_of([] { build_database(tiny(), {1.2, 1.2}, Observable::spacetime, 4, 1); }) !=
        ErrorCode::degenerate_variance);
}

TEST_CASE("blow-up identifies the path") {
  LatticeModel m = tiny();
  m.dt = 5.0;  // explicit Euler is unstable here
  try {
    build_database(m, {1.2}, Observable::spacetime, 3, 1);
    FAIL("expected blow-up");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::blow_up);
    CHECK(std::string(e.what()).find("path 0") != std::string::npos);
  }
}

TEST_CASE("save / load roundtrip and corruption") {
  LatticeModel m = tiny();
  m.initial = {InitialKind::constant, 0.25};
  m.point_site = {1, 6};
  m.point_time_step = 33;
  const Database db = build_database(m, {1.15, 1.2, 1.4}, Observable::total_at_t, 16, 99);
  const auto path = test_support::scratch_file("roundtrip.db");
  save_database(db, path);
  const Database back = load_database(path);
  CHECK(back == db);
  const auto bytes = test_support::read_bytes(path);
  CHECK(std::memcmp(bytes.data(), "DBMC", 4) == 0);
  // header + controls + means + checksum
  const std::size_t header = 4 + 2 + 1 + 1 + 8 + 8 + 2 + 4 + 4 + 8 * 4 + 1 + 1 + 8 + 4 * 3 + 8 * 3;
  CHECK(bytes.size() == header + (16 * 3 + 3) * 8 + 8);
  double dt = 0;
  std::memcpy(&dt, bytes.data() + kDtOffset, 8);
  CHECK(dt == m.dt);

  SUBCASE("truncated by one byte") {
    auto cut = bytes;
    cut.pop_back();
    const auto p = test_support::scratch_file("truncated.db");
    test_support::write_bytes(p, cut);
    CHECK(load_error(p) == ErrorCode::format);
  }
  SUBCASE("trailing byte") {
    auto longer = bytes;
    longer.push_back(0);
    const auto p = test_support::scratch_file("trailing.db");
    test_support::write_bytes(p, longer);
    CHECK(load_error(p) == ErrorCode::format);
  }
  SUBCASE("header edit breaks the checksum") {
    auto edited = bytes;
    edited[kDtOffset] ^= 0x01;
    const auto p = test_support::scratch_file("edited.db");
    test_support::write_bytes(p, edited);
    CHECK(load_error(p) == ErrorCode::checksum);
  }
  SUBCASE("payload edit breaks the checksum") {
    auto edited = bytes;
    edited[header + 5] ^= 0x80;
    const auto p = test_support::scratch_file("payload.db");
    test_support::write_bytes(p, edited);
    CHECK(load_error(p) == ErrorCode::checksum);
  }
  SUBCASE("bad magic and version") {
    auto edited = bytes;
    edited[0] = 'X';
    const auto p = test_support::scratch_file("magic.db");
    test_support::write_bytes(p, edited);
    CHECK(load_error(p) == ErrorCode::format);
    edited = bytes;
    edited[4] = 9;
    test_support::write_bytes(p, edited);
    CHECK(load_error(p) == ErrorCode::format);
  }
  SUBCASE("missing file") {
    CHECK(load_error(test_support::scratch_file("does-not-exist.db")) == ErrorCode::io);
  }
}

TEST_CASE("checksum is FNV-1a 64") {
  const std::vector<std::uint8_t> empty;
  CHECK(checksum64(empty) == 0xcbf29ce484222325ull);
  const std::vector<std::uint8_t> a{'a'};
  CHECK(checksum64(a) == 0xaf63dc4c8601ec8cull);
  const std::vector<std::uint8_t> foobar{'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(checksum64(foobar) == 0x85944171f73967e8ull);
}

TEST_CASE("resampling") {
  SUBCASE("single element support") {
    for (auto i : resample_indices(1, 100, 3)) CHECK(i == 0);
  }
  SUBCASE("range and determinism") {
    const auto a = resample_indices(1000, 100000, 4);
    for (auto i : a) REQUIRE(i < 1000);
    CHECK(a == resample_indices(1000, 100000, 4));
    CHECK(a != resample_indices(1000, 100000, 5));
  }
  SUBCASE("uniform over four paths") {
    const std::size_t n = 100000;
    std::vector<double> counts(4, 0.0);
    for (auto i : resample_indices(4, n, 6)) counts[i] += 1;
    const double expected = n * 0.25, sigma = std::sqrt(n * 0.25 * 0.75);
    double chi2 = 0;
    for (double c : counts) {
      CHECK(std::abs(c - expected) < 4 * sigma);
      chi2 += (c - expected) * (c - expected) / expected;
    }
    CHECK(chi2 < 16.27);  // chi-square(3) 99.9th percentile
  }
  CHECK_THROWS_AS(resample_indices(0, 5, 1), Error);
}

TEST_CASE("database means concentrate like N^-1/2") {
  const LatticeModel m = LatticeModel::with_size(4, 20);
  auto spread = [&](std::uint64_t n_paths, std::uint64_t seed_base) {
    std::vector<double> means;
    for (std::uint64_t r = 0; r < 40; ++r)
      means.push_back(build_database(m, {1.2}, Observable::spacetime, n_paths, seed_base + r).means[0]);
    double mu = 0;
    for (double v : means) mu += v;
    mu /= means.size();
    double var = 0;
    for (double v : means) var += (v - mu) * (v - mu);
    return std::sqrt(var / (means.size() - 1));
  };
  const double ratio = spread(256, 1000) / spread(1024, 2000);
  CHECK(ratio >= 1.6);
  CHECK(ratio <= 2.5);
}

TEST_CASE("database column matches crude samples in distribution") {
  const LatticeModel m = LatticeModel::with_size(8, 50);
  const Database db = build_database(m, {1.2}, Observable::spacetime, 512, 8);
  const ControlledEstimate crude = estimate_crude(m, Observable::spacetime, 1.2, 512, 9);
  double mu = db.means[0], var = 0;
  for (double v : db.controls) var += (v - mu) * (v - mu);
  var /= (db.n_paths - 1);
  // Welch z statistic; |z| < 2.576 is the two-sided 1% level.
  const double z = (mu - crude.estimate) / std::sqrt(var / 512 + crude.sample_variance / 512);
  CHECK(std::abs(z) < 2.576);
}
