#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dbmc/tdgl.hpp"

namespace dbmc {

inline constexpr std::uint16_t kDatabaseFormatVersion = 1;

// Setup-stage output: control values X_i(w_j) = Y(w_j; theta_i) for every
// stored input w_j, addressed by (master_seed, j), plus the database means.
struct Database {
  std::uint64_t master_seed = 0;
  std::uint8_t generator_id = 0;
  LatticeModel model;
  std::vector<double> nominals;
  Observable observable = Observable::spacetime;
  std::uint64_t n_paths = 0;
  std::vector<double> controls;  // row-major n_paths x k
  std::vector<double> means;     // k

  std::size_t k() const noexcept { return nominals.size(); }
  double control(std::size_t path, std::size_t i) const { return controls[path * k() + i]; }

  // Shapes, finiteness, strictly increasing nominals, generator id.
  void validate() const;

  bool operator==(const Database&) const = default;
};

// Column averages, summed in row order.
std::vector<double> column_means(std::span<const double> controls, std::size_t n_paths,
                                 std::size_t k);

// For every path j the k nominal paths share the noise of stream
// (master_seed, j). Output is independent of `workers`.
Database build_database(const LatticeModel& model, std::vector<double> nominals,
                        Observable observable, std::uint64_t n_paths,
                        std::uint64_t master_seed, unsigned workers = 1);

std::vector<std::uint8_t> serialize_database(const Database& db);
Database deserialize_database(std::span<const std::uint8_t> bytes);

// Throws Error(io) on filesystem failures, Error(format) on a malformed file
// and Error(checksum) when the trailer does not match.
void save_database(const Database& db, const std::filesystem::path& path);
Database load_database(const std::filesystem::path& path);

// FNV-1a, 64-bit.
std::uint64_t checksum64(std::span<const std::uint8_t> bytes);

// n indices i.i.d. uniform on [0, n_paths), deterministic in seed.
std::vector<std::uint64_t> resample_indices(std::uint64_t n_paths, std::size_t n,
                                            std::uint64_t seed);
std::vector<std::uint64_t> resample_indices(const Database& db, std::size_t n,
                                            std::uint64_t seed);

}  // namespace dbmc
