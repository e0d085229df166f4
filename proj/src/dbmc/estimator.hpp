#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbmc/database.hpp"
#include "dbmc/tdgl.hpp"

namespace dbmc {

enum class Scheme : std::uint8_t { crude = 0, i1 = 1, i2 = 2 };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct ControlledEstimate {
  double estimate = 0.0;
  std::vector<double> beta;  // empty for crude
  double sample_variance = 0.0;
  double std_error = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
  Scheme scheme = Scheme::crude;
  double theta = 0.0;
  std::vector<std::string> warnings;
};

struct CvOptions {
  // Indices into the nominal list; empty selects every control.
  std::vector<std::size_t> controls;
  // Skips the beta solve and uses this vector instead.
  std::optional<std::vector<double>> fixed_beta;
  unsigned workers = 1;
};

// Half-width of the theta window around the nominals outside which a locality
// warning is attached to the estimate.
inline constexpr double kLocalityMargin = 0.5;

ControlledEstimate estimate_crude(const LatticeModel& model, Observable observable,
                                  double theta, std::size_t n, std::uint64_t seed,
                                  unsigned workers = 1);

// Resamples n stored inputs, re-simulates them at theta from their stream
// addresses and controls with the stored values and database means.
ControlledEstimate estimate_cv_i1(const Database& db, double theta, std::size_t n,
                                  std::uint64_t resample_seed, const CvOptions& options = {});

// Fresh inputs from streams (seed, j); each input is simulated once at theta
// and once per nominal, so a sample costs k + 1 path simulations.
ControlledEstimate estimate_cv_i2(const LatticeModel& model, Observable observable,
                                  double theta, const std::vector<double>& nominals,
                                  const std::vector<double>& means, std::size_t n,
                                  std::uint64_t seed, const CvOptions& options = {});

// Building blocks shared with the sweep harness, which reuses one set of
// re-simulated samples for several control subsets.
struct I1Samples {
  std::vector<std::uint64_t> indices;
  std::vector<double> y;  // Y(w_index; theta)
};

I1Samples resimulate_i1(const Database& db, double theta, std::size_t n,
                        std::uint64_t resample_seed, unsigned workers = 1);

ControlledEstimate controlled_from_i1(const Database& db, double theta,
                                      const I1Samples& samples, const CvOptions& options);

std::vector<std::string> locality_warnings(double theta, const std::vector<double>& nominals);

}  // namespace dbmc
