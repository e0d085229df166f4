#include "dbmc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dbmc/cv.hpp"
#include "dbmc/error.hpp"
#include "dbmc/noise.hpp"
#include "dbmc/parallel.hpp"

namespace dbmc {

namespace {

std::vector<std::size_t> resolve_controls(const CvOptions& options, std::size_t k) {
  if (options.controls.empty()) {
    std::vector<std::size_t> all(k);
    for (std::size_t i = 0; i < k; ++i) all[i] = i;
    return all;
  }
  for (std::size_t i : options.controls)
    if (i >= k)
      throw Error(ErrorCode::invalid_argument,
                  "control index " + std::to_string(i) + " out of range (k=" + std::to_string(k) +
                      ")");
  return options.controls;
}

double observe(const ModelConfig& cfg, Observable observable, NoiseStream stream) {
  return simulate_path(cfg, std::move(stream)).get(observable);
}

// Beta (solved or fixed) and the adjusted mean of Z = y - beta^T (x - mu).
ControlledEstimate finish_controlled(CvSamples samples, const CvOptions& options, Scheme scheme,
                                     double theta) {
  ControlledEstimate out;
  out.scheme = scheme;
  out.theta = theta;
  out.n = samples.n();

  Eigen::VectorXd beta;
  if (options.fixed_beta) {
    if (options.fixed_beta->size() != samples.k())
      throw Error(ErrorCode::invalid_argument, "fixed beta length does not match control count");
    beta = Eigen::Map<const Eigen::VectorXd>(options.fixed_beta->data(),
                                             static_cast<Eigen::Index>(samples.k()));
    if (samples.n() < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 samples");
    out.r_squared = std::numeric_limits<double>::quiet_NaN();
  } else {
    const BetaSolution solution = optimal_beta(samples);
    beta = solution.beta;
    out.r_squared = solution.r_squared;
  }

  const ControlledMean m = controlled_mean(samples, beta);
  out.estimate = m.mean;
  out.sample_variance = m.variance;
  out.std_error = std::sqrt(m.variance / static_cast<double>(out.n));
  out.beta.assign(beta.data(), beta.data() + beta.size());
  return out;
}

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::crude: return "crude";
    case Scheme::i1: return "i1";
    case Scheme::i2: return "i2";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "crude") return Scheme::crude;
  if (name == "i1" || name == "I1") return Scheme::i1;
  if (name == "i2" || name == "I2") return Scheme::i2;
  throw Error(ErrorCode::config, "unknown scheme '" + name + "' (expected crude, i1 or i2)");
}

std::vector<std::string> locality_warnings(double theta, const std::vector<double>& nominals) {
  if (nominals.empty()) return {};
  const auto [lo, hi] = std::minmax_element(nominals.begin(), nominals.end());
  if (theta >= *lo - kLocalityMargin && theta <= *hi + kLocalityMargin) return {};
  std::ostringstream msg;
  msg << "theta=" << theta << " lies outside [" << *lo - kLocalityMargin << ", "
      << *hi + kLocalityMargin << "]; controls are far from the target and VRR may be ~1";
  return {msg.str()};
}

ControlledEstimate estimate_crude(const LatticeModel& model, Observable observable,
                                  double theta, std::size_t n, std::uint64_t seed,
                                  unsigned workers) {
  model.validate();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "crude estimate needs n >= 2");
  const ModelConfig cfg{model, theta};
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  parallel_for(n, workers, [&](std::size_t j) {
    try {
      y[static_cast<Eigen::Index>(j)] = observe(cfg, observable, make_stream(seed, j));
    } catch (const Error& e) {
      throw e.with_context("crude path " + std::to_string(j));
    }
  });
  const SampleMoments m = sample_moments(y);
  ControlledEstimate out;
  out.estimate = m.mean;
  out.sample_variance = m.variance;
  out.std_error = std::sqrt(m.variance / static_cast<double>(n));
  out.r_squared = std::numeric_limits<double>::quiet_NaN();
  out.n = n;
  out.scheme = Scheme::crude;
  out.theta = theta;
  return out;
}

I1Samples resimulate_i1(const Database& db, double theta, std::size_t n,
                        std::uint64_t resample_seed, unsigned workers) {
  if (db.generator_id != kGeneratorId)
    throw Error(ErrorCode::format,
                "database was built with noise generator " + std::to_string(db.generator_id) +
                    " but this build uses " + std::to_string(kGeneratorId) +
                    "; stored inputs cannot be regenerated");
  I1Samples out;
  out.indices = resample_indices(db, n, resample_seed);
  out.y.resize(n);
  const ModelConfig cfg{db.model, theta};
  parallel_for(n, workers, [&](std::size_t j) {
    const std::uint64_t index = out.indices[j];
    try {
      out.y[j] = observe(cfg, db.observable, make_stream(db.master_seed, index));
    } catch (const Error& e) {
      throw e.with_context("re-simulating database path " + std::to_string(index));
    }
  });
  return out;
}

ControlledEstimate controlled_from_i1(const Database& db, double theta,
                                      const I1Samples& samples, const CvOptions& options) {
  const std::vector<std::size_t> controls = resolve_controls(options, db.k());
  const std::size_t n = samples.y.size();
  const std::size_t k = controls.size();
  CvSamples cv;
  cv.y = Eigen::Map<const Eigen::VectorXd>(samples.y.data(), static_cast<Eigen::Index>(n));
  cv.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  cv.mu.resize(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    cv.mu[static_cast<Eigen::Index>(c)] = db.means[controls[c]];
    for (std::size_t j = 0; j < n; ++j)
      cv.x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
          db.control(samples.indices[j], controls[c]);
  }
  ControlledEstimate out = finish_controlled(std::move(cv), options, Scheme::i1, theta);
  std::vector<double> used;
  for (std::size_t i : controls) used.push_back(db.nominals[i]);
  out.warnings = locality_warnings(theta, used);
  return out;
}

ControlledEstimate estimate_cv_i1(const Database& db, double theta, std::size_t n,
                                  std::uint64_t resample_seed, const CvOptions& options) {
  const std::size_t k = resolve_controls(options, db.k()).size();
  if (n < k + 2)
    throw Error(ErrorCode::invalid_argument, "i1 estimate needs n >= k + 2");
  const I1Samples samples = resimulate_i1(db, theta, n, resample_seed, options.workers);
  return controlled_from_i1(db, theta, samples, options);
}

ControlledEstimate estimate_cv_i2(const LatticeModel& model, Observable observable,
                                  double theta, const std::vector<double>& nominals,
                                  const std::vector<double>& means, std::size_t n,
                                  std::uint64_t seed, const CvOptions& options) {
  model.validate();
  if (nominals.size() != means.size())
    throw Error(ErrorCode::invalid_argument, "nominals and means differ in length");
  const std::vector<std::size_t> controls = resolve_controls(options, nominals.size());
  const std::size_t k = controls.size();
  if (n < k + 2) throw Error(ErrorCode::invalid_argument, "i2 estimate needs n >= k + 2");

  CvSamples cv;
  cv.y.resize(static_cast<Eigen::Index>(n));
  cv.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  cv.mu.resize(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) cv.mu[static_cast<Eigen::Index>(c)] = means[controls[c]];

  parallel_for(n, options.workers, [&](std::size_t j) {
    const auto row = static_cast<Eigen::Index>(j);
    try {
      // Each path replays stream (seed, j) from the start: identical w, full
      // cost per simulated parameter.
      cv.y[row] = observe(ModelConfig{model, theta}, observable, make_stream(seed, j));
      for (std::size_t c = 0; c < k; ++c)
        cv.x(row, static_cast<Eigen::Index>(c)) =
            observe(ModelConfig{model, nominals[controls[c]]}, observable, make_stream(seed, j));
    } catch (const Error& e) {
      throw e.with_context("i2 path " + std::to_string(j));
    }
  });

  ControlledEstimate out = finish_controlled(std::move(cv), options, Scheme::i2, theta);
  std::vector<double> used;
  for (std::size_t i : controls) used.push_back(nominals[i]);
  out.warnings = locality_warnings(theta, used);
  return out;
}

}  // namespace dbmc
