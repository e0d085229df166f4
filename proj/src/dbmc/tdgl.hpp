#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbmc/noise.hpp"

namespace dbmc {

enum class Boundary : std::uint8_t { periodic = 0 };

enum class InitialKind : std::uint8_t { zero = 0, constant = 1 };

struct InitialCondition {
  InitialKind kind = InitialKind::zero;
  double value = 0.0;  // used when kind == constant

  bool operator==(const InitialCondition&) const = default;
};

// The three path observables. The numeric values are the on-disk encoding.
enum class Observable : std::uint8_t { point = 1, total_at_t = 2, spacetime = 3 };

std::string to_string(Observable kind);
Observable observable_from_string(const std::string& name);  // "p1" | "p2" | "p3"

struct Site {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  bool operator==(const Site&) const = default;
};

// Everything about a run except the parameter theta. A database stores one of
// these and shares it across all nominal parameters.
struct LatticeModel {
  double chi = 1.0;
  double diffusion = 1.0;
  double dt = 0.01;
  double dx = 1.0;
  std::uint32_t lattice_size = 16;
  std::uint32_t n_steps = 1000;
  Boundary boundary = Boundary::periodic;
  InitialCondition initial;
  Site point_site{8, 8};
  std::uint32_t point_time_step = 1000;

  // Lattice centre for the point site and the final step for evaluation.
  static LatticeModel with_size(std::uint32_t lattice_size, std::uint32_t n_steps);

  // Throws Error(config) naming the offending field.
  void validate() const;

  bool operator==(const LatticeModel&) const = default;
};

struct ModelConfig {
  LatticeModel model;
  double theta = 1.2;
};

class LatticeField {
 public:
  LatticeField() = default;
  explicit LatticeField(std::size_t size, double fill = 0.0)
      : size_(size), values_(size * size, fill) {}
  LatticeField(std::size_t size, std::vector<double> values);

  std::size_t size() const noexcept { return size_; }
  double& at(std::size_t row, std::size_t col) { return values_[row * size_ + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * size_ + col]; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double total() const;
  bool all_finite() const;

  bool operator==(const LatticeField&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<double> values_;
};

struct ObservableRecord {
  double point_mag = 0.0;       // phi at point_site, point_time_step
  double total_mag_at_t = 0.0;  // sum_x phi at point_time_step
  double spacetime_mag = 0.0;   // sum over steps 0..T of sum_x phi

  double get(Observable kind) const;

  bool operator==(const ObservableRecord&) const = default;
};

// Five-point periodic Laplacian.
LatticeField laplacian_5pt(const LatticeField& field, double dx);

// V'(phi) for V(phi) = -theta/2 phi^2 + chi/4 phi^4.
inline double potential_force(double phi, double theta, double chi) {
  return -theta * phi + chi * phi * phi * phi;
}

// One forward Euler-Maruyama step. Throws Error(blow_up) on a non-finite site.
LatticeField euler_step(const LatticeField& field, const ModelConfig& cfg,
                        std::span<const double> noise);

// Runs one path. Deterministic in (cfg, stream seed, stream path index).
ObservableRecord simulate_path(const ModelConfig& cfg, NoiseStream stream);

// Runs one path per theta, all driven by the same noise sequence drawn once per
// step. Element i is bitwise identical to simulate_path at thetas[i].
std::vector<ObservableRecord> simulate_paths(const LatticeModel& model,
                                             std::span<const double> thetas,
                                             NoiseStream stream);

}  // namespace dbmc
