#include "dbmc/tdgl.hpp"

#include <cmath>
#include <utility>

#include "dbmc/error.hpp"

namespace dbmc {

namespace {

struct StepCoefficients {
  double theta;
  double chi;
  double diffusion_dt;  // D * dt
  double dt;
  double inv_dx2;
  double noise_amplitude;  // sqrt(2 dt / dx)

  StepCoefficients(const LatticeModel& m, double theta_)
      : theta(theta_),
        chi(m.chi),
        diffusion_dt(m.diffusion * m.dt),
        dt(m.dt),
        inv_dx2(1.0 / (m.dx * m.dx)),
        noise_amplitude(std::sqrt(2.0 * (m.dt / m.dx))) {}
};

inline double update_site(double center, double neighbours, double noise,
                          const StepCoefficients& c) {
  const double laplacian = (neighbours - 4.0 * center) * c.inv_dx2;
  return center + c.diffusion_dt * laplacian -
         c.dt * potential_force(center, c.theta, c.chi) + c.noise_amplitude * noise;
}

// The single update kernel shared by every code path, so that a path stepped
// alone and a path stepped alongside others agree bit for bit. Returns the
// row-major sum of the updated field.
double step_kernel(const double* in, double* out, const double* noise, std::size_t L,
                   const StepCoefficients& c) {
  double total = 0.0;
  for (std::size_t r = 0; r < L; ++r) {
    const double* row = in + r * L;
    const double* up = in + ((r + L - 1) % L) * L;
    const double* down = in + ((r + 1) % L) * L;
    const double* row_noise = noise + r * L;
    double* row_out = out + r * L;

    row_out[0] = update_site(row[0], up[0] + down[0] + row[L - 1] + row[1], row_noise[0], c);
    for (std::size_t col = 1; col + 1 < L; ++col) {
      row_out[col] = update_site(row[col], up[col] + down[col] + row[col - 1] + row[col + 1],
                                 row_noise[col], c);
    }
    row_out[L - 1] = update_site(row[L - 1], up[L - 1] + down[L - 1] + row[L - 2] + row[0],
                                 row_noise[L - 1], c);
    for (std::size_t col = 0; col < L; ++col) total += row_out[col];
  }
  return total;
}

double row_major_sum(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

[[noreturn]] void throw_blow_up(std::uint32_t step, double theta) {
  throw Error(ErrorCode::blow_up, "non-finite field at step " + std::to_string(step) +
                                      " (theta=" + std::to_string(theta) + ")");
}

}  // namespace

std::string to_string(Observable kind) {
  switch (kind) {
    case Observable::point: return "p1";
    case Observable::total_at_t: return "p2";
    case Observable::spacetime: return "p3";
  }
  return "unknown";
}

Observable observable_from_string(const std::string& name) {
  if (name == "p1" || name == "P1" || name == "point") return Observable::point;
  if (name == "p2" || name == "P2" || name == "total") return Observable::total_at_t;
  if (name == "p3" || name == "P3" || name == "spacetime") return Observable::spacetime;
  throw Error(ErrorCode::config, "unknown observable '" + name + "' (expected p1, p2 or p3)");
}

LatticeModel LatticeModel::with_size(std::uint32_t lattice_size, std::uint32_t n_steps) {
  LatticeModel m;
  m.lattice_size = lattice_size;
  m.n_steps = n_steps;
  m.point_site = {lattice_size / 2, lattice_size / 2};
  m.point_time_step = n_steps;
  return m;
}

void LatticeModel::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("model.dt must be positive");
  if (!(dx > 0.0) || !std::isfinite(dx)) fail("model.dx must be positive");
  if (!std::isfinite(chi)) fail("model.chi must be finite");
  if (!std::isfinite(diffusion)) fail("model.diffusion must be finite");
  if (lattice_size < 2) fail("model.lattice_size must be at least 2");
  if (n_steps < 1) fail("model.n_steps must be at least 1");
  if (point_site.row >= lattice_size || point_site.col >= lattice_size)
    fail("model.point_site must lie inside the lattice");
  if (point_time_step > n_steps) fail("model.point_time_step must not exceed model.n_steps");
  if (initial.kind == InitialKind::constant && !std::isfinite(initial.value))
    fail("model.initial_value must be finite");
}

LatticeField::LatticeField(std::size_t size, std::vector<double> values)
    : size_(size), values_(std::move(values)) {
  if (values_.size() != size_ * size_)
    throw Error(ErrorCode::invalid_argument, "field values do not match lattice size");
}

double LatticeField::total() const { return row_major_sum(values_); }

bool LatticeField::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double ObservableRecord::get(Observable kind) const {
  switch (kind) {
    case Observable::point: return point_mag;
    case Observable::total_at_t: return total_mag_at_t;
    case Observable::spacetime: return spacetime_mag;
  }
  throw Error(ErrorCode::invalid_argument, "unknown observable");
}

LatticeField laplacian_5pt(const LatticeField& field, double dx) {
  const std::size_t L = field.size();
  const double inv_dx2 = 1.0 / (dx * dx);
  LatticeField out(L);
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < L; ++c) {
      const double neighbours = field.at((r + L - 1) % L, c) + field.at((r + 1) % L, c) +
                                field.at(r, (c + L - 1) % L) + field.at(r, (c + 1) % L);
      out.at(r, c) = (neighbours - 4.0 * field.at(r, c)) * inv_dx2;
    }
  }
  return out;
}

LatticeField euler_step(const LatticeField& field, const ModelConfig& cfg,
                        std::span<const double> noise) {
  const std::size_t L = field.size();
  if (noise.size() != L * L)
    throw Error(ErrorCode::invalid_argument, "noise field does not match lattice size");
  if (L < 2) throw Error(ErrorCode::invalid_argument, "lattice size must be at least 2");
  LatticeField out(L);
  step_kernel(field.values().data(), out.values().data(), noise.data(), L,
              StepCoefficients(cfg.model, cfg.theta));
  if (!out.all_finite()) throw_blow_up(1, cfg.theta);
  return out;
}

ObservableRecord simulate_path(const ModelConfig& cfg, NoiseStream stream) {
  const double theta[] = {cfg.theta};
  return simulate_paths(cfg.model, theta, std::move(stream)).front();
}

std::vector<ObservableRecord> simulate_paths(const LatticeModel& model,
                                             std::span<const double> thetas,
                                             NoiseStream stream) {
  const std::size_t L = model.lattice_size;
  const std::size_t sites = L * L;
  const std::size_t k = thetas.size();
  const std::size_t point = model.point_site.row * L + model.point_site.col;

  const double initial_value =
      model.initial.kind == InitialKind::constant ? model.initial.value : 0.0;

  std::vector<StepCoefficients> coefficients;
  coefficients.reserve(k);
  for (double theta : thetas) coefficients.emplace_back(model, theta);

  // Two buffers per path, swapped every step.
  std::vector<double> current(k * sites, initial_value);
  std::vector<double> next(k * sites);
  std::vector<double> noise(sites);
  std::vector<ObservableRecord> records(k);

  const double initial_total = row_major_sum(std::span<const double>(current).first(sites));
  for (std::size_t i = 0; i < k; ++i) {
    records[i].spacetime_mag = initial_total;
    if (model.point_time_step == 0) {
      records[i].point_mag = current[i * sites + point];
      records[i].total_mag_at_t = initial_total;
    }
  }

  for (std::uint32_t step = 1; step <= model.n_steps; ++step) {
    stream.fill(noise);
    for (std::size_t i = 0; i < k; ++i) {
      const double total = step_kernel(current.data() + i * sites, next.data() + i * sites,
                                       noise.data(), L, coefficients[i]);
      if (!std::isfinite(total)) throw_blow_up(step, thetas[i]);
      records[i].spacetime_mag += total;
      if (step == model.point_time_step) {
        records[i].point_mag = next[i * sites + point];
        records[i].total_mag_at_t = total;
      }
    }
    current.swap(next);
  }
  return records;
}

}  // namespace dbmc
