#include "dbmc/noise.hpp"

#include <array>
#include <cmath>

namespace dbmc {

namespace {

// Ziggurat tables for the standard normal, 128 layers (Doornik's ZIGNOR).
constexpr int kZigLayers = 128;
constexpr double kZigR = 3.442619855899;
constexpr double kZigArea = 9.91256303526217e-3;

struct ZigguratTables {
  std::array<double, kZigLayers + 1> x{};
  std::array<double, kZigLayers> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kZigR * kZigR);
    x[0] = kZigArea / f;
    x[1] = kZigR;
    x[kZigLayers] = 0.0;
    for (int i = 2; i < kZigLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kZigArea / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kZigLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const ZigguratTables kZig;

// [-1, 1) from the top 53 bits.
inline double signed_unit(std::uint64_t word) {
  return 2.0 * (static_cast<double>(word >> 11) * 0x1.0p-53) - 1.0;
}

// (0, 1], so logarithms stay finite.
inline double open_closed_unit(std::uint64_t word) {
  return static_cast<double>((word >> 11) + 1) * 0x1.0p-53;
}

double normal_tail(bool negative, Xoshiro256pp& engine) {
  double x, y;
  do {
    x = std::log(open_closed_unit(engine())) / kZigR;
    y = std::log(open_closed_unit(engine()));
  } while (-2.0 * y < x * x);
  return negative ? x - kZigR : kZigR - x;
}

// Top 53 bits of a word give the signed uniform, the low 7 bits the layer.
inline double ziggurat_normal(Xoshiro256pp& engine) {
  for (;;) {
    const std::uint64_t word = engine();
    const double u = signed_unit(word);
    const int layer = static_cast<int>(word & 0x7F);
    if (std::fabs(u) < kZig.ratio[layer]) return u * kZig.x[layer];
    if (layer == 0) return normal_tail(u < 0.0, engine);
    const double x = u * kZig.x[layer];
    const double f0 = std::exp(-0.5 * (kZig.x[layer] * kZig.x[layer] - x * x));
    const double f1 = std::exp(-0.5 * (kZig.x[layer + 1] * kZig.x[layer + 1] - x * x));
    if (f1 + open_closed_unit(engine()) * (f0 - f1) < 1.0) return x;
  }
}

}  // namespace

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
  // SplitMix64 stream from `seed`; never all-zero in practice.
  for (auto& word : s_) {
    seed += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = seed;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    word = z ^ (z >> 31);
  }
}

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t path_index)
    : master_seed_(master_seed),
      path_index_(path_index),
      engine_(mix_seed(master_seed, path_index)) {}

double NoiseStream::next() {
  ++cursor_;
  return ziggurat_normal(engine_);
}

void NoiseStream::fill(std::span<double> out) {
  for (double& v : out) v = ziggurat_normal(engine_);
  cursor_ += out.size();
}

NoiseStream make_stream(std::uint64_t master_seed, std::uint64_t path_index) {
  return NoiseStream(master_seed, path_index);
}

std::vector<double> draw_noise_field(NoiseStream& stream, std::size_t lattice_size) {
  std::vector<double> field(lattice_size * lattice_size);
  stream.fill(field);
  return field;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace dbmc
