#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dbmc {

// Identifies the (counter-based generator, normal transform) pair below. It is
// written into every database file; change it whenever either part changes.
//   1 = xoshiro256++ whose state is four SplitMix64 outputs started from
//       mix_seed(master_seed, path_index); each 64-bit output word feeds a
//       128-layer ziggurat (ZIGNOR variant), extra words drawn on rejection.
inline constexpr std::uint8_t kGeneratorId = 1;

// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_;
};

// The i.i.d. standard-normal sequence for one path. The engine is seeded only
// from (master_seed, path_index), so a path's draws never depend on which other
// streams exist or on execution order.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t master_seed, std::uint64_t path_index);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t path_index() const noexcept { return path_index_; }
  std::uint64_t cursor() const noexcept { return cursor_; }

  double next();

  // Fills `out` with the next out.size() normals in order.
  void fill(std::span<double> out);

 private:
  std::uint64_t master_seed_;
  std::uint64_t path_index_;
  std::uint64_t cursor_ = 0;
  Xoshiro256pp engine_;
};

NoiseStream make_stream(std::uint64_t master_seed, std::uint64_t path_index);

// L*L fresh normals in row-major site order; advances the cursor by L*L.
std::vector<double> draw_noise_field(NoiseStream& stream, std::size_t lattice_size);

// SplitMix64 finalizer applied to seed + golden-ratio * (salt + 1). Used to
// derive independent seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace dbmc
