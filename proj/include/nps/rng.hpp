#ifndef NPS_RNG_HPP
#define NPS_RNG_HPP

// Deterministic, platform-independent random numbers: xoshiro256++ seeded
// through splitmix64, uniforms built from the top 53 bits, and normals by
// inversion so that sequences are bit-reproducible everywhere.

#include <cstdint>

namespace nps {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream for a replicate index, derived counter-style from the
  // master seed; the mapping does not depend on call order.
  static Rng stream(std::uint64_t master_seed, std::uint64_t index);

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1).
  double uniform();

  // Standard normal via inversion of uniform().
  double normal();

 private:
  std::uint64_t s_[4];
};

}  // namespace nps

#endif
