#pragma once

#include <cmath>
#include <cstdint>

namespace zeno {

// splitmix64: tiny state, standard-free, identical on every platform. Used as
// the per-isochromat stream so results cannot depend on how members are
// scheduled across workers.
struct RngStream {
  std::uint64_t state = 0;
};

inline std::uint64_t next_u64(RngStream& s) {
  std::uint64_t z = (s.state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline RngStream member_stream(std::uint64_t seed, std::uint64_t index,
                               std::uint64_t domain = 0) {
  RngStream mix{seed};
  std::uint64_t s = next_u64(mix);
  mix.state = s ^ (0xBF58476D1CE4E5B9ull * (index + 1)) ^
              (0x94D049BB133111EBull * (domain + 1));
  return RngStream{next_u64(mix)};
}

// uniform in (0,1): 53-bit mantissa shifted off zero.
inline double uniform(RngStream& s) {
  return (static_cast<double>(next_u64(s) >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller with one variate per call; no cached state, so draw order is the
// only thing that matters for reproducibility.
inline double gaussian(RngStream& s) {
  const double u1 = uniform(s);
  const double u2 = uniform(s);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace zeno
