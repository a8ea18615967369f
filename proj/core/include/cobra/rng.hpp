#ifndef COBRA_RNG_HPP
#define COBRA_RNG_HPP

#include <cmath>
#include <cstdint>

// Counter-based random number generation. Every draw is a pure function of
// (seed, counter), so weight initialization is reproducible bit-for-bit from
// the seed alone, independent of call order or thread count. The scheme is
// small enough to re-implement anywhere:
//
//   word(seed, i)    = splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
//   uniform(seed, i) = ((word >> 11) + 0.5) * 2^-53          in (0, 1)
//   normal(seed, i)  = sqrt(-2 ln u1) * cos(2 pi u2)
//                      with u1 = uniform(seed, 2i), u2 = uniform(seed, 2i+1)
//
// splitmix64 is the finalizer from Steele et al.'s SplittableRandom.

namespace cobra::rng {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline uint64_t word(uint64_t seed, uint64_t counter) {
    return splitmix64(seed + (counter + 1) * 0x9E3779B97F4A7C15ULL);
}

// Uniform in the open interval (0, 1); never 0, so log() below is safe.
inline double uniform01(uint64_t seed, uint64_t counter) {
    return (static_cast<double>(word(seed, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// i-th standard normal draw (Box-Muller, cosine branch).
inline double normal(uint64_t seed, uint64_t index) {
    const double u1 = uniform01(seed, 2 * index);
    const double u2 = uniform01(seed, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace cobra::rng

#endif
