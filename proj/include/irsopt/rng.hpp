#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace irsopt {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Purpose tags for deriving independent substreams from one master seed.
// Keeping geometry / direct fading / reflective fading on separate streams
// means two scenarios that share a seed also share device placements and
// direct channels even when the element count differs.
enum class StreamPurpose : std::uint64_t {
  kGeometry = 1,
  kDirectFading = 2,
  kReflectiveFading = 3,
  kPolicy = 4,
  kExploration = 5,
  kShuffle = 6,
  kEvaluation = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a decorrelated stream from (seed, episode, purpose).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t episode,
                                   StreamPurpose purpose) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ (0x632be59bd9b4e019ULL * (episode + 1)));
  s = splitmix64(s ^ static_cast<std::uint64_t>(purpose));
  return std::mt19937_64{s};
}

inline double uniform_phase(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, kTwoPi);
  return dist(rng);
}

// Zero-mean unit-variance circularly symmetric complex Gaussian.
inline std::complex<double> complex_gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::numbers::sqrt2 / 2.0);
  const double re = dist(rng);
  const double im = dist(rng);
  return {re, im};
}

// Nakagami-m amplitude with unit mean-square: |h|^2 ~ Gamma(m, 1/m).
inline double nakagami_amplitude(double m, std::mt19937_64& rng) {
  std::gamma_distribution<double> dist(m, 1.0 / m);
  return std::sqrt(dist(rng));
}

}  // namespace irsopt
