#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "irsopt/rng.hpp"

namespace irsopt {

struct Position3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double distance(const Position3& a, const Position3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Uniform over the area of a disk of the given radius, centered at (cx, cy), z = 0.
inline Position3 sample_in_disk(double cx, double cy, double radius,
                                std::mt19937_64& rng) {
  if (radius <= 0.0) throw std::invalid_argument("disk radius must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double phi = uniform_phase(rng);
  return {cx + r * std::cos(phi), cy + r * std::sin(phi), 0.0};
}

// Uniform over the area of the annulus [r_min, r_max] around (cx, cy), z = 0.
inline Position3 sample_in_annulus(double cx, double cy, double r_min,
                                   double r_max, std::mt19937_64& rng) {
  if (r_min < 0.0 || r_max <= r_min)
    throw std::invalid_argument("annulus radii must satisfy 0 <= r_min < r_max");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const double r = std::sqrt(r_min * r_min + u * (r_max * r_max - r_min * r_min));
  const double phi = uniform_phase(rng);
  return {cx + r * std::cos(phi), cy + r * std::sin(phi), 0.0};
}

}  // namespace irsopt
