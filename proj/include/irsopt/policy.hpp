#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/mlp.hpp"

namespace irsopt {

inline constexpr double kLogStdMin = -6.907755278982137;  // log(1e-3)
inline constexpr double kLogStdMax = 0.6931471805599453;  // log(2)
inline constexpr double kHalfLog2Pi = 0.9189385332046727;

// Per-dimension open interval the raw policy output is squashed onto.
struct BoundedBox {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
  void validate() const {
    if (lo.size() != hi.size()) throw std::invalid_argument("box size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("box bounds inverted");
  }
};

inline double logistic(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u))
                  : std::exp(u) / (1.0 + std::exp(u));
}

inline double log_logistic(double u) {
  return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
}

// Smooth bijection from the real line onto (lo, hi).
inline double squash(double u, double lo, double hi) {
  return lo + (hi - lo) * logistic(u);
}

inline double unsquash(double a, double lo, double hi) {
  const double s = (a - lo) / (hi - lo);
  if (!(s > 0.0 && s < 1.0))
    throw std::domain_error("value outside the open action box");
  return std::log(s) - std::log1p(-s);
}

// log of d squash / d u, needed for the density of the squashed variable.
inline double squash_log_jacobian(double u, double lo, double hi) {
  return std::log(hi - lo) + log_logistic(u) + log_logistic(-u);
}

inline std::vector<double> squash(std::span<const double> u, const BoundedBox& box) {
  if (u.size() != box.dim()) throw std::invalid_argument("box dimension mismatch");
  std::vector<double> a(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) a[i] = squash(u[i], box.lo[i], box.hi[i]);
  return a;
}

// Diagonal Gaussian log-density in the unconstrained (pre-squash) space.
inline double gaussian_log_prob(std::span<const double> mean,
                                std::span<const double> log_std,
                                std::span<const double> action_raw) {
  if (mean.size() != log_std.size() || mean.size() != action_raw.size())
    throw std::invalid_argument("gaussian_log_prob shape mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sigma = std::exp(log_std[i]);
    const double z = (action_raw[i] - mean[i]) / sigma;
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

// Log-density of the squashed action itself; the change-of-variables term
// makes this integrate to one over the action box.
inline double squashed_log_prob(std::span<const double> mean,
                                std::span<const double> log_std,
                                std::span<const double> action_raw,
                                const BoundedBox& box) {
  double lp = gaussian_log_prob(mean, log_std, action_raw);
  for (std::size_t i = 0; i < action_raw.size(); ++i)
    lp -= squash_log_jacobian(action_raw[i], box.lo[i], box.hi[i]);
  return lp;
}

// Gaussian policy head: network mean plus state-independent log standard
// deviations, clamped to [log 1e-3, log 2].
struct GaussianPolicy {
  Mlp net;
  std::vector<double> log_std;

  GaussianPolicy() = default;
  GaussianPolicy(const std::vector<int>& dims, std::uint64_t seed,
                 double initial_std = 0.5)
      : net(dims, seed, 0.01),
        log_std(static_cast<std::size_t>(dims.back()),
                std::clamp(std::log(initial_std), kLogStdMin, kLogStdMax)) {}

  int action_dim() const { return net.output_dim(); }

  std::vector<double> sample_raw(std::span<const double> mean,
                                 std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i)
      u[i] = mean[i] + std::exp(log_std[i]) * normal(rng);
    return u;
  }

  void clamp_log_std() {
    for (double& v : log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
  }

  nlohmann::json to_json() const {
    return {{"net", net.to_json()}, {"log_std", log_std}};
  }
  static GaussianPolicy from_json(const nlohmann::json& j) {
    GaussianPolicy p;
    p.net = Mlp::from_json(j.at("net"));
    p.log_std = j.at("log_std").get<std::vector<double>>();
    if (static_cast<int>(p.log_std.size()) != p.net.output_dim())
      throw std::invalid_argument("log_std size does not match network output");
    return p;
  }
};

// d log N(u; mean, sigma) / d mean_i
inline std::vector<double> gaussian_dlogp_dmean(std::span<const double> mean,
                                                std::span<const double> log_std,
                                                std::span<const double> u) {
  std::vector<double> g(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double var = std::exp(2.0 * log_std[i]);
    g[i] = (u[i] - mean[i]) / var;
  }
  return g;
}

// d log N(u; mean, sigma) / d log_std_i
inline std::vector<double> gaussian_dlogp_dlogstd(std::span<const double> mean,
                                                  std::span<const double> log_std,
                                                  std::span<const double> u) {
  std::vector<double> g(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sigma = std::exp(log_std[i]);
    const double z = (u[i] - mean[i]) / sigma;
    g[i] = z * z - 1.0;
  }
  return g;
}

}  // namespace irsopt
