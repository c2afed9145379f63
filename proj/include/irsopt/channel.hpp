#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/geometry.hpp"
#include "irsopt/rng.hpp"

namespace irsopt {

using Complex = std::complex<double>;

// Large-scale and small-scale fading parameters shared by all links.
struct PathLossParams {
  double beta0 = 1e-3;       // power gain at the 1 m reference distance (linear)
  double kappa0 = 2.5;       // path-loss exponent, direct / LoS
  double kappa1 = 3.6;       // path-loss exponent, NLoS
  double rician_beta1 = 4.0; // Rician K-factor (linear)
  double nakagami_m = 2.0;   // fading severity, >= 0.5

  void validate() const {
    if (!(beta0 > 0.0)) throw std::invalid_argument("beta0 must be positive");
    if (!(kappa0 > 0.0) || !(kappa1 > 0.0))
      throw std::invalid_argument("path-loss exponents must be positive");
    if (rician_beta1 < 0.0)
      throw std::invalid_argument("rician_beta1 must be non-negative");
    if (!(nakagami_m >= 0.5))
      throw std::invalid_argument("nakagami_m must be >= 0.5");
  }
};

// Unit-amplitude phase configuration of the reflecting elements.
struct PhaseShiftVector {
  std::vector<double> theta;  // radians, each in [0, 2*pi]
  std::vector<double> eta;    // amplitudes, fixed to 1

  static PhaseShiftVector zeros(std::size_t k) {
    PhaseShiftVector v;
    v.theta.assign(k, 0.0);
    v.eta.assign(k, 1.0);
    return v;
  }

  void validate() const {
    if (theta.size() != eta.size())
      throw std::invalid_argument("theta/eta length mismatch");
    for (double t : theta)
      if (!(t >= 0.0 && t <= kTwoPi))
        throw std::domain_error("phase shift outside [0, 2*pi]");
  }
};

// Direct Tx->Rx link: Nakagami-m envelope with uniform phase over a
// beta0 * d^-kappa0 power law. Mean square magnitude equals the power law.
inline Complex sample_direct_channel(double d, const PathLossParams& p,
                                     std::mt19937_64& rng) {
  if (!(d > 0.0)) throw std::domain_error("direct link distance must be positive");
  const double amp = nakagami_amplitude(p.nakagami_m, rng);
  const double phase = uniform_phase(rng);
  const double scale = std::sqrt(p.beta0 * std::pow(d, -p.kappa0));
  return std::polar(amp * scale, phase);
}

// One reflecting element of the Tx->panel->Rx path: Rician mixture of a
// random-phase LoS term over the product distance and a complex-Gaussian
// NLoS term with its own exponent.
inline Complex sample_reflective_channel(double d_tx_irs, double d_irs_rx,
                                         const PathLossParams& p,
                                         std::mt19937_64& rng) {
  if (!(d_tx_irs > 0.0) || !(d_irs_rx > 0.0))
    throw std::domain_error("reflective link distances must be positive");
  const double prod = d_tx_irs * d_irs_rx;
  const double los_amp = std::sqrt(p.beta0 * std::pow(prod, -p.kappa0));
  const Complex los = std::polar(los_amp, -uniform_phase(rng));
  const double nlos_amp = std::sqrt(p.beta0 * std::pow(prod, -p.kappa1));
  const Complex nlos = nlos_amp * complex_gaussian(rng);
  const double w_los = std::sqrt(p.rician_beta1 / (1.0 + p.rician_beta1));
  const double w_nlos = std::sqrt(1.0 / (1.0 + p.rician_beta1));
  return w_los * los + w_nlos * nlos;
}

// Mean |.|^2 of sample_direct_channel at distance d.
inline double direct_mean_power(double d, const PathLossParams& p) {
  return p.beta0 * std::pow(d, -p.kappa0);
}

// Mean |.|^2 of sample_reflective_channel for one element.
inline double reflective_mean_power(double d_tx_irs, double d_irs_rx,
                                    const PathLossParams& p) {
  const double prod = d_tx_irs * d_irs_rx;
  const double los = p.beta0 * std::pow(prod, -p.kappa0);
  const double nlos = p.beta0 * std::pow(prod, -p.kappa1);
  const double b1 = p.rician_beta1;
  return b1 / (1.0 + b1) * los + 1.0 / (1.0 + b1) * nlos;
}

// Combined channel seen by a receiver: direct path plus the phase-steered
// sum over the reflecting elements.
inline Complex effective_channel(Complex direct,
                                 std::span<const Complex> reflective_elements,
                                 const PhaseShiftVector& phi) {
  if (reflective_elements.size() != phi.theta.size())
    throw std::invalid_argument("element count does not match phase vector");
  Complex sum = direct;
  for (std::size_t k = 0; k < reflective_elements.size(); ++k)
    sum += reflective_elements[k] * phi.eta[k] * std::polar(1.0, phi.theta[k]);
  return sum;
}

// One fading draw for every ordered Tx->Rx pair: direct coefficients plus
// per-element reflective coefficients. Row index = transmitter, column
// index = receiver.
struct ChannelRealization {
  int n_pairs = 0;
  int n_elements = 0;
  std::vector<Complex> direct;      // n_pairs * n_pairs, row-major
  std::vector<Complex> reflective;  // n_pairs * n_pairs * n_elements
  long valid_for_step = 0;

  Complex direct_at(int tx, int rx) const {
    return direct[static_cast<std::size_t>(tx) * n_pairs + rx];
  }
  std::span<const Complex> reflective_at(int tx, int rx) const {
    const std::size_t off =
        (static_cast<std::size_t>(tx) * n_pairs + rx) * n_elements;
    return {reflective.data() + off, static_cast<std::size_t>(n_elements)};
  }
  Complex& direct_ref(int tx, int rx) {
    return direct[static_cast<std::size_t>(tx) * n_pairs + rx];
  }
  std::span<Complex> reflective_ref(int tx, int rx) {
    const std::size_t off =
        (static_cast<std::size_t>(tx) * n_pairs + rx) * n_elements;
    return {reflective.data() + off, static_cast<std::size_t>(n_elements)};
  }
};

// Draws a full realization for the given placements. Distances involving the
// panel use the 3-D norm; device-to-device distances are planar because the
// devices sit at z = 0.
inline ChannelRealization sample_channel_realization(
    std::span<const Position3> tx, std::span<const Position3> rx,
    const Position3& irs, int n_elements, const PathLossParams& p,
    std::mt19937_64& direct_rng, std::mt19937_64& reflective_rng) {
  const int n = static_cast<int>(tx.size());
  if (static_cast<int>(rx.size()) != n)
    throw std::invalid_argument("tx/rx position count mismatch");
  ChannelRealization ch;
  ch.n_pairs = n;
  ch.n_elements = n_elements;
  ch.direct.resize(static_cast<std::size_t>(n) * n);
  ch.reflective.resize(static_cast<std::size_t>(n) * n * n_elements);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      ch.direct_ref(i, j) = sample_direct_channel(distance(tx[i], rx[j]), p, direct_rng);
    }
  }
  for (int i = 0; i < n; ++i) {
    const double d_tx_irs = distance(tx[i], irs);
    for (int j = 0; j < n; ++j) {
      const double d_irs_rx = distance(irs, rx[j]);
      auto elems = ch.reflective_ref(i, j);
      for (int k = 0; k < n_elements; ++k)
        elems[k] = sample_reflective_channel(d_tx_irs, d_irs_rx, p, reflective_rng);
    }
  }
  return ch;
}

}  // namespace irsopt
