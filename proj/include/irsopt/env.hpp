#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/channel.hpp"
#include "irsopt/geometry.hpp"
#include "irsopt/rng.hpp"

namespace irsopt {

// Full scenario description. Powers are watts and rates bits/s internally;
// dB/dBm inputs are converted once at the config boundary.
struct NetworkConfig {
  int n_pairs = 5;
  int n_elements = 20;           // 0 encodes operation without the panel
  double cell_radius_m = 100.0;
  double max_pair_distance_m = 10.0;
  double min_pair_distance_m = 1.0;
  double bandwidth_hz = 1e6;
  double noise_power_w = 1e-11;
  double p_max_w = 0.1;
  double r_min_bps = 0.0;
  int episode_length = 100;
  double discount = 0.9;
  double qos_penalty = 1.0;
  bool fading_per_step = false;  // redraw small-scale fading every step
  PathLossParams path_loss{};
  Position3 irs_position{0.0, 0.0, 10.0};

  double power_floor_w() const { return 1e-6 * p_max_w; }

  void validate() const {
    if (n_pairs < 1 || n_pairs > 10)
      throw std::invalid_argument("n_pairs must be in [1, 10]");
    if (n_elements < 0) throw std::invalid_argument("n_elements must be >= 0");
    if (!(cell_radius_m > 0.0))
      throw std::invalid_argument("cell_radius_m must be positive");
    if (!(max_pair_distance_m > 0.0))
      throw std::invalid_argument("max_pair_distance_m must be positive");
    if (min_pair_distance_m < 0.0 || min_pair_distance_m >= max_pair_distance_m)
      throw std::invalid_argument(
          "min_pair_distance_m must be in [0, max_pair_distance_m)");
    if (!(bandwidth_hz > 0.0))
      throw std::invalid_argument("bandwidth_hz must be positive");
    if (!(noise_power_w > 0.0))
      throw std::invalid_argument("noise_power_w must be positive");
    if (!(p_max_w > 0.0)) throw std::invalid_argument("p_max_w must be positive");
    if (r_min_bps < 0.0) throw std::invalid_argument("r_min_bps must be >= 0");
    if (episode_length < 1)
      throw std::invalid_argument("episode_length must be >= 1");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("discount must be in [0, 1)");
    if (qos_penalty < 0.0)
      throw std::invalid_argument("qos_penalty must be >= 0");
    path_loss.validate();
  }
};

// Observation: effective Tx->Rx gain matrix under the currently applied
// phase configuration. Entry (tx, rx) row-major.
struct NetworkState {
  int n_pairs = 0;
  std::vector<Complex> effective_gains;  // n_pairs * n_pairs
  int step_index = 0;

  Complex at(int tx, int rx) const {
    return effective_gains[static_cast<std::size_t>(tx) * n_pairs + rx];
  }
};

struct Action {
  std::vector<double> powers;  // watts, one per pair
  std::vector<double> thetas;  // radians, one per element
};

struct StepResult {
  NetworkState next_state;
  double reward = 0.0;                // bits/s, penalized when QoS is active
  std::vector<double> per_pair_rates; // bits/s
  int qos_violations = 0;
  bool done = false;
};

// SINR per receiver given the effective gain matrix (entry (m, n) = Tx m -> Rx n).
inline std::vector<double> compute_sinr(std::span<const Complex> gains, int n,
                                        std::span<const double> powers,
                                        double noise_power) {
  std::vector<double> sinr(static_cast<std::size_t>(n));
  for (int rx = 0; rx < n; ++rx) {
    double interference = 0.0;
    for (int tx = 0; tx < n; ++tx) {
      if (tx == rx) continue;
      interference += std::norm(gains[static_cast<std::size_t>(tx) * n + rx]) * powers[tx];
    }
    const double signal = std::norm(gains[static_cast<std::size_t>(rx) * n + rx]) * powers[rx];
    sinr[rx] = signal / (interference + noise_power);
  }
  return sinr;
}

inline std::vector<double> compute_rates(std::span<const double> sinrs,
                                         double bandwidth_hz) {
  std::vector<double> rates(sinrs.size());
  for (std::size_t i = 0; i < sinrs.size(); ++i)
    rates[i] = bandwidth_hz * std::log2(1.0 + sinrs[i]);
  return rates;
}

// Flattens the complex gain matrix to 2*N^2 reals, real/imaginary interleaved.
inline std::vector<double> flatten_state(const NetworkState& s) {
  std::vector<double> out;
  out.reserve(2 * s.effective_gains.size());
  for (const Complex& g : s.effective_gains) {
    out.push_back(g.real());
    out.push_back(g.imag());
  }
  return out;
}

// Episode lifecycle over the channel model: placement and fading are drawn at
// reset from substreams keyed by (seed, episode), so two environments with
// the same seed replay identical scenarios regardless of scheme or element
// count. Not safe for concurrent stepping; use one instance per thread.
class Environment {
 public:
  Environment(NetworkConfig config, std::uint64_t seed)
      : config_(std::move(config)), seed_(seed) {
    config_.validate();
  }

  // Starts the episode identified by `episode_id`. Device placements, fading
  // draws and the all-zero phase initialization depend only on
  // (seed, episode_id).
  NetworkState reset_episode(std::uint64_t episode_id) {
    episode_id_ = episode_id;
    auto geom_rng = make_stream(seed_, episode_id, StreamPurpose::kGeometry);
    const int n = config_.n_pairs;
    tx_.resize(n);
    rx_.resize(n);
    for (int i = 0; i < n; ++i) {
      tx_[i] = sample_in_disk(0.0, 0.0, config_.cell_radius_m, geom_rng);
      rx_[i] = sample_in_annulus(tx_[i].x, tx_[i].y, config_.min_pair_distance_m,
                                 config_.max_pair_distance_m, geom_rng);
    }
    fading_draws_ = 0;
    draw_channel();
    phases_ = PhaseShiftVector::zeros(static_cast<std::size_t>(config_.n_elements));
    step_index_ = 0;
    state_ = build_state();
    return state_;
  }

  // Convenience overload advancing an internal episode counter.
  NetworkState reset() { return reset_episode(next_episode_++); }

  StepResult step(const Action& action) {
    validate_action(action);
    phases_.theta = action.thetas;

    // Reward is earned against the realization the action was taken on.
    auto gains = effective_gains(phases_);
    auto sinr = compute_sinr(gains, config_.n_pairs, action.powers,
                             config_.noise_power_w);
    auto rates = compute_rates(sinr, config_.bandwidth_hz);

    StepResult result;
    result.per_pair_rates = rates;
    double sum = 0.0;
    double shortfall = 0.0;
    for (double r : rates) {
      sum += r;
      if (r < config_.r_min_bps) {
        ++result.qos_violations;
        shortfall += config_.r_min_bps - r;
      }
    }
    result.reward = sum - config_.qos_penalty * shortfall;

    ++step_index_;
    if (config_.fading_per_step) draw_channel();
    state_ = build_state();
    result.next_state = state_;
    result.done = (step_index_ == config_.episode_length);
    return result;
  }

  const NetworkConfig& config() const { return config_; }
  const ChannelRealization& channel() const { return channel_; }
  const NetworkState& state() const { return state_; }
  std::span<const Position3> tx_positions() const { return tx_; }
  std::span<const Position3> rx_positions() const { return rx_; }
  int step_index() const { return step_index_; }
  std::uint64_t episode_id() const { return episode_id_; }

  // Gain matrix under an arbitrary phase configuration of the current
  // realization (used by search oracles).
  std::vector<Complex> effective_gains(const PhaseShiftVector& phi) const {
    const int n = config_.n_pairs;
    std::vector<Complex> gains(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        gains[static_cast<std::size_t>(i) * n + j] =
            effective_channel(channel_.direct_at(i, j), channel_.reflective_at(i, j), phi);
    return gains;
  }

 private:
  void draw_channel() {
    // Sub-draw index folded into the episode key keeps per-step redraws
    // deterministic without perturbing the episode-level streams.
    const std::uint64_t key = episode_id_ + (static_cast<std::uint64_t>(fading_draws_) << 40);
    auto direct_rng = make_stream(seed_, key, StreamPurpose::kDirectFading);
    auto reflective_rng = make_stream(seed_, key, StreamPurpose::kReflectiveFading);
    channel_ = sample_channel_realization(tx_, rx_, config_.irs_position,
                                          config_.n_elements, config_.path_loss,
                                          direct_rng, reflective_rng);
    channel_.valid_for_step = step_index_;
    ++fading_draws_;
  }

  NetworkState build_state() const {
    NetworkState s;
    s.n_pairs = config_.n_pairs;
    s.effective_gains = effective_gains(phases_);
    s.step_index = step_index_;
    return s;
  }

  void validate_action(const Action& action) const {
    if (static_cast<int>(action.powers.size()) != config_.n_pairs)
      throw std::invalid_argument("action power count does not match n_pairs");
    if (static_cast<int>(action.thetas.size()) != config_.n_elements)
      throw std::invalid_argument("action phase count does not match n_elements");
    for (double p : action.powers)
      if (!(p > 0.0) || p > config_.p_max_w * (1.0 + 1e-12))
        throw std::domain_error("transmit power outside (0, p_max]");
    for (double t : action.thetas)
      if (!(t >= 0.0 && t <= kTwoPi))
        throw std::domain_error("phase shift outside [0, 2*pi]");
  }

  NetworkConfig config_;
  std::uint64_t seed_ = 0;
  std::uint64_t episode_id_ = 0;
  std::uint64_t next_episode_ = 0;
  int fading_draws_ = 0;
  int step_index_ = 0;
  std::vector<Position3> tx_;
  std::vector<Position3> rx_;
  ChannelRealization channel_;
  PhaseShiftVector phases_;
  NetworkState state_;
};

}  // namespace irsopt
