#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/env.hpp"
#include "irsopt/policy.hpp"
#include "irsopt/scheme.hpp"
#include "irsopt/stats.hpp"

namespace irsopt {

// Episode index base for evaluation channels, far above any training episode
// so evaluation draws never depend on the training budget.
inline constexpr std::uint64_t kEvalEpisodeBase = 1ULL << 32;

struct Transition {
  std::vector<double> state;       // normalized observation the action saw
  std::vector<double> action_raw;  // pre-squash policy sample
  double log_prob_old = 0.0;
  double reward = 0.0;             // in trainer units (see reward_scale)
  double value_est = 0.0;
  double next_value_est = 0.0;
  bool done = false;
};

struct PpoHyperparams {
  double clip_epsilon = 0.2;
  double discount = 0.9;
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs_per_update = 4;
  double value_loss_coeff = 0.5;
  int max_episodes = 500;
  int eval_episodes = 500;
  bool advantage_normalization = true;
  bool strict_terminal = false;     // true: no bootstrap past the horizon
  double reward_scale = 0.0;        // <= 0 selects 1/bandwidth
  bool use_adam = false;            // non-default optimizer switch
  bool rps_fixed_per_episode = false;
  double initial_std = 0.5;
  int hidden1 = 128;
  int hidden2 = 64;

  void validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
      throw std::invalid_argument("clip_epsilon must be in (0, 1)");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("discount must be in [0, 1)");
    if (!(learning_rate >= 0.0))
      throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs_per_update < 1)
      throw std::invalid_argument("epochs_per_update must be >= 1");
    if (value_loss_coeff < 0.0)
      throw std::invalid_argument("value_loss_coeff must be >= 0");
    if (max_episodes < 0) throw std::invalid_argument("max_episodes must be >= 0");
    if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
    if (!(initial_std > 0.0))
      throw std::invalid_argument("initial_std must be positive");
    if (hidden1 < 1 || hidden2 < 1)
      throw std::invalid_argument("hidden layer sizes must be >= 1");
  }

  double effective_reward_scale(const NetworkConfig& cfg) const {
    return reward_scale > 0.0 ? reward_scale : 1.0 / cfg.bandwidth_hz;
  }
};

// One-step temporal-difference advantage. Terminal transitions drop the
// bootstrap term.
inline double advantage(const Transition& t, double discount) {
  const double next = t.done ? 0.0 : t.next_value_est;
  return t.reward + discount * next - t.value_est;
}

// Advantages for a fixed-horizon rollout. With `bootstrap_final` the last
// step keeps its bootstrap value (horizon end is a time limit, not a
// terminal state); otherwise the stored done flags decide.
inline std::vector<double> compute_advantages(std::span<const Transition> rollout,
                                              double discount,
                                              bool bootstrap_final) {
  std::vector<double> adv(rollout.size());
  for (std::size_t i = 0; i < rollout.size(); ++i) {
    const Transition& t = rollout[i];
    const bool terminal = t.done && !bootstrap_final;
    const double next = terminal ? 0.0 : t.next_value_est;
    adv[i] = t.reward + discount * next - t.value_est;
  }
  return adv;
}

// Pessimistic clipped policy objective for a single sample.
inline double clipped_surrogate(double ratio, double advantage_value,
                                double clip_epsilon) {
  if (!(ratio > 0.0)) throw std::domain_error("probability ratio must be positive");
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage_value, clipped * advantage_value);
}

// Policy + value networks with the scheme's action layout and the running
// observation normalizer. Parameters are plain members so tests and
// checkpoints can reach them.
class PpoAgent {
 public:
  PpoAgent() = default;

  PpoAgent(SchemeId scheme, const NetworkConfig& cfg,
           const PpoHyperparams& hyper, std::uint64_t seed)
      : scheme_(scheme),
        layout_(make_action_layout(scheme, cfg)),
        obs_norm(2 * static_cast<std::size_t>(cfg.n_pairs) * cfg.n_pairs) {
    if (layout_.total_dims() < 1)
      throw std::invalid_argument(
          "scheme leaves no learnable action dimensions for this scenario");
    const int obs_dim = 2 * cfg.n_pairs * cfg.n_pairs;
    const double p_floor = cfg.power_floor_w();
    for (int i = 0; i < layout_.power_dims; ++i) {
      box.lo.push_back(p_floor);
      box.hi.push_back(cfg.p_max_w);
    }
    for (int i = 0; i < layout_.phase_dims; ++i) {
      box.lo.push_back(0.0);
      box.hi.push_back(kTwoPi);
    }
    box.validate();
    const std::vector<int> policy_dims{obs_dim, hyper.hidden1, hyper.hidden2,
                                       layout_.total_dims()};
    const std::vector<int> value_dims{obs_dim, hyper.hidden1, hyper.hidden2, 1};
    auto seeds = make_stream(seed, 0, StreamPurpose::kPolicy);
    policy = GaussianPolicy(policy_dims, seeds(), hyper.initial_std);
    value = Mlp(value_dims, seeds(), 1.0);
    n_pairs_ = cfg.n_pairs;
    n_elements_ = cfg.n_elements;
    p_max_ = cfg.p_max_w;
    rps_fixed_per_episode_ = hyper.rps_fixed_per_episode;
  }

  SchemeId scheme() const { return scheme_; }
  const ActionLayout& layout() const { return layout_; }

  // Redraws per-episode state (fixed random phases when configured).
  void begin_episode(std::mt19937_64& rng) {
    if (layout_.random_phases && rps_fixed_per_episode_) {
      episode_phases_.resize(static_cast<std::size_t>(n_elements_));
      for (double& t : episode_phases_) t = uniform_phase(rng);
    }
  }

  std::vector<double> observe_and_update(const NetworkState& s) {
    auto flat = flatten_state(s);
    obs_norm.update(flat);
    return obs_norm.normalize(flat);
  }
  std::vector<double> observe(const NetworkState& s) const {
    return obs_norm.normalize(flatten_state(s));
  }

  struct SampledAction {
    Action env_action;
    std::vector<double> raw;
    double log_prob = 0.0;
  };

  SampledAction sample(std::span<const double> norm_state,
                       std::mt19937_64& exploration_rng) {
    const auto mean = policy.net.forward(norm_state);
    auto raw = policy.sample_raw(mean, exploration_rng);
    SampledAction out;
    out.log_prob = gaussian_log_prob(mean, policy.log_std, raw);
    out.env_action = assemble(squash(raw, box), exploration_rng);
    out.raw = std::move(raw);
    return out;
  }

  // Deterministic evaluation action: the Gaussian mean, squashed. Random
  // phases (the RPS scheme) still draw from the supplied stream.
  Action act_mean(std::span<const double> norm_state,
                  std::mt19937_64& phase_rng) const {
    const auto mean = policy.net.forward(norm_state);
    return assemble(squash(mean, box), phase_rng);
  }

  double value_of(std::span<const double> norm_state) const {
    return value.forward(norm_state)[0];
  }

  // Maps squashed policy outputs onto the full environment action.
  Action assemble(std::span<const double> squashed,
                  std::mt19937_64& phase_rng) const {
    Action a;
    if (layout_.pin_power_max) {
      a.powers.assign(static_cast<std::size_t>(n_pairs_), p_max_);
    } else {
      a.powers.assign(squashed.begin(), squashed.begin() + layout_.power_dims);
    }
    if (layout_.phase_dims > 0) {
      a.thetas.assign(squashed.begin() + layout_.power_dims, squashed.end());
    } else if (layout_.random_phases) {
      if (rps_fixed_per_episode_) {
        a.thetas = episode_phases_;
      } else {
        a.thetas.resize(static_cast<std::size_t>(n_elements_));
        for (double& t : a.thetas) t = uniform_phase(phase_rng);
      }
    } else {
      a.thetas.assign(static_cast<std::size_t>(n_elements_), 0.0);
    }
    return a;
  }

  nlohmann::json to_json() const {
    return {{"format", "irsopt-checkpoint-v1"},
            {"scheme", scheme_name(scheme_)},
            {"n_pairs", n_pairs_},
            {"n_elements", n_elements_},
            {"p_max_w", p_max_},
            {"layout",
             {{"power_dims", layout_.power_dims},
              {"phase_dims", layout_.phase_dims},
              {"pin_power_max", layout_.pin_power_max},
              {"random_phases", layout_.random_phases}}},
            {"box", {{"lo", box.lo}, {"hi", box.hi}}},
            {"policy", policy.to_json()},
            {"value", value.to_json()},
            {"obs_norm", obs_norm.to_json()},
            {"rps_fixed_per_episode", rps_fixed_per_episode_}};
  }

  static PpoAgent from_json(const nlohmann::json& j) {
    if (j.at("format").get<std::string>() != "irsopt-checkpoint-v1")
      throw std::invalid_argument("unsupported checkpoint format");
    PpoAgent a;
    a.scheme_ = parse_scheme(j.at("scheme").get<std::string>());
    a.n_pairs_ = j.at("n_pairs").get<int>();
    a.n_elements_ = j.at("n_elements").get<int>();
    a.p_max_ = j.at("p_max_w").get<double>();
    const auto& lay = j.at("layout");
    a.layout_ = {lay.at("power_dims").get<int>(), lay.at("phase_dims").get<int>(),
                 lay.at("pin_power_max").get<bool>(),
                 lay.at("random_phases").get<bool>()};
    a.box.lo = j.at("box").at("lo").get<std::vector<double>>();
    a.box.hi = j.at("box").at("hi").get<std::vector<double>>();
    a.box.validate();
    a.policy = GaussianPolicy::from_json(j.at("policy"));
    a.value = Mlp::from_json(j.at("value"));
    a.obs_norm = RunningMeanVar::from_json(j.at("obs_norm"));
    a.rps_fixed_per_episode_ = j.value("rps_fixed_per_episode", false);
    return a;
  }

  GaussianPolicy policy;
  Mlp value;
  RunningMeanVar obs_norm;
  BoundedBox box;

 private:
  SchemeId scheme_ = SchemeId::kProposed;
  ActionLayout layout_{};
  int n_pairs_ = 0;
  int n_elements_ = 0;
  double p_max_ = 0.0;
  bool rps_fixed_per_episode_ = false;
  std::vector<double> episode_phases_;
};

struct EpisodeStats {
  double mean_reward_bps = 0.0;        // mean per-step reward, bits/s
  double mean_feasible_bps = 0.0;      // rates counted only when >= r_min
  double qos_violation_rate = 0.0;
};

// Runs one full episode under the stochastic policy, storing value
// estimates for every visited state. Values are computed after the rollout
// completes, once all observations exist.
inline std::vector<Transition> collect_rollout(Environment& env, PpoAgent& agent,
                                               std::uint64_t episode_id,
                                               const PpoHyperparams& hyper,
                                               std::mt19937_64& exploration_rng,
                                               EpisodeStats* stats = nullptr) {
  const NetworkConfig& cfg = env.config();
  const double scale = hyper.effective_reward_scale(cfg);
  const int horizon = cfg.episode_length;
  agent.begin_episode(exploration_rng);
  NetworkState state = env.reset_episode(episode_id);

  std::vector<Transition> rollout;
  rollout.reserve(static_cast<std::size_t>(horizon));
  std::vector<std::vector<double>> norm_states;
  norm_states.reserve(static_cast<std::size_t>(horizon) + 1);
  norm_states.push_back(agent.observe_and_update(state));

  double reward_sum = 0.0;
  double feasible_sum = 0.0;
  long violations = 0;
  for (int t = 0; t < horizon; ++t) {
    auto sampled = agent.sample(norm_states.back(), exploration_rng);
    StepResult result = env.step(sampled.env_action);
    Transition tr;
    tr.state = norm_states.back();
    tr.action_raw = std::move(sampled.raw);
    tr.log_prob_old = sampled.log_prob;
    tr.reward = result.reward * scale;
    tr.done = result.done;
    rollout.push_back(std::move(tr));
    norm_states.push_back(agent.observe_and_update(result.next_state));
    reward_sum += result.reward;
    violations += result.qos_violations;
    for (double r : result.per_pair_rates)
      if (r >= cfg.r_min_bps) feasible_sum += r;
  }
  for (std::size_t t = 0; t < rollout.size(); ++t) {
    rollout[t].value_est = agent.value_of(norm_states[t]);
    rollout[t].next_value_est = agent.value_of(norm_states[t + 1]);
  }
  if (stats) {
    stats->mean_reward_bps = reward_sum / horizon;
    stats->mean_feasible_bps = feasible_sum / horizon;
    stats->qos_violation_rate =
        static_cast<double>(violations) / (static_cast<double>(horizon) * cfg.n_pairs);
  }
  return rollout;
}

// Mean clipped surrogate of a batch under the agent's current parameters;
// diagnostic used by the ratio-at-update-start checks.
struct SurrogateDiagnostics {
  double surrogate = 0.0;
  double max_abs_ratio_minus_one = 0.0;
};

inline SurrogateDiagnostics surrogate_diagnostics(
    const PpoAgent& agent, std::span<const Transition> batch,
    std::span<const double> advantages, double clip_epsilon) {
  SurrogateDiagnostics d;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto mean = agent.policy.net.forward(batch[i].state);
    const double lp =
        gaussian_log_prob(mean, agent.policy.log_std, batch[i].action_raw);
    const double ratio = std::exp(lp - batch[i].log_prob_old);
    d.surrogate += clipped_surrogate(ratio, advantages[i], clip_epsilon);
    d.max_abs_ratio_minus_one =
        std::max(d.max_abs_ratio_minus_one, std::abs(ratio - 1.0));
  }
  if (!batch.empty()) d.surrogate /= static_cast<double>(batch.size());
  return d;
}

namespace detail {

struct OptimizerState {
  AdamState policy_adam;
  AdamState value_adam;
  std::vector<double> log_std_m;
  std::vector<double> log_std_v;
  long log_std_t = 0;
};

// One ascent step over a minibatch: clipped policy objective minus the
// value regression penalty.
inline void minibatch_step(PpoAgent& agent, std::span<const Transition> batch,
                           std::span<const std::size_t> indices,
                           std::span<const double> advantages,
                           const PpoHyperparams& hyper,
                           OptimizerState* opt_state) {
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  MlpGradients policy_grads = agent.policy.net.make_gradients();
  MlpGradients value_grads = agent.value.make_gradients();
  std::vector<double> log_std_grad(agent.policy.log_std.size(), 0.0);
  Mlp::Cache policy_cache;
  Mlp::Cache value_cache;

  for (std::size_t idx : indices) {
    const Transition& tr = batch[idx];
    const double adv = advantages[idx];

    const auto mean = agent.policy.net.forward(tr.state, policy_cache);
    const double lp = gaussian_log_prob(mean, agent.policy.log_std, tr.action_raw);
    const double ratio = std::exp(lp - tr.log_prob_old);

    // Gradient of min(ratio*A, clip(ratio)*A) w.r.t. log pi: the attained
    // branch decides; a clipped active branch has zero slope outside the band.
    const double unclipped = ratio * adv;
    const double clipped =
        std::clamp(ratio, 1.0 - hyper.clip_epsilon, 1.0 + hyper.clip_epsilon) * adv;
    double d_logp = 0.0;
    if (unclipped <= clipped) {
      d_logp = adv * ratio;
    } else if (ratio > 1.0 - hyper.clip_epsilon && ratio < 1.0 + hyper.clip_epsilon) {
      d_logp = adv * ratio;
    }
    d_logp *= inv_n;

    if (d_logp != 0.0) {
      auto d_mean = gaussian_dlogp_dmean(mean, agent.policy.log_std, tr.action_raw);
      for (double& g : d_mean) g *= d_logp;
      agent.policy.net.backward(policy_cache, d_mean, policy_grads);
      auto d_lstd = gaussian_dlogp_dlogstd(mean, agent.policy.log_std, tr.action_raw);
      for (std::size_t k = 0; k < log_std_grad.size(); ++k)
        log_std_grad[k] += d_logp * d_lstd[k];
    }

    // Value regression toward the frozen bootstrap target r + discount*V'.
    const double target = tr.reward + hyper.discount * (tr.done && hyper.strict_terminal
                                                            ? 0.0
                                                            : tr.next_value_est);
    const double v = agent.value.forward(tr.state, value_cache)[0];
    const double d_v = -hyper.value_loss_coeff * 2.0 * (v - target) * inv_n;
    const double dv_arr[1] = {d_v};
    agent.value.backward(value_cache, dv_arr, value_grads);
  }

  if (opt_state && hyper.use_adam) {
    adam_step(agent.policy.net, policy_grads, opt_state->policy_adam,
              hyper.learning_rate);
    adam_step(agent.value, value_grads, opt_state->value_adam, hyper.learning_rate);
    if (opt_state->log_std_m.empty()) {
      opt_state->log_std_m.assign(log_std_grad.size(), 0.0);
      opt_state->log_std_v.assign(log_std_grad.size(), 0.0);
    }
    ++opt_state->log_std_t;
    const double bc1 = 1.0 - std::pow(0.9, opt_state->log_std_t);
    const double bc2 = 1.0 - std::pow(0.999, opt_state->log_std_t);
    for (std::size_t k = 0; k < agent.policy.log_std.size(); ++k) {
      auto& m = opt_state->log_std_m[k];
      auto& v = opt_state->log_std_v[k];
      m = 0.9 * m + 0.1 * log_std_grad[k];
      v = 0.999 * v + 0.001 * log_std_grad[k] * log_std_grad[k];
      agent.policy.log_std[k] +=
          hyper.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
    }
  } else {
    agent.policy.net.sgd_step(policy_grads, hyper.learning_rate);
    agent.value.sgd_step(value_grads, hyper.learning_rate);
    for (std::size_t k = 0; k < agent.policy.log_std.size(); ++k)
      agent.policy.log_std[k] += hyper.learning_rate * log_std_grad[k];
  }
  agent.policy.clamp_log_std();
}

}  // namespace detail

// Multi-epoch minibatch update over one batch of transitions. Advantages are
// the one-step TD form over the stored (old-policy) value estimates,
// optionally standardized over the batch before the surrogate.
inline void update(PpoAgent& agent, std::span<const Transition> batch,
                   const PpoHyperparams& hyper, std::mt19937_64& shuffle_rng,
                   detail::OptimizerState* opt_state = nullptr) {
  if (batch.empty()) throw std::invalid_argument("update requires a non-empty batch");
  hyper.validate();

  std::vector<double> adv =
      compute_advantages(batch, hyper.discount, !hyper.strict_terminal);
  if (hyper.advantage_normalization && adv.size() > 1) {
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) /
                  static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size() - 1);
    const double sd = std::sqrt(var) + 1e-8;
    for (double& a : adv) a = (a - mean) / sd;
  }

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb =
      std::min<std::size_t>(static_cast<std::size_t>(hyper.batch_size), batch.size());
  for (int epoch = 0; epoch < hyper.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      detail::minibatch_step(agent, batch,
                             std::span<const std::size_t>(order).subspan(start, end - start),
                             adv, hyper, opt_state);
    }
  }
}

struct EpisodeRecord {
  int episode = 0;
  double mean_reward_bps = 0.0;
  double qos_violation_rate = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainResult {
  PpoAgent agent;
  std::vector<EpisodeRecord> curve;
};

// Full training loop: per episode, collect a rollout, estimate advantages
// and run the minibatch update. Deterministic for a fixed seed.
inline TrainResult train(SchemeId scheme, const NetworkConfig& base_cfg,
                         const PpoHyperparams& hyper, std::uint64_t seed) {
  const NetworkConfig cfg = scheme_config(scheme, base_cfg);
  cfg.validate();
  hyper.validate();
  TrainResult result;
  result.agent = PpoAgent(scheme, cfg, hyper, seed);
  Environment env(cfg, seed);
  auto exploration_rng = make_stream(seed, 0, StreamPurpose::kExploration);
  auto shuffle_rng = make_stream(seed, 0, StreamPurpose::kShuffle);
  detail::OptimizerState opt_state;
  const auto t0 = std::chrono::steady_clock::now();
  for (int episode = 0; episode < hyper.max_episodes; ++episode) {
    EpisodeStats stats;
    auto rollout = collect_rollout(env, result.agent,
                                   static_cast<std::uint64_t>(episode), hyper,
                                   exploration_rng, &stats);
    update(result.agent, rollout, hyper, shuffle_rng,
           hyper.use_adam ? &opt_state : nullptr);
    EpisodeRecord rec;
    rec.episode = episode;
    rec.mean_reward_bps = stats.mean_reward_bps;
    rec.qos_violation_rate = stats.qos_violation_rate;
    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.curve.push_back(rec);
  }
  return result;
}

struct EvalResult {
  double mean_sum_rate_bps = 0.0;       // rates counted only when >= r_min
  double std_sum_rate_bps = 0.0;        // across episodes
  double mean_total_sum_rate_bps = 0.0; // all rates regardless of QoS
  double qos_violation_rate = 0.0;
};

// Deterministic-policy evaluation over fresh channel episodes. The
// normalizer is frozen; channels are keyed by (seed, kEvalEpisodeBase + i)
// so all schemes face identical draws.
inline EvalResult evaluate(const PpoAgent& agent, const NetworkConfig& base_cfg,
                           int n_episodes, std::uint64_t seed) {
  const NetworkConfig cfg = scheme_config(agent.scheme(), base_cfg);
  Environment env(cfg, seed);
  auto phase_rng = make_stream(seed, 0, StreamPurpose::kEvaluation);
  PpoAgent scratch = agent;  // begin_episode mutates per-episode phase cache

  std::vector<double> per_episode_feasible;
  std::vector<double> per_episode_total;
  per_episode_feasible.reserve(static_cast<std::size_t>(n_episodes));
  long violations = 0;
  const int horizon = cfg.episode_length;
  for (int e = 0; e < n_episodes; ++e) {
    NetworkState state = env.reset_episode(kEvalEpisodeBase + e);
    scratch.begin_episode(phase_rng);
    double feasible = 0.0;
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const auto norm = scratch.observe(state);
      StepResult r = env.step(scratch.act_mean(norm, phase_rng));
      for (double rate : r.per_pair_rates) {
        total += rate;
        if (rate >= cfg.r_min_bps)
          feasible += rate;
        else
          ++violations;
      }
      state = r.next_state;
    }
    per_episode_feasible.push_back(feasible / horizon);
    per_episode_total.push_back(total / horizon);
  }
  EvalResult out;
  const double n = static_cast<double>(n_episodes);
  out.mean_sum_rate_bps =
      std::accumulate(per_episode_feasible.begin(), per_episode_feasible.end(), 0.0) / n;
  out.mean_total_sum_rate_bps =
      std::accumulate(per_episode_total.begin(), per_episode_total.end(), 0.0) / n;
  double var = 0.0;
  for (double v : per_episode_feasible) {
    const double d = v - out.mean_sum_rate_bps;
    var += d * d;
  }
  out.std_sum_rate_bps = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  out.qos_violation_rate =
      static_cast<double>(violations) / (n * horizon * cfg.n_pairs);
  return out;
}

}  // namespace irsopt
