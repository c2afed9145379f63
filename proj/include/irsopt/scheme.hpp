#pragma once

#include <stdexcept>
#include <string>

#include "irsopt/env.hpp"

namespace irsopt {

// The four comparison schemes. All share the environment; they differ in
// which action dimensions the learned policy controls.
enum class SchemeId {
  kProposed,    // joint power + phase control
  kMpt,         // powers pinned to p_max, learned phases
  kRps,         // learned powers, uniformly random phases
  kWithoutIrs,  // learned powers, no reflecting elements
};

inline const char* scheme_name(SchemeId s) {
  switch (s) {
    case SchemeId::kProposed: return "PROPOSED";
    case SchemeId::kMpt: return "MPT";
    case SchemeId::kRps: return "RPS";
    case SchemeId::kWithoutIrs: return "WITHOUT_IRS";
  }
  throw std::logic_error("unreachable");
}

inline SchemeId parse_scheme(const std::string& name) {
  if (name == "PROPOSED") return SchemeId::kProposed;
  if (name == "MPT") return SchemeId::kMpt;
  if (name == "RPS") return SchemeId::kRps;
  if (name == "WITHOUT_IRS") return SchemeId::kWithoutIrs;
  throw std::invalid_argument("unknown scheme '" + name +
                              "' (expected PROPOSED, MPT, RPS or WITHOUT_IRS)");
}

// How a scheme's policy output maps onto the environment action.
struct ActionLayout {
  int power_dims = 0;   // learned power dimensions (0 => pinned to p_max)
  int phase_dims = 0;   // learned phase dimensions (0 => random or absent)
  bool pin_power_max = false;
  bool random_phases = false;

  int total_dims() const { return power_dims + phase_dims; }
};

inline ActionLayout make_action_layout(SchemeId scheme, const NetworkConfig& cfg) {
  switch (scheme) {
    case SchemeId::kProposed:
      return {cfg.n_pairs, cfg.n_elements, false, false};
    case SchemeId::kMpt:
      return {0, cfg.n_elements, true, false};
    case SchemeId::kRps:
      return {cfg.n_pairs, 0, false, true};
    case SchemeId::kWithoutIrs:
      return {cfg.n_pairs, 0, false, false};
  }
  throw std::logic_error("unreachable");
}

// Scheme-adjusted scenario: operation without the panel removes all elements.
inline NetworkConfig scheme_config(SchemeId scheme, NetworkConfig cfg) {
  if (scheme == SchemeId::kWithoutIrs) cfg.n_elements = 0;
  return cfg;
}

}  // namespace irsopt
