#pragma once

#include "stc/plants.hpp"
#include "stc/riccati.hpp"
#include "stc/trigger.hpp"

namespace stc {

struct RewardConfig {
  double w_c = 0.0;
  double near_origin_guard = 0.25;  // fraction of v_scale
  double rta_penalty_scale = 100.0;
  double terminal_penalty = -1000.0;

  void validate() const;
};

struct RewardTerms {
  double stability = 0.0;      // r_stab + 1 - V(x_next)/V_scale
  double communication = 0.0;  // w_c * normalized MSI squared
  double safety = 0.0;         // -scale when overridden / predicate violated
  double terminal = 0.0;       // terminal penalty on a bound violation
  double total = 0.0;
  bool decreased = false;      // r_stab was +1

  /// The order in which total is accumulated.
  static double sum(double stability, double communication, double safety, double terminal) {
    return ((stability + communication) + safety) + terminal;
  }
};

/// msi_k is the tracker value at decision time, before the update with tau.
RewardTerms compute_reward(const RewardConfig& config, const RiccatiCert& cert,
                           const TriggerGrid& grid, const State& x_k, const State& x_next,
                           double tau, double msi_k, bool penalized, bool terminated_by_violation);

}  // namespace stc
