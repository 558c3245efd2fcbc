#include "stc/reward.hpp"

#include <cmath>

#include "stc/errors.hpp"

namespace stc {

void RewardConfig::validate() const {
  if (!(w_c >= 0.0) || !std::isfinite(w_c)) throw ConfigError("reward: w_c must be finite and >= 0");
  if (!std::isfinite(near_origin_guard) || near_origin_guard < 0.0) {
    throw ConfigError("reward: near_origin_guard must be finite and >= 0");
  }
  if (!std::isfinite(rta_penalty_scale) || !std::isfinite(terminal_penalty)) {
    throw ConfigError("reward: penalty scales must be finite");
  }
}

RewardTerms compute_reward(const RewardConfig& config, const RiccatiCert& cert,
                           const TriggerGrid& grid, const State& x_k, const State& x_next,
                           double tau, double msi_k, bool penalized, bool terminated_by_violation) {
  RewardTerms terms;
  const double v_k = cert.value(x_k);
  const double v_next = cert.value(x_next);
  terms.decreased =
      v_next <= v_k * std::exp(-cert.lambda * tau) || v_k < config.near_origin_guard * cert.v_scale;
  const double r_stab = terms.decreased ? 1.0 : -1.0;
  terms.stability = r_stab + 1.0 - v_next / cert.v_scale;

  const double span = grid.tau_max() - grid.tau_min;
  const double normalized = span > 0.0 ? (msi_k - grid.tau_min) / span : 0.0;
  terms.communication = config.w_c * normalized * normalized;

  terms.safety = penalized ? -config.rta_penalty_scale : 0.0;
  terms.terminal = terminated_by_violation ? config.terminal_penalty : 0.0;
  terms.total = RewardTerms::sum(terms.stability, terms.communication, terms.safety, terms.terminal);
  return terms;
}

}  // namespace stc
