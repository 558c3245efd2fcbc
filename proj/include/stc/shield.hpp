#pragma once

// Run-time assurance: one-step-ahead prediction of the monitored angles and
// the override to the clipped LQR backup at tau_min.

#include <string_view>
#include <vector>

#include "stc/plants.hpp"
#include "stc/riccati.hpp"
#include "stc/trigger.hpp"

namespace stc {

enum class ShieldMode { hard, soft, off };

std::string_view to_string(ShieldMode mode);
ShieldMode parse_shield_mode(std::string_view name);

/// q = c'x with its threshold.
struct SafetyChannel {
  Vector selector;
  double theta_rta = 0.0;
};

struct ShieldConfig {
  ShieldMode mode = ShieldMode::hard;
  std::vector<SafetyChannel> channels;
  /// Evaluated on the current state: |x[index]| >= bound trips the predicate.
  std::vector<StateBound> position_bounds;
};

struct SafetyPrediction {
  std::vector<double> q_hat;  // one per channel
  bool violated = false;
};

/// q_hat = q + tau q' + tau^2/2 q''_lin, where q' = c'f(x, u) uses the
/// nonlinear model and q''_lin = c'A(Ax + Bu) uses the linearization.
SafetyPrediction predict_safety(const ShieldConfig& shield, const PlantModel& model,
                                const LinearPlant& linear, const State& x, const Input& u,
                                double tau);

Input clip_input(const Input& u, const Vector& limits);

/// clip(-Kx) to the actuator limits.
Input backup_input(const RiccatiCert& cert, const Vector& limits, const State& x);

struct ShieldDecision {
  Input u;
  int tau_index = 0;
  bool fired = false;
  bool predicate = false;
};

/// hard: override on a violated predicate; soft: pass through, predicate
/// reported; off: pass through, predicate not evaluated.
ShieldDecision shield_filter(const ShieldConfig& shield, const RiccatiCert& cert,
                             const PlantModel& model, const LinearPlant& linear,
                             const TriggerGrid& grid, const State& x, const Input& u,
                             int tau_index);

/// |c'x| > theta_rta on any channel.
bool hard_violation(const ShieldConfig& shield, const State& x);

}  // namespace stc
