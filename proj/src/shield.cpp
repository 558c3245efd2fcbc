#include "stc/shield.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stc/errors.hpp"

namespace stc {

std::string_view to_string(ShieldMode mode) {
  switch (mode) {
    case ShieldMode::hard:
      return "hard";
    case ShieldMode::soft:
      return "soft";
    case ShieldMode::off:
      return "off";
  }
  return "unknown";
}

ShieldMode parse_shield_mode(std::string_view name) {
  if (name == "hard") return ShieldMode::hard;
  if (name == "soft") return ShieldMode::soft;
  if (name == "off") return ShieldMode::off;
  throw ConfigError("unknown shield mode '" + std::string(name) + "' (expected hard, soft or off)");
}

SafetyPrediction predict_safety(const ShieldConfig& shield, const PlantModel& model,
                                const LinearPlant& linear, const State& x, const Input& u,
                                double tau) {
  SafetyPrediction out;
  out.q_hat.reserve(shield.channels.size());
  const State f = model.derivative(x, u);
  const Vector accel = linear.a * (linear.a * x + linear.b * u);
  for (const SafetyChannel& ch : shield.channels) {
    const double q = ch.selector.dot(x);
    const double q_dot = ch.selector.dot(f);
    const double q_ddot = ch.selector.dot(accel);
    const double q_hat = q + tau * q_dot + 0.5 * tau * tau * q_ddot;
    out.q_hat.push_back(q_hat);
    if (!(std::abs(q_hat) <= ch.theta_rta)) out.violated = true;
  }
  for (const StateBound& pb : shield.position_bounds) {
    if (!(std::abs(x(pb.index)) < pb.bound)) out.violated = true;
  }
  return out;
}

Input clip_input(const Input& u, const Vector& limits) {
  if (u.size() != limits.size()) throw DimensionError("clip_input: size mismatch");
  Input out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = std::clamp(u(i), -limits(i), limits(i));
  return out;
}

Input backup_input(const RiccatiCert& cert, const Vector& limits, const State& x) {
  // Accumulated left to right so that any client computing -Kx the same way
  // obtains the same bits.
  const Eigen::Index m = cert.k.rows();
  Input u(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < cert.k.cols(); ++j) acc += cert.k(i, j) * x(j);
    u(i) = -acc;
  }
  return clip_input(u, limits);
}

ShieldDecision shield_filter(const ShieldConfig& shield, const RiccatiCert& cert,
                             const PlantModel& model, const LinearPlant& linear,
                             const TriggerGrid& grid, const State& x, const Input& u,
                             int tau_index) {
  if (!grid.valid_index(tau_index)) throw DomainError("shield_filter: tau index outside the grid");
  ShieldDecision out{u, tau_index, false, false};
  if (shield.mode == ShieldMode::off) return out;
  out.predicate = predict_safety(shield, model, linear, x, u, grid.tau(tau_index)).violated;
  if (out.predicate && shield.mode == ShieldMode::hard) {
    out.u = backup_input(cert, linear.u_max, x);
    out.tau_index = 0;
    out.fired = true;
  }
  return out;
}

bool hard_violation(const ShieldConfig& shield, const State& x) {
  for (const SafetyChannel& ch : shield.channels) {
    if (!(std::abs(ch.selector.dot(x)) <= ch.theta_rta)) return true;
  }
  return false;
}

}  // namespace stc
