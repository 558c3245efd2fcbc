#pragma once

// Per-plant environment configuration: certificate, shield, trigger grid,
// reward, initial-state distribution and termination bounds.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stc/plants.hpp"
#include "stc/reward.hpp"
#include "stc/riccati.hpp"
#include "stc/shield.hpp"
#include "stc/trigger.hpp"

namespace stc {

struct EnvSpec {
  EnvSpec(PlantModel plant_, PlantModel nominal_, LinearPlant linear_, RiccatiCert cert_)
      : plant(std::move(plant_)),
        nominal(std::move(nominal_)),
        linear(std::move(linear_)),
        cert(std::move(cert_)) {}

  PlantModel plant;    // simulated dynamics, possibly mass-scaled
  PlantModel nominal;  // model the certificate and shield predictions use
  LinearPlant linear;
  RiccatiCert cert;

  std::vector<std::pair<double, double>> init_ranges;
  std::vector<StateBound> termination;
  double t_max = 50.0;

  TriggerGrid grid;
  ShieldConfig shield;
  RewardConfig reward;
  DisturbanceSpec disturbance;
  bool domain_randomization = false;
  std::pair<double, double> dr_range{0.6, 1.4};

  double l_delta = 0.0;
  int sat_channel = 0;  // input channel / state row that define theta_sat
  int sat_row = 0;
  bool expect_certified = true;  // whether M_disc at tau_min is expected PSD

  /// Discrete action levels per input channel, for index-valued actions.
  std::vector<std::vector<double>> action_levels;
  /// Interval used by the fixed-rate "matched" baseline.
  double tau_match = 0.0;

  int state_dim() const { return plant.state_dim(); }
  int input_dim() const { return plant.input_dim(); }
};

struct EnvOptions {
  ShieldMode shield = ShieldMode::hard;
  double w_c = 0.0;
  double mass_scale = 1.0;
  DisturbanceSpec disturbance;
  bool domain_randomization = false;
  std::optional<double> tau_min;
  std::optional<int> grid_count;
  std::optional<double> t_max;
  std::optional<double> l_delta;
  std::optional<double> dt;
  /// Physical parameter overrides; they redefine the nominal plant, so the
  /// certificate is re-synthesized from them.
  std::map<std::string, double> params;
};

/// Throws ConfigError for inconsistent options and SynthesisError when the
/// overridden plant has no stabilizing LQR.
EnvSpec make_env_spec(PlantId id, const EnvOptions& options = {});

/// Independent uniform draw per state dimension.
State sample_initial_state(const EnvSpec& spec, Rng& rng);

/// Default Q and R weights for a plant.
std::pair<Matrix, Matrix> default_weights(PlantId id);

CertReport build_cert_report(const EnvSpec& spec);

}  // namespace stc
