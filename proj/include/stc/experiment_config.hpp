#pragma once

// JSON experiment configuration for the CLI. Unknown keys are rejected;
// to_json emits the normalized form with every default filled in.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/env.hpp"
#include "stc/harness.hpp"

namespace stc {

struct ExperimentConfig {
  PlantId plant = PlantId::pendulum;
  std::string policy = "b3";  // a built-in name, or "bridge"
  std::vector<std::string> bridge_command;
  int bridge_timeout_ms = 10000;
  ShieldMode shield = ShieldMode::hard;
  double w_c = 0.0;
  std::optional<double> tau_min;
  std::optional<int> grid_count;
  std::optional<double> t_max;
  std::optional<double> l_delta;
  double mass_scale = 1.0;
  bool domain_randomization = false;
  DisturbanceSpec disturbance;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  int n_eval = 100;
  int parallelism = 1;
  std::string out_dir = "out";
  TraceRetention traces = TraceRetention::none;

  EnvOptions env_options() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// STCLAB_OUT_DIR and STCLAB_PARALLELISM; `getenv` is injectable for tests.
void apply_env_overrides(ExperimentConfig& config,
                         const std::function<const char*(const char*)>& getenv);

/// "none", "constant:A", "periodic:A:F", "impulse:A[:P]", optional
/// "@channel" suffix. Throws ConfigError.
DisturbanceSpec parse_disturbance_arg(const std::string& text);

}  // namespace stc
