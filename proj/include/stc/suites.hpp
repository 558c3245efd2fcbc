#pragma once

// The experiment suites (certificate table, baselines, ablations,
// robustness) and the regression gate against a reference-values document.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stc/harness.hpp"

namespace stc {

enum class SuiteId { verify, baselines, ablation_a, ablation_b, robustness_mass, robustness_disturbance };

std::string_view to_string(SuiteId id);
SuiteId parse_suite_id(std::string_view name);

struct SuiteSpec {
  SuiteId id = SuiteId::verify;
  std::vector<PlantId> plants;  // empty: the suite's default plant list
  int n_eval = 100;
  std::uint64_t base_seed = 0;
  int parallelism = 1;
  std::vector<double> mass_scales{0.7, 1.0, 1.3};
  bool domain_randomization = true;  // robustness_mass adds a DR cell
  double w_c = 0.0;
};

/// Plants a suite covers by default.
std::vector<PlantId> default_plants(SuiteId id);

struct DisturbanceCondition {
  std::string name;
  DisturbanceSpec spec;
};

/// The seven disturbance conditions for a plant: none, two constant, two
/// periodic (1 Hz, 2 Hz) and two impulse amplitudes, on input channel 0.
std::vector<DisturbanceCondition> disturbance_grid(PlantId id);

/// Runs every cell; a failing cell is reported with an "error" field and
/// does not stop the others. Report layout:
///   {"suite": ..., "cells": {"<cell key>": {...metrics...}}}
nlohmann::json run_suite(const SuiteSpec& spec);

struct CheckOutcome {
  std::string suite;
  std::string cell;
  std::string metric;
  std::string op;
  std::string expected;  // rendered for display
  double observed = 0.0;
  bool pass = false;
  std::string source;
};

/// Checks reference entries against suite reports. Entries whose suite is
/// absent from `reports` are skipped; entries for cells not present in a
/// report are skipped when `only_present` is set (partial runs, e.g. one
/// plant). A metric path missing from a present cell, or a malformed
/// entry, throws ConfigError.
std::vector<CheckOutcome> compare_report(const std::vector<nlohmann::json>& reports,
                                         const nlohmann::json& reference, bool only_present = true);

/// Dotted path lookup ("msi.mean", "state_norms.theta"); nullptr if absent.
const nlohmann::json* find_path(const nlohmann::json& root, std::string_view path);

}  // namespace stc
