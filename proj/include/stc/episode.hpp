#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stc/env.hpp"
#include "stc/policy.hpp"

namespace stc {

struct StepRecord {
  double t = 0.0;
  State x;
  double msi = 0.0;  // tracker value at decision time
  Input u_proposed;
  Input u_executed;
  int tau_index_proposed = 0;
  int tau_index_executed = 0;
  double tau_executed = 0.0;
  bool fired = false;
  bool predicate = false;
  bool hard_violation = false;  // |c'x| > theta_RTA at this decision instant
  bool impulse = false;
  RewardTerms reward;
  double v_before = 0.0;
  double v_after = 0.0;
  long substeps = 0;
};

struct SubstepSample {
  double t = 0.0;
  State x;
};

struct TraceOptions {
  /// Keep every dt-resolution state (heavy: 50k samples per 50 s episode).
  bool record_substeps = false;
};

struct EpisodeTrace {
  int episode = 0;
  std::uint64_t seed = 0;
  double mass_scale = 1.0;
  double tau_min = 0.0;
  double dt = 0.0;
  State x0;
  std::vector<StepRecord> steps;
  std::vector<SubstepSample> substeps;
  /// Running sum of x_i^2 over every sub-step state (multiply by dt for the integral).
  Vector sq_sum;
  double length = 0.0;  // s
  TerminationCause cause = TerminationCause::time_limit;
  std::string fault;
  double msi_tracker_final = 0.0;
};

/// One episode. The episode RNG is seeded with `seed` and consumed in a fixed
/// order: domain-randomized mass, initial state, then one impulse draw per
/// decision.
EpisodeTrace run_episode(const EnvSpec& spec, Policy& policy, std::uint64_t seed,
                         int episode = 0, const TraceOptions& options = {});

/// P_i = sqrt(sum_j x_i(t_j)^2 dt) over sub-step states (rectangle rule).
/// Uses the recorded sub-steps when present, else the streamed sums; both
/// accumulate in the same order.
Vector state_norms(const EpisodeTrace& trace);

/// Mean of executed intervals. Exactly tau_min when every interval is tau_min.
double mean_executed_tau(const EpisodeTrace& trace);

/// CSV with one row per decision. Header documented in docs/trace_format.md.
void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);
std::string trace_csv_header(int state_dim, int input_dim);

}  // namespace stc
