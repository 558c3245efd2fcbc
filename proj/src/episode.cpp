#include "stc/episode.hpp"

#include <cmath>
#include <string>

#include "stc/errors.hpp"

namespace stc {
namespace {

void validate_action(const EnvSpec& spec, const Action& a) {
  if (a.u.size() != spec.input_dim()) {
    throw ProtocolError("policy returned " + std::to_string(a.u.size()) + " inputs, expected " +
                        std::to_string(spec.input_dim()));
  }
  if (!a.u.allFinite()) throw ProtocolError("policy returned a non-finite input");
  if (!spec.grid.valid_index(a.tau_index)) {
    throw ProtocolError("policy returned tau index " + std::to_string(a.tau_index) +
                        " outside the grid");
  }
}

}  // namespace

EpisodeTrace run_episode(const EnvSpec& spec, Policy& policy, std::uint64_t seed, int episode,
                         const TraceOptions& options) {
  Rng rng(seed);
  PlantModel plant = spec.plant;
  if (spec.domain_randomization) {
    plant.set_mass_scale(uniform(rng, spec.dr_range.first, spec.dr_range.second));
  }

  EpisodeTrace trace;
  trace.episode = episode;
  trace.seed = seed;
  trace.mass_scale = plant.mass_scale();
  trace.tau_min = spec.grid.tau_min;
  trace.dt = plant.dt();
  trace.x0 = sample_initial_state(spec, rng);
  trace.sq_sum = Vector::Zero(spec.state_dim());
  const std::size_t expected_steps =
      static_cast<std::size_t>(std::ceil(spec.t_max / spec.grid.tau_min)) + 1;
  trace.steps.reserve(expected_steps);

  DisturbanceSignal disturbance(spec.disturbance, spec.input_dim());
  MsiTracker msi(spec.grid.tau_min);
  Observation obs{trace.x0, msi.value(), 0};
  StepFeedback feedback;
  bool have_feedback = false;
  long clock = 0;  // elapsed sub-steps; t = clock * dt avoids drift
  const double dt = plant.dt();

  SubstepObserver observer = [&trace, &options](double t, const State& s) {
    trace.sq_sum.array() += s.array().square();
    if (options.record_substeps) trace.substeps.push_back({t, s});
  };

  trace.cause = TerminationCause::time_limit;
  bool aborted = false;
  try {
    policy.reset(spec, episode, seed);
  } catch (const ProtocolError& e) {
    trace.cause = TerminationCause::protocol_fault;
    trace.fault = e.what();
    aborted = true;
  }
  int k = 0;
  while (!aborted && static_cast<double>(clock) * dt < spec.t_max) {
    const double t = static_cast<double>(clock) * dt;
    Action proposed;
    try {
      DecisionContext ctx{episode, k, obs, have_feedback ? &feedback : nullptr};
      proposed = policy.propose(spec, ctx);
      validate_action(spec, proposed);
    } catch (const ProtocolError& e) {
      trace.cause = TerminationCause::protocol_fault;
      trace.fault = e.what();
      break;
    }

    StepRecord rec;
    rec.t = t;
    rec.x = obs.x;
    rec.msi = obs.msi;
    rec.u_proposed = proposed.u;
    rec.tau_index_proposed = proposed.tau_index;

    const Input clipped = clip_input(proposed.u, plant.u_limits());
    const ShieldDecision decision = shield_filter(spec.shield, spec.cert, spec.nominal, spec.linear,
                                                  spec.grid, obs.x, clipped, proposed.tau_index);
    rec.u_executed = decision.u;
    rec.tau_index_executed = decision.tau_index;
    rec.tau_executed = spec.grid.tau(decision.tau_index);
    rec.fired = decision.fired;
    rec.predicate = decision.predicate;
    rec.hard_violation = hard_violation(spec.shield, obs.x);

    disturbance.begin_interval(rng);
    rec.impulse = disturbance.impulse_active();
    const HoldResult hold = integrate_hold(plant, obs.x, decision.u, disturbance, t,
                                           rec.tau_executed, spec.termination, &observer);
    clock += hold.substeps;
    rec.substeps = hold.substeps;

    const bool penalized = spec.shield.mode != ShieldMode::off && decision.predicate;
    rec.reward = compute_reward(spec.reward, spec.cert, spec.grid, obs.x, hold.x_next,
                                rec.tau_executed, obs.msi, penalized, hold.early_stop);
    rec.v_before = spec.cert.value(obs.x);
    rec.v_after = spec.cert.value(hold.x_next);
    trace.steps.push_back(rec);

    msi.update(rec.tau_executed);
    feedback.reward = rec.reward;
    feedback.fired = rec.fired;
    feedback.predicate = rec.predicate;
    feedback.tau_index_executed = rec.tau_index_executed;
    feedback.u_executed = rec.u_executed;
    have_feedback = true;
    obs = Observation{hold.x_next, msi.value(), decision.fired ? 1 : 0};
    ++k;

    if (hold.early_stop) {
      trace.cause = hold.fault ? TerminationCause::integration_fault : TerminationCause::state_bound;
      break;
    }
  }

  trace.length = static_cast<double>(clock) * dt;
  trace.msi_tracker_final = msi.value();
  policy.finish(spec, EpisodeEnd{episode, k, obs, have_feedback ? &feedback : nullptr, trace.cause});
  return trace;
}

Vector state_norms(const EpisodeTrace& trace) {
  if (trace.substeps.empty()) return (trace.sq_sum * trace.dt).cwiseSqrt();
  Vector sum = Vector::Zero(trace.sq_sum.size());
  for (const SubstepSample& s : trace.substeps) sum.array() += s.x.array().square();
  return (sum * trace.dt).cwiseSqrt();
}

double mean_executed_tau(const EpisodeTrace& trace) {
  if (trace.steps.empty()) return 0.0;
  // Multiples of tau_min are summed as integers, so a constant interval
  // reproduces tau_min exactly.
  long multiples = 0;
  for (const StepRecord& r : trace.steps) multiples += r.tau_index_executed + 1;
  return trace.tau_min * (static_cast<double>(multiples) / static_cast<double>(trace.steps.size()));
}

}  // namespace stc
