#include "stc/policy.hpp"

#include <cmath>
#include <string>

#include "stc/errors.hpp"

namespace stc {

std::string_view to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::time_limit:
      return "time_limit";
    case TerminationCause::state_bound:
      return "state_bound";
    case TerminationCause::integration_fault:
      return "integration_fault";
    case TerminationCause::protocol_fault:
      return "protocol_fault";
  }
  return "unknown";
}

int require_grid_index(const TriggerGrid& grid, double tau) {
  const auto idx = grid.index_of(tau);
  if (!idx) throw ConfigError("interval " + std::to_string(tau) + " s is not on the trigger grid");
  return *idx;
}

Action LqrPolicy::propose(const EnvSpec& spec, const DecisionContext& ctx) {
  return {backup_input(spec.cert, spec.plant.u_limits(), ctx.obs.x), tau_index_};
}

ClassicalStcPolicy::ClassicalStcPolicy(const EnvSpec& spec) {
  transitions_.reserve(static_cast<std::size_t>(spec.grid.count));
  for (int i = 0; i < spec.grid.count; ++i) {
    transitions_.push_back(zoh_closed_loop(spec.cert, spec.linear, spec.grid.tau(i)));
  }
}

bool ClassicalStcPolicy::passes(const EnvSpec& spec, const State& x, int tau_index) const {
  const State predicted = transitions_[static_cast<std::size_t>(tau_index)] * x;
  const double tau = spec.grid.tau(tau_index);
  return spec.cert.value(predicted) <= spec.cert.value(x) * std::exp(-spec.cert.lambda * tau);
}

Action ClassicalStcPolicy::propose(const EnvSpec& spec, const DecisionContext& ctx) {
  Action a{backup_input(spec.cert, spec.plant.u_limits(), ctx.obs.x), 0};
  for (int i = spec.grid.count - 1; i > 0; --i) {
    if (passes(spec, ctx.obs.x, i)) {
      a.tau_index = i;
      break;
    }
  }
  return a;
}

void FixedTauPolicy::reset(const EnvSpec& spec, int episode, std::uint64_t seed) {
  inner_->reset(spec, episode, seed);
}

Action FixedTauPolicy::propose(const EnvSpec& spec, const DecisionContext& ctx) {
  Action a = inner_->propose(spec, ctx);
  a.tau_index = tau_index_;
  return a;
}

void FixedTauPolicy::finish(const EnvSpec& spec, const EpisodeEnd& end) { inner_->finish(spec, end); }

void RandomPolicy::reset(const EnvSpec& /*spec*/, int /*episode*/, std::uint64_t seed) {
  // Decorrelate from the engine's stream, which uses the same seed.
  rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
}

Action RandomPolicy::propose(const EnvSpec& spec, const DecisionContext& /*ctx*/) {
  Action a;
  a.u.resize(spec.input_dim());
  for (int i = 0; i < spec.input_dim(); ++i) {
    const auto& lv = spec.action_levels[static_cast<std::size_t>(i)];
    a.u(i) = lv[static_cast<std::size_t>(rng_() % lv.size())];
  }
  a.tau_index = static_cast<int>(rng_() % static_cast<std::uint64_t>(spec.grid.count));
  return a;
}

Action ConstantPolicy::propose(const EnvSpec& /*spec*/, const DecisionContext& /*ctx*/) {
  return {u_, tau_index_};
}

PolicyFactory make_policy_factory(std::string_view name) {
  const std::string n(name);
  if (n == "b1" || n == "lqr") {
    return [](const EnvSpec&) { return std::make_unique<LqrPolicy>(0); };
  }
  if (n == "b2") {
    return [](const EnvSpec& spec) {
      return std::make_unique<LqrPolicy>(require_grid_index(spec.grid, spec.tau_match));
    };
  }
  if (n == "b3" || n == "classical_stc") {
    return [](const EnvSpec& spec) { return std::make_unique<ClassicalStcPolicy>(spec); };
  }
  if (n == "random") {
    return [](const EnvSpec&) { return std::make_unique<RandomPolicy>(); };
  }
  if (n == "zero") {
    return [](const EnvSpec& spec) {
      return std::make_unique<ConstantPolicy>(Input::Zero(spec.input_dim()), 0);
    };
  }
  const auto at = n.find('@');
  if (at != std::string::npos) {
    const std::string base = n.substr(0, at);
    double tau = 0.0;
    try {
      std::size_t used = 0;
      tau = std::stod(n.substr(at + 1), &used);
      if (used != n.size() - at - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("policy '" + n + "': cannot parse the interval after '@'");
    }
    if (base == "lqr") {
      return [tau](const EnvSpec& spec) {
        return std::make_unique<LqrPolicy>(require_grid_index(spec.grid, tau));
      };
    }
    if (base == "fixed_b3") {
      return [tau](const EnvSpec& spec) {
        return std::make_unique<FixedTauPolicy>(std::make_unique<ClassicalStcPolicy>(spec),
                                                require_grid_index(spec.grid, tau));
      };
    }
  }
  throw ConfigError("unknown policy '" + n +
                    "' (expected b1, b2, b3, random, zero, lqr@<tau>, fixed_b3@<tau>)");
}

}  // namespace stc
