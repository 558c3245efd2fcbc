#pragma once

// The contract between the episode engine and anything that proposes
// (u, tau) pairs, plus the built-in non-learned controllers.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "stc/env.hpp"

namespace stc {

struct Observation {
  State x;
  double msi = 0.0;
  int b = 0;  // 1 iff the shield overrode the previous decision
};

struct Action {
  Input u;
  int tau_index = 0;
};

enum class TerminationCause { time_limit, state_bound, integration_fault, protocol_fault };

std::string_view to_string(TerminationCause cause);

/// What the engine reports back about the previous decision.
struct StepFeedback {
  RewardTerms reward;
  bool fired = false;
  bool predicate = false;
  int tau_index_executed = 0;
  Input u_executed;
};

struct DecisionContext {
  int episode = 0;
  int k = 0;
  const Observation& obs;
  const StepFeedback* previous = nullptr;  // null at k = 0
};

struct EpisodeEnd {
  int episode = 0;
  int k = 0;  // number of decisions taken
  const Observation& final_obs;
  const StepFeedback* last = nullptr;
  TerminationCause cause = TerminationCause::time_limit;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual void reset(const EnvSpec& /*spec*/, int /*episode*/, std::uint64_t /*seed*/) {}
  /// May throw ProtocolError; the engine then aborts the episode.
  virtual Action propose(const EnvSpec& spec, const DecisionContext& ctx) = 0;
  virtual void finish(const EnvSpec& /*spec*/, const EpisodeEnd& /*end*/) {}
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(const EnvSpec&)>;

/// clip(-Kx) at a fixed grid index.
class LqrPolicy final : public Policy {
 public:
  explicit LqrPolicy(int tau_index) : tau_index_(tau_index) {}
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;

 private:
  int tau_index_;
};

/// Greedy Lyapunov self-triggering: clip(-Kx) with the largest grid interval
/// whose linearized prediction M(tau)x satisfies V <= V(x) e^{-lambda tau};
/// tau_min when none does.
class ClassicalStcPolicy final : public Policy {
 public:
  explicit ClassicalStcPolicy(const EnvSpec& spec);
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;

  /// Decay test at one grid index for state x (exposed for tests).
  bool passes(const EnvSpec& spec, const State& x, int tau_index) const;

 private:
  std::vector<Matrix> transitions_;  // M(tau_i)
};

/// Wraps another policy and replaces its interval.
class FixedTauPolicy final : public Policy {
 public:
  FixedTauPolicy(std::unique_ptr<Policy> inner, int tau_index)
      : inner_(std::move(inner)), tau_index_(tau_index) {}
  void reset(const EnvSpec& spec, int episode, std::uint64_t seed) override;
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;
  void finish(const EnvSpec& spec, const EpisodeEnd& end) override;

 private:
  std::unique_ptr<Policy> inner_;
  int tau_index_;
};

/// Uniform random input levels and grid indices, seeded per episode.
class RandomPolicy final : public Policy {
 public:
  void reset(const EnvSpec& spec, int episode, std::uint64_t seed) override;
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;

 private:
  Rng rng_;
};

/// Constant input at a fixed grid index.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(Input u, int tau_index) : u_(std::move(u)), tau_index_(tau_index) {}
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;

 private:
  Input u_;
  int tau_index_;
};

/// Named policies: "b1"/"lqr", "b2", "b3"/"classical_stc", "random", "zero",
/// "lqr@<tau>", "fixed_b3@<tau>". Throws ConfigError for unknown names.
PolicyFactory make_policy_factory(std::string_view name);

/// Grid index of tau, or ConfigError.
int require_grid_index(const TriggerGrid& grid, double tau);

}  // namespace stc
