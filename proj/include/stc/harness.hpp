#pragma once

// Seeded multi-episode evaluation and metric aggregation.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/episode.hpp"

namespace stc {

enum class TraceRetention { none, summary, full };

std::string_view to_string(TraceRetention r);
TraceRetention parse_trace_retention(std::string_view name);

struct EvalConfig {
  const EnvSpec* spec = nullptr;
  PolicyFactory policy;
  int n_eval = 100;
  std::uint64_t base_seed = 0;  // episode i uses base_seed + i
  int parallelism = 1;
  TraceRetention retention = TraceRetention::none;
  bool record_substeps = false;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

/// Per-episode metrics, the unit the summary aggregates.
struct EpisodeSummary {
  int episode = 0;
  std::uint64_t seed = 0;
  double mass_scale = 1.0;
  double msi = 0.0;          // mean executed tau
  double msi_tracker = 0.0;  // moving-average value at episode end
  double rta_pct = 0.0;
  double hard_violation_pct = 0.0;
  double predicate_pct = 0.0;
  Vector state_norms;
  double length = 0.0;
  int decisions = 0;
  double total_reward = 0.0;
  TerminationCause cause = TerminationCause::time_limit;
};

EpisodeSummary summarize(const EpisodeTrace& trace);

struct MetricsSummary {
  int episodes = 0;
  int degraded = 0;  // protocol faults
  MeanStd msi;
  MeanStd msi_tracker;
  MeanStd rta_pct;
  double hard_violation_pct = 0.0;
  double predicate_pct = 0.0;
  std::vector<double> state_norms;  // per-dimension means of P_i
  MeanStd length;
  double min_length = 0.0;
  double mean_reward = 0.0;
  std::map<std::string, int> causes;
};

/// Aggregates in episode order; the result depends only on the multiset
/// of summaries keyed by episode index, never on completion order.
MetricsSummary aggregate(std::vector<EpisodeSummary> episodes);

struct Evaluation {
  MetricsSummary summary;
  std::vector<EpisodeSummary> episodes;  // kept for summary and full retention
  std::vector<EpisodeTrace> traces;      // kept for full retention
};

/// Throws ConfigError for an invalid configuration.
Evaluation evaluate(const EvalConfig& config);

/// Mean with the first element as shift, so identical values average to
/// themselves exactly and the spread is computed without cancellation.
MeanStd mean_std(const std::vector<double>& values);

nlohmann::json to_json(const MetricsSummary& m, const std::vector<std::string>& state_names);
nlohmann::json to_json(const EpisodeSummary& e);
nlohmann::json to_json(const CertReport& r, const EnvSpec& spec);

/// Human-readable state names per plant, e.g. "theta", "theta_dot".
std::vector<std::string> state_names(PlantId id);

}  // namespace stc
